#ifndef RSMGAN_EVALKIT_HPP
#define RSMGAN_EVALKIT_HPP

#include <optional>
#include <vector>

namespace rsmgan {

/// Half-open raw-point interval [start, end).
struct Window {
    long start = 0;
    long end = 0;
    long width() const { return end - start; }
    bool contains(long t) const { return t >= start && t < end; }
};

struct PointMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double fpr = 0.0;
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Point-wise confusion over the evaluated range: a detected point inside
/// any label window is a TP, outside all windows an FP; undetected window
/// points are FNs. Windows are clipped to the evaluated range.
PointMetrics point_metrics(const std::vector<long>& detected_points,
                           const std::vector<Window>& label_windows,
                           const std::vector<Window>& eval_range);

struct NabProfile {
    double tp_weight = 1.0;
    double fp_weight = 0.11;
    double fn_weight = 1.0;
};

/// Numenta-style score: the first detection inside each window earns a
/// scaled-sigmoid credit (earlier is larger), every false positive is
/// charged through the sigmoid tail of the preceding window, and each
/// missed window costs the FN weight. The total is normalized by the
/// perfect detector's raw score, so a perfect detector scores 1.0.
double nab_score(const std::vector<long>& detected_points,
                 const std::vector<Window>& label_windows, const NabProfile& profile = {});

double nab_scaled_sigmoid(double relative_position);

/// Mean over matched windows of |predicted ∩ true| / |true|. Each truth
/// window is matched to the predicted window with the largest overlap;
/// empty when nothing matches.
struct RootCausePrediction {
    Window window;
    std::vector<long> series;
};

struct RootCauseTruth {
    Window window;
    std::vector<long> series;
};

std::optional<double> root_cause_recall(const std::vector<RootCausePrediction>& predictions,
                                        const std::vector<RootCauseTruth>& truth);

struct EvalReport {
    PointMetrics points;
    double nab = 0.0;
    std::optional<double> rc_recall;
};

} // namespace rsmgan

#endif
