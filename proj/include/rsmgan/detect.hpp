#ifndef RSMGAN_DETECT_HPP
#define RSMGAN_DETECT_HPP

#include "rsmgan/evalkit.hpp"
#include "rsmgan/tensor.hpp"

#include <string>
#include <vector>

namespace rsmgan {

enum class ScoreMethod { context_b, context_h };

ScoreMethod score_method_from_string(const std::string& s);
std::string to_string(ScoreMethod m);

/// Residual matrices aligned to MCM step indices.
struct ResidualTrace {
    std::vector<long> steps;
    std::vector<Tensor> residuals; // (n, n)
    long p = 1;
};

struct ThresholdFit {
    double eta996 = 0.0;
    double beta_b = 1.0;
    double beta_h = 1.0;
    double theta_b = 0.0;
    double theta_h = 0.0;
    std::string objective = "f1";
    bool from_grid_search = false;
};

/// Count of broken tiles: elements with |value| > theta_b.
long score_context_b(const Tensor& residual, double theta_b);

/// Broken tiles restricted to rows/columns that are more than half broken
/// at theta_h; each tile counts once even when both its row and column
/// qualify.
long score_context_h(const Tensor& residual, double theta_h);

/// q-th percentile (0..100) with linear interpolation between order
/// statistics.
double percentile(std::vector<double> values, double q);

const std::vector<double>& default_beta_grid();

/// eta996 from the training residuals, betas by grid search maximizing the
/// validation objective (F1 by default, "nab" also supported) with
/// theta_h <= theta_b enforced. Empty validation labels fall back to
/// beta = 1 with a warning on stderr.
ThresholdFit fit_thresholds(const ResidualTrace& train, const ResidualTrace& validation,
                            const std::vector<Window>& val_labels,
                            const std::vector<double>& beta_grid = default_beta_grid(),
                            const std::string& objective = "f1");

struct ScoreTrace {
    ScoreMethod method = ScoreMethod::context_h;
    std::vector<long> steps;
    std::vector<long> scores;
    std::vector<char> detections; // score > 0
    std::vector<std::int64_t> step_epochs; // optional, aligned when set
    long p = 1;
    double theta = 0.0;
};

ScoreTrace score_trace(const ResidualTrace& residuals, ScoreMethod method, double theta);

/// Raw time points covered by detected steps (each step spans p points).
std::vector<long> detected_raw_points(const ScoreTrace& trace);

/// Union of the steps' raw blocks, merged into maximal windows.
std::vector<Window> step_blocks(const std::vector<long>& steps, long p);

void write_score_trace_csv(const ScoreTrace& trace, const std::string& path);
void write_threshold_json(const ThresholdFit& fit, const std::string& path);

} // namespace rsmgan

#endif
