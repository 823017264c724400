#ifndef RSMGAN_ROOTCAUSE_HPP
#define RSMGAN_ROOTCAUSE_HPP

#include "rsmgan/evalkit.hpp"
#include "rsmgan/tensor.hpp"

#include <string>
#include <vector>

namespace rsmgan {

enum class RootCauseMethod { NB, AE };

RootCauseMethod root_cause_method_from_string(const std::string& s);
std::string to_string(RootCauseMethod m);

/// Average of residual matrices over an anomaly window.
Tensor average_residual(const std::vector<Tensor>& window_residuals);

/// Per-series severity over the averaged residual: NB counts broken tiles
/// in the union of the series' row and column (diagonal once), AE sums the
/// absolute errors over the same cells.
std::vector<double> score_series(const std::vector<Tensor>& window_residuals,
                                 RootCauseMethod method, double theta_b);

struct ElbowResult {
    long k = 0;
    std::vector<long> selected;  // series indices, descending score
    long elbow_index = 0;        // position in the descending order
    bool distinguished = false;  // false when every score is equal
};

/// Elbow selection on the descending score curve: min-max normalize both
/// axes, take the point with maximum perpendicular distance to the line
/// joining the first and last scores (earliest index wins ties), and keep
/// the series whose scores are strictly greater than the elbow score.
ElbowResult select_elbow(const std::vector<double>& scores);

struct RootCauseReport {
    Window window_steps; // [start, end) in MCM steps
    Window window_raw;   // expanded to raw points
    RootCauseMethod method = RootCauseMethod::AE;
    std::vector<double> scores;
    std::vector<long> selected;
    long elbow_index = 0;
    bool distinguished = false;
};

void write_root_cause_reports_json(const std::vector<RootCauseReport>& reports,
                                   const std::string& path);

} // namespace rsmgan

#endif
