#include "rsmgan/rootcause.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace rsmgan {

RootCauseMethod root_cause_method_from_string(const std::string& s) {
    if (s == "NB" || s == "nb") return RootCauseMethod::NB;
    if (s == "AE" || s == "ae") return RootCauseMethod::AE;
    throw std::invalid_argument("unknown root cause method: '" + s + "'");
}

std::string to_string(RootCauseMethod m) { return m == RootCauseMethod::NB ? "NB" : "AE"; }

Tensor average_residual(const std::vector<Tensor>& window_residuals) {
    if (window_residuals.empty())
        throw std::invalid_argument("average_residual: empty anomaly window");
    Tensor avg = Tensor::zeros(window_residuals[0].shape());
    for (const auto& r : window_residuals) {
        if (!r.same_shape(avg)) throw std::invalid_argument("average_residual: shape mismatch");
        avg.array() += r.array();
    }
    avg.array() /= static_cast<double>(window_residuals.size());
    return avg;
}

std::vector<double> score_series(const std::vector<Tensor>& window_residuals,
                                 RootCauseMethod method, double theta_b) {
    Tensor avg = average_residual(window_residuals);
    if (avg.rank() != 2 || avg.dim(0) != avg.dim(1))
        throw std::invalid_argument("score_series: square residual expected");
    const long n = avg.dim(0);
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    for (long i = 0; i < n; ++i) {
        double s = 0.0;
        for (long j = 0; j < n; ++j) {
            // Row i, then column i without the diagonal (counted once).
            double rv = std::abs(avg.at2(i, j));
            if (method == RootCauseMethod::NB)
                s += rv > theta_b ? 1.0 : 0.0;
            else
                s += rv;
            if (j != i) {
                double cv = std::abs(avg.at2(j, i));
                if (method == RootCauseMethod::NB)
                    s += cv > theta_b ? 1.0 : 0.0;
                else
                    s += cv;
            }
        }
        scores[static_cast<size_t>(i)] = s;
    }
    return scores;
}

ElbowResult select_elbow(const std::vector<double>& scores) {
    const long n = static_cast<long>(scores.size());
    if (n < 2) throw std::invalid_argument("select_elbow: need at least two scores");

    std::vector<long> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&scores](long a, long b) {
        return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    });

    const double s_max = scores[static_cast<size_t>(order.front())];
    const double s_min = scores[static_cast<size_t>(order.back())];
    ElbowResult res;
    if (s_max == s_min) {
        // Flat curve: no distinguished root cause.
        res.k = 0;
        res.distinguished = false;
        res.elbow_index = 0;
        return res;
    }
    res.distinguished = true;

    // Min-max normalized (rank, score) plane; the chord runs from (0,1) to
    // (1,0), so the perpendicular distance is |1 - x - y| / sqrt(2).
    double best = -1.0;
    long elbow = 0;
    for (long i = 0; i < n; ++i) {
        double x = static_cast<double>(i) / static_cast<double>(n - 1);
        double y = (scores[static_cast<size_t>(order[static_cast<size_t>(i)])] - s_min) /
                   (s_max - s_min);
        double d = std::abs(1.0 - x - y);
        if (d > best) {
            best = d;
            elbow = i;
        }
    }
    res.elbow_index = elbow;
    const double elbow_score = scores[static_cast<size_t>(order[static_cast<size_t>(elbow)])];
    for (long i = 0; i < n; ++i) {
        long idx = order[static_cast<size_t>(i)];
        if (scores[static_cast<size_t>(idx)] > elbow_score) res.selected.push_back(idx);
    }
    res.k = static_cast<long>(res.selected.size());
    return res;
}

void write_root_cause_reports_json(const std::vector<RootCauseReport>& reports,
                                   const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["window_steps"] = {r.window_steps.start, r.window_steps.end};
        j["window_raw"] = {r.window_raw.start, r.window_raw.end};
        j["method"] = to_string(r.method);
        j["scores"] = r.scores;
        j["selected"] = r.selected;
        j["elbow_index"] = r.elbow_index;
        j["distinguished"] = r.distinguished;
        arr.push_back(std::move(j));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_root_cause_reports_json: cannot open " + path);
    out << arr.dump(2) << "\n";
}

} // namespace rsmgan
