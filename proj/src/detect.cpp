#include "rsmgan/detect.hpp"

#include "rsmgan/series.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace rsmgan {

ScoreMethod score_method_from_string(const std::string& s) {
    if (s == "context_b") return ScoreMethod::context_b;
    if (s == "context_h") return ScoreMethod::context_h;
    throw std::invalid_argument("unknown score method: '" + s + "'");
}

std::string to_string(ScoreMethod m) {
    return m == ScoreMethod::context_b ? "context_b" : "context_h";
}

long score_context_b(const Tensor& residual, double theta_b) {
    long count = 0;
    for (long i = 0; i < residual.numel(); ++i)
        if (std::abs(residual[i]) > theta_b) ++count;
    return count;
}

long score_context_h(const Tensor& residual, double theta_h) {
    if (residual.rank() != 2 || residual.dim(0) != residual.dim(1))
        throw std::invalid_argument("score_context_h: square residual expected");
    const long n = residual.dim(0);
    std::vector<long> row_broken(static_cast<size_t>(n), 0);
    std::vector<long> col_broken(static_cast<size_t>(n), 0);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (std::abs(residual.at2(i, j)) > theta_h) {
                ++row_broken[static_cast<size_t>(i)];
                ++col_broken[static_cast<size_t>(j)];
            }
    // A line qualifies with strictly more than half its tiles broken.
    const double half = static_cast<double>(n) / 2.0;
    long score = 0;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            if (std::abs(residual.at2(i, j)) <= theta_h) continue;
            if (static_cast<double>(row_broken[static_cast<size_t>(i)]) > half ||
                static_cast<double>(col_broken[static_cast<size_t>(j)]) > half)
                ++score;
        }
    return score;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile: q out of range");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const long lo = static_cast<long>(std::floor(pos));
    const long hi = static_cast<long>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[static_cast<size_t>(lo)] * (1.0 - frac) + values[static_cast<size_t>(hi)] * frac;
}

const std::vector<double>& default_beta_grid() {
    static const std::vector<double> grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
    return grid;
}

namespace {

double objective_value(const ScoreTrace& trace, const std::vector<Window>& labels,
                       const std::vector<Window>& eval_range, const std::string& objective) {
    std::vector<long> dets = detected_raw_points(trace);
    if (objective == "nab") return nab_score(dets, labels);
    return point_metrics(dets, labels, eval_range).f1;
}

} // namespace

ThresholdFit fit_thresholds(const ResidualTrace& train, const ResidualTrace& validation,
                            const std::vector<Window>& val_labels,
                            const std::vector<double>& beta_grid, const std::string& objective) {
    if (train.residuals.empty()) throw std::invalid_argument("fit_thresholds: no training residuals");
    if (beta_grid.empty()) throw std::invalid_argument("fit_thresholds: empty beta grid");
    if (objective != "f1" && objective != "nab")
        throw std::invalid_argument("fit_thresholds: unknown objective '" + objective + "'");

    std::vector<double> errors;
    errors.reserve(train.residuals.size() * static_cast<size_t>(train.residuals[0].numel()));
    for (const auto& r : train.residuals)
        for (long i = 0; i < r.numel(); ++i) errors.push_back(std::abs(r[i]));

    ThresholdFit fit;
    fit.objective = objective;
    fit.eta996 = percentile(std::move(errors), 99.6);

    if (val_labels.empty() || validation.residuals.empty()) {
        std::cerr << "[detect] warning: no validation labels; falling back to beta = 1\n";
        fit.beta_b = fit.beta_h = 1.0;
        fit.theta_b = fit.theta_h = fit.eta996;
        return fit;
    }

    const std::vector<Window> eval_range = step_blocks(validation.steps, validation.p);

    // First maximum in ascending grid order wins; beta_h is constrained so
    // that theta_h <= theta_b.
    double best_b = -1.0;
    for (double beta : beta_grid) {
        ScoreTrace t = score_trace(validation, ScoreMethod::context_b, beta * fit.eta996);
        double v = objective_value(t, val_labels, eval_range, objective);
        if (v > best_b) {
            best_b = v;
            fit.beta_b = beta;
        }
    }
    double best_h = -1.0;
    for (double beta : beta_grid) {
        if (beta > fit.beta_b) continue;
        ScoreTrace t = score_trace(validation, ScoreMethod::context_h, beta * fit.eta996);
        double v = objective_value(t, val_labels, eval_range, objective);
        if (v > best_h) {
            best_h = v;
            fit.beta_h = beta;
        }
    }
    fit.theta_b = fit.beta_b * fit.eta996;
    fit.theta_h = fit.beta_h * fit.eta996;
    fit.from_grid_search = true;
    return fit;
}

ScoreTrace score_trace(const ResidualTrace& residuals, ScoreMethod method, double theta) {
    if (residuals.steps.size() != residuals.residuals.size())
        throw std::invalid_argument("score_trace: misaligned residual trace");
    ScoreTrace trace;
    trace.method = method;
    trace.p = residuals.p;
    trace.theta = theta;
    trace.steps = residuals.steps;
    trace.scores.reserve(residuals.residuals.size());
    trace.detections.reserve(residuals.residuals.size());
    for (const auto& r : residuals.residuals) {
        long s = method == ScoreMethod::context_b ? score_context_b(r, theta)
                                                  : score_context_h(r, theta);
        trace.scores.push_back(s);
        trace.detections.push_back(s > 0 ? 1 : 0);
    }
    return trace;
}

std::vector<long> detected_raw_points(const ScoreTrace& trace) {
    std::vector<long> points;
    for (size_t i = 0; i < trace.steps.size(); ++i) {
        if (!trace.detections[i]) continue;
        const long base = trace.steps[i] * trace.p;
        for (long t = base; t < base + trace.p; ++t) points.push_back(t);
    }
    std::sort(points.begin(), points.end());
    return points;
}

std::vector<Window> step_blocks(const std::vector<long>& steps, long p) {
    std::vector<long> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Window> blocks;
    for (long s : sorted) {
        long lo = s * p, hi = (s + 1) * p;
        if (!blocks.empty() && blocks.back().end == lo)
            blocks.back().end = hi;
        else
            blocks.push_back({lo, hi});
    }
    return blocks;
}

void write_score_trace_csv(const ScoreTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_score_trace_csv: cannot open " + path);
    const bool with_time = trace.step_epochs.size() == trace.steps.size();
    out << (with_time ? "timestamp,step,score,detection\n" : "step,score,detection\n");
    for (size_t i = 0; i < trace.steps.size(); ++i) {
        if (with_time) out << format_iso8601(trace.step_epochs[i]) << ",";
        out << trace.steps[i] << "," << trace.scores[i] << ","
            << static_cast<int>(trace.detections[i]) << "\n";
    }
}

void write_threshold_json(const ThresholdFit& fit, const std::string& path) {
    nlohmann::json j;
    j["eta996"] = fit.eta996;
    j["beta_b"] = fit.beta_b;
    j["beta_h"] = fit.beta_h;
    j["theta_b"] = fit.theta_b;
    j["theta_h"] = fit.theta_h;
    j["objective"] = fit.objective;
    j["from_grid_search"] = fit.from_grid_search;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_threshold_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

} // namespace rsmgan
