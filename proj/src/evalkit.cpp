#include "rsmgan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsmgan {

namespace {

long clip_overlap(const Window& w, const Window& r) {
    long lo = std::max(w.start, r.start);
    long hi = std::min(w.end, r.end);
    return std::max<long>(0, hi - lo);
}

bool in_any(const std::vector<Window>& windows, long t) {
    for (const auto& w : windows)
        if (w.contains(t)) return true;
    return false;
}

} // namespace

PointMetrics point_metrics(const std::vector<long>& detected_points,
                           const std::vector<Window>& label_windows,
                           const std::vector<Window>& eval_range) {
    if (eval_range.empty()) throw std::invalid_argument("point_metrics: empty evaluation range");

    PointMetrics m;
    long range_points = 0;
    long window_points = 0;
    for (const auto& r : eval_range) {
        if (r.width() <= 0) throw std::invalid_argument("point_metrics: empty range window");
        range_points += r.width();
        for (const auto& w : label_windows) window_points += clip_overlap(w, r);
    }

    for (long t : detected_points) {
        if (!in_any(eval_range, t)) continue;
        if (in_any(label_windows, t))
            ++m.tp;
        else
            ++m.fp;
    }
    m.fn = window_points - m.tp;
    m.tn = range_points - window_points - m.fp;

    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                          : 0.0;
    m.fpr = (m.fp + m.tn) > 0 ? static_cast<double>(m.fp) / static_cast<double>(m.fp + m.tn) : 0.0;
    return m;
}

double nab_scaled_sigmoid(double relative_position) {
    return 2.0 / (1.0 + std::exp(5.0 * relative_position)) - 1.0;
}

double nab_score(const std::vector<long>& detected_points, const std::vector<Window>& label_windows,
                 const NabProfile& profile) {
    std::vector<Window> windows = label_windows;
    std::sort(windows.begin(), windows.end(),
              [](const Window& a, const Window& b) { return a.start < b.start; });
    for (size_t i = 0; i + 1 < windows.size(); ++i)
        if (windows[i].end > windows[i + 1].start)
            throw std::invalid_argument("nab_score: overlapping label windows");
    for (const auto& w : windows)
        if (w.width() <= 0) throw std::invalid_argument("nab_score: empty window");

    std::vector<long> dets = detected_points;
    std::sort(dets.begin(), dets.end());
    dets.erase(std::unique(dets.begin(), dets.end()), dets.end());

    // Position of point t relative to window w, in window widths; 0 at the
    // window's last point, negative inside it, positive after it.
    auto rel_pos = [](long t, const Window& w) {
        return static_cast<double>(t - (w.end - 1)) / static_cast<double>(w.width());
    };

    double raw = 0.0;
    std::vector<char> window_hit(windows.size(), 0);
    for (long t : dets) {
        // Inside a window: only the earliest detection scores.
        bool inside = false;
        for (size_t i = 0; i < windows.size(); ++i) {
            if (windows[i].contains(t)) {
                inside = true;
                if (!window_hit[i]) {
                    window_hit[i] = 1;
                    raw += profile.tp_weight * nab_scaled_sigmoid(rel_pos(t, windows[i]));
                }
                break;
            }
        }
        if (inside) continue;

        // False positive: charged through the preceding window's tail, or
        // fully when no window precedes it.
        const Window* prev = nullptr;
        for (const auto& w : windows)
            if (w.end <= t && (!prev || w.end > prev->end)) prev = &w;
        if (prev)
            raw += profile.fp_weight * nab_scaled_sigmoid(rel_pos(t, *prev));
        else
            raw -= profile.fp_weight;
    }
    for (size_t i = 0; i < windows.size(); ++i)
        if (!window_hit[i]) raw -= profile.fn_weight;

    if (windows.empty()) return 0.0;
    double perfect = 0.0;
    for (const auto& w : windows)
        perfect += profile.tp_weight * nab_scaled_sigmoid(rel_pos(w.start, w));
    if (!(perfect > 0.0))
        throw std::invalid_argument("nab_score: windows too short to carry credit");
    return raw / perfect;
}

std::optional<double> root_cause_recall(const std::vector<RootCausePrediction>& predictions,
                                        const std::vector<RootCauseTruth>& truth) {
    double total = 0.0;
    long matched = 0;
    for (const auto& t : truth) {
        if (t.series.empty()) continue;
        const RootCausePrediction* best = nullptr;
        long best_overlap = 0;
        for (const auto& p : predictions) {
            long ov = clip_overlap(p.window, t.window);
            if (ov > best_overlap) {
                best_overlap = ov;
                best = &p;
            }
        }
        if (!best) continue;
        long hit = 0;
        for (long s : best->series)
            if (std::find(t.series.begin(), t.series.end(), s) != t.series.end()) ++hit;
        total += static_cast<double>(hit) / static_cast<double>(t.series.size());
        ++matched;
    }
    if (matched == 0) return std::nullopt;
    return total / static_cast<double>(matched);
}

} // namespace rsmgan
