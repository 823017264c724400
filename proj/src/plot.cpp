#include "rsmgan/plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace rsmgan {

void write_score_plot_svg(const ScoreTrace& trace, const std::vector<Window>& truth_windows,
                          const std::string& title, const std::string& path) {
    const double width = 960.0, height = 320.0;
    const double margin_l = 60.0, margin_r = 20.0, margin_t = 30.0, margin_b = 40.0;
    const double plot_w = width - margin_l - margin_r;
    const double plot_h = height - margin_t - margin_b;

    long x_lo = 0, x_hi = 1;
    long y_hi = 1;
    if (!trace.steps.empty()) {
        x_lo = trace.steps.front() * trace.p;
        x_hi = (trace.steps.back() + 1) * trace.p;
        for (long s : trace.scores) y_hi = std::max(y_hi, s);
    }
    for (const auto& w : truth_windows) {
        x_lo = std::min(x_lo, w.start);
        x_hi = std::max(x_hi, w.end);
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1;

    auto sx = [&](double t) { return margin_l + (t - static_cast<double>(x_lo)) /
                                                    static_cast<double>(x_hi - x_lo) * plot_w; };
    auto sy = [&](double v) { return margin_t + plot_h - v / static_cast<double>(y_hi) * plot_h; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_score_plot_svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";

    // Raw data for round-trip checks against the CSV export.
    nlohmann::json meta;
    meta["method"] = to_string(trace.method);
    meta["p"] = trace.p;
    meta["steps"] = trace.steps;
    meta["scores"] = trace.scores;
    out << "<metadata id=\"score-trace\">" << meta.dump() << "</metadata>\n";

    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << margin_l << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";

    for (const auto& w : truth_windows)
        out << "<rect x=\"" << sx(static_cast<double>(w.start)) << "\" y=\"" << margin_t
            << "\" width=\"" << sx(static_cast<double>(w.end)) - sx(static_cast<double>(w.start))
            << "\" height=\"" << plot_h << "\" fill=\"#f4c7c3\" opacity=\"0.7\"/>\n";

    out << "<line x1=\"" << margin_l << "\" y1=\"" << margin_t + plot_h << "\" x2=\""
        << width - margin_r << "\" y2=\"" << margin_t + plot_h
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << margin_l << "\" y1=\"" << margin_t << "\" x2=\"" << margin_l
        << "\" y2=\"" << margin_t + plot_h << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    if (!trace.steps.empty()) {
        out << "<polyline fill=\"none\" stroke=\"#3366cc\" stroke-width=\"1\" points=\"";
        for (size_t i = 0; i < trace.steps.size(); ++i) {
            double t = static_cast<double>(trace.steps[i] * trace.p);
            out << sx(t) << "," << sy(static_cast<double>(trace.scores[i])) << " ";
        }
        out << "\"/>\n";
    }
    out << "<text x=\"10\" y=\"" << margin_t + 10 << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << y_hi << "</text>\n";
    out << "</svg>\n";
}

} // namespace rsmgan
