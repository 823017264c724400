#ifndef RSMGAN_PLOT_HPP
#define RSMGAN_PLOT_HPP

#include "rsmgan/detect.hpp"
#include "rsmgan/evalkit.hpp"

#include <string>
#include <vector>

namespace rsmgan {

/// Score-over-time SVG with ground-truth windows shaded. The raw
/// (step, score) pairs are embedded in a metadata block so plotted data can
/// be checked against the exported CSV.
void write_score_plot_svg(const ScoreTrace& trace, const std::vector<Window>& truth_windows,
                          const std::string& title, const std::string& path);

} // namespace rsmgan

#endif
