#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dvk::harness {

struct PlotPoint {
  std::string label;
  double value = 0;
};

// Bar chart as a standalone SVG document. Each point becomes one
// <rect class="bar">; the value axis starts at 0 and its maximum is at least
// the largest value. Throws UsageError on an empty history.
std::string render_bar_chart(const std::vector<PlotPoint>& points, const std::string& title = "",
                             const std::string& axis_label = "mAP");

void emit_plot(const std::vector<PlotPoint>& points, const std::filesystem::path& path, const std::string& title = "",
               const std::string& axis_label = "mAP");

/// Parses "label<TAB>value" lines; '#' starts a comment.
std::vector<PlotPoint> parse_plot_points(const std::string& text);

}  // namespace dvk::harness
