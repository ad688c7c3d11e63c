#include "dvk/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dvk/error.hpp"
#include "dvk/harness/storage.hpp"

namespace dvk::harness {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Smallest "nice" number (1, 2, 5 times a power of ten) not below v.
double nice_ceiling(double v) {
  if (v <= 0) return 1;
  const double base = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * base >= v) return m * base;
  }
  return 10 * base;
}

}  // namespace

std::string render_bar_chart(const std::vector<PlotPoint>& points, const std::string& title,
                             const std::string& axis_label) {
  if (points.empty()) throw UsageError("plot: no points");
  double vmax = 0;
  for (const auto& p : points) {
    if (!std::isfinite(p.value) || p.value < 0) throw UsageError("plot: values must be finite and non-negative");
    vmax = std::max(vmax, p.value);
  }
  const double axis_max = nice_ceiling(vmax);

  const double left = 60, right = 20, top = 40, bottom = 90, plot_h = 300, slot = 48;
  const double plot_w = slot * static_cast<double>(points.size());
  const double width = left + plot_w + right, height = top + plot_h + bottom;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" data-axis-max=\"" << fmt("%.17g", axis_max) << "\">\n"
      << "<style>.bar{fill:#4878a8}.axis{stroke:#000}text{font:11px sans-serif}</style>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
  }
  svg << "<line class=\"axis\" x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\"/>\n"
      << "<line class=\"axis\" x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = axis_max * t / 5.0;
    const double y = top + plot_h - plot_h * t / 5.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt("%g", v)
        << "</text>\n";
  }
  svg << "<text transform=\"translate(14," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(axis_label) << "</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double h = plot_h * points[i].value / axis_max;
    const double x = left + slot * static_cast<double>(i) + slot * 0.15;
    svg << "<rect class=\"bar\" x=\"" << fmt("%.6f", x) << "\" y=\"" << fmt("%.6f", top + plot_h - h)
        << "\" width=\"" << fmt("%.6f", slot * 0.7) << "\" height=\"" << fmt("%.6f", h) << "\" data-value=\""
        << fmt("%.17g", points[i].value) << "\"><title>" << escape(points[i].label) << "</title></rect>\n";
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    svg << "<text transform=\"translate(" << fmt("%.6f", cx) << ',' << top + plot_h + 10
        << ") rotate(45)\">" << escape(points[i].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<PlotPoint>& points, const std::filesystem::path& path, const std::string& title,
               const std::string& axis_label) {
  write_atomic(path, render_bar_chart(points, title, axis_label));
}

std::vector<PlotPoint> parse_plot_points(const std::string& text) {
  std::vector<PlotPoint> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw DataError("plot input line " + std::to_string(number) + ": expected label<TAB>value");
    try {
      std::size_t used = 0;
      const double v = std::stod(line.substr(tab + 1), &used);
      out.push_back({line.substr(0, tab), v});
    } catch (const std::exception&) {
      throw DataError("plot input line " + std::to_string(number) + ": bad value");
    }
  }
  return out;
}

}  // namespace dvk::harness
