#include "mep/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mep {

namespace {

constexpr double kPanelW = 460.0;
constexpr double kPanelH = 320.0;
constexpr double kMarginL = 60.0, kMarginR = 20.0, kMarginT = 36.0, kMarginB = 70.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void draw_panel(std::ostream& svg, const Panel& panel, double ox) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : panel.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double sd = i < s.stddev.size() ? s.stddev[i] : 0.0;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.mean[i] - sd);
      ymax = std::max(ymax, s.mean[i] + sd);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double left = ox + kMarginL, right = ox + kPanelW - kMarginR;
  const double top = kMarginT, bottom = kPanelH - kMarginB;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  svg << "<text x=\"" << num((left + right) / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << escape(panel.title) << "</text>\n";
  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left)
      << "\" height=\"" << num(bottom - top) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << num(yv) << "</text>\n";
    svg << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(bottom + 14)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << num(xv) << "</text>\n";
  }
  svg << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(bottom + 30)
      << "\" text-anchor=\"middle\" font-size=\"11\">epoch</text>\n";
  svg << "<text x=\"" << num(ox + 14) << "\" y=\"" << num((top + bottom) / 2)
      << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " << num(ox + 14) << ' '
      << num((top + bottom) / 2) << ")\">" << escape(panel.ylabel) << "</text>\n";

  for (std::size_t si = 0; si < panel.series.size(); ++si) {
    const Series& s = panel.series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    if (s.x.empty()) continue;
    std::ostringstream band;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      band << num(sx(s.x[i])) << ',' << num(sy(s.mean[i] + s.stddev[i])) << ' ';
    for (std::size_t i = s.x.size(); i-- > 0;)
      band << num(sx(s.x[i])) << ',' << num(sy(s.mean[i] - s.stddev[i])) << ' ';
    svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    std::ostringstream line;
    for (std::size_t i = 0; i < s.x.size(); ++i) line << num(sx(s.x[i])) << ',' << num(sy(s.mean[i])) << ' ';
    svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"><title>" << escape(s.label) << "</title></polyline>\n";
    const double ly = bottom + 46 + 12.0 * static_cast<double>(si % 2);
    const double lx = left + 200.0 * static_cast<double>(si / 2);
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 18)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 22) << "\" y=\"" << num(ly) << "\" font-size=\"10\">"
        << escape(s.label) << "</text>\n";
  }
}

}  // namespace

void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels) {
  for (const auto& p : panels)
    for (const auto& s : p.series)
      require_shape(s.x.size() == s.mean.size() && s.x.size() == s.stddev.size(),
                    "series '" + s.label + "' has inconsistent lengths");
  std::ofstream svg(path, std::ios::trunc);
  require(static_cast<bool>(svg), "cannot write " + path.string());
  const double width = kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(kPanelH) << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) draw_panel(svg, panels[i], kPanelW * static_cast<double>(i));
  svg << "</svg>\n";
  require(static_cast<bool>(svg), "failed writing " + path.string());
}

}  // namespace mep
