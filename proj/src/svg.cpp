#include "curriculab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "curriculab/text_io.hpp"

namespace curriculab {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string diverging_color(double normalized) {
  const double t = std::clamp((normalized - 100.0) / 100.0, -1.0, 1.0);
  // White at 0, #b2182b at -1, #2166ac at +1.
  const double r1 = t < 0 ? 0xb2 : 0x21, g1 = t < 0 ? 0x18 : 0x66, b1 = t < 0 ? 0x2b : 0xac;
  const double a = std::abs(t);
  auto mix = [&](double end) { return static_cast<int>(std::lround(255.0 + (end - 255.0) * a)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(r1), mix(g1), mix(b1));
  return buf;
}

namespace {

void open_svg(std::ostream& out, int width, int height) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
}

std::string num(double v) { return format_fixed(v, 2); }

}  // namespace

void write_heatmap_svg(std::ostream& out, const TransferMatrix& matrix) {
  const int cell = 28;
  const int left = 56;
  const int top = 56;
  const int cols = static_cast<int>(matrix.sources.size());
  const int rows = static_cast<int>(matrix.targets.size());
  const int width = left + cols * cell + 120;
  const int height = top + rows * cell + 40;
  open_svg(out, width, height);
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << xml_escape(matrix.title)
      << ": normalized zero-shot score (%), rows = target, columns = source</text>\n";
  for (int s = 0; s < cols; ++s)
    out << "<text x=\"" << left + s * cell + cell / 2 << "\" y=\"" << top - 6
        << "\" font-size=\"8\" text-anchor=\"middle\">" << matrix.sources[static_cast<std::size_t>(s)].label()
        << "</text>\n";
  for (int t = 0; t < rows; ++t) {
    const int y = top + t * cell;
    out << "<text x=\"" << left - 4 << "\" y=\"" << y + cell / 2 + 3 << "\" font-size=\"8\" text-anchor=\"end\">"
        << matrix.targets[static_cast<std::size_t>(t)].label() << "</text>\n";
    for (int s = 0; s < cols; ++s) {
      const auto& v = matrix.normalized[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)];
      const int x = left + s * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << (v ? diverging_color(*v) : "#cccccc") << "\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 3
          << "\" font-size=\"7\" text-anchor=\"middle\">" << (v ? format_fixed(*v, 0) : "n/a") << "</text>\n";
    }
  }
  // Legend: 0, 100, 200.
  const int lx = left + cols * cell + 20;
  for (int i = 0; i <= 20; ++i) {
    const double v = 200.0 - 10.0 * i;
    out << "<rect x=\"" << lx << "\" y=\"" << top + i * 10 << "\" width=\"16\" height=\"10\" fill=\""
        << diverging_color(v) << "\"/>\n";
  }
  for (int i : {0, 10, 20})
    out << "<text x=\"" << lx + 22 << "\" y=\"" << top + i * 10 + 8 << "\" font-size=\"9\">" << 200 - 10 * i
        << "</text>\n";
  out << "</svg>\n";
}

void write_boxplot_svg(std::ostream& out, std::string_view title, const std::vector<StrategySummary>& summaries) {
  const int left = 60, top = 40, plot_h = 300, slot = 110;
  const int width = left + slot * static_cast<int>(summaries.size()) + 20;
  const int height = top + plot_h + 50;
  double hi = 100.0;
  for (const auto& s : summaries)
    for (const auto& [t, v] : s.per_target) hi = std::max(hi, v);
  double lo = 0.0;
  for (const auto& s : summaries)
    for (const auto& [t, v] : s.per_target) lo = std::min(lo, v);
  hi = std::ceil(hi / 20.0) * 20.0;
  lo = std::floor(lo / 20.0) * 20.0;
  auto y_of = [&](double v) { return top + plot_h - (v - lo) / (hi - lo) * plot_h; };

  open_svg(out, width, height);
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << xml_escape(title)
      << ": normalized zero-shot score (%) by source selection strategy</text>\n";
  for (double v = lo; v <= hi + 1e-9; v += 20.0) {
    out << "<line x1=\"" << left << "\" x2=\"" << width - 20 << "\" y1=\"" << num(y_of(v)) << "\" y2=\""
        << num(y_of(v)) << "\" stroke=\"#eeeeee\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << num(y_of(v) + 3) << "\" font-size=\"9\" text-anchor=\"end\">"
        << format_fixed(v, 0) << "</text>\n";
  }
  out << "<line x1=\"" << left << "\" x2=\"" << width - 20 << "\" y1=\"" << num(y_of(100)) << "\" y2=\""
      << num(y_of(100)) << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    double vmin = s.per_target.front().second, vmax = vmin;
    for (const auto& [t, v] : s.per_target) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    // Whiskers span the full range; every per-target value is drawn too.
    out << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(y_of(vmin)) << "\" y2=\""
        << num(y_of(vmax)) << "\" stroke=\"#333333\"/>\n";
    out << "<rect x=\"" << num(cx - 25) << "\" y=\"" << num(y_of(s.upper_quartile)) << "\" width=\"50\" height=\""
        << num(y_of(s.lower_quartile) - y_of(s.upper_quartile)) << "\" fill=\"#9ecae1\" stroke=\"#333333\"/>\n";
    out << "<line x1=\"" << num(cx - 25) << "\" x2=\"" << num(cx + 25) << "\" y1=\"" << num(y_of(s.median))
        << "\" y2=\"" << num(y_of(s.median)) << "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
    for (const auto& [t, v] : s.per_target)
      out << "<circle cx=\"" << num(cx + 35) << "\" cy=\"" << num(y_of(v)) << "\" r=\"2\" fill=\"#555555\"><title>"
          << t.label() << ": " << num(v) << "</title></circle>\n";
    out << "<text x=\"" << num(cx) << "\" y=\"" << top + plot_h + 20 << "\" font-size=\"11\" text-anchor=\"middle\">"
        << to_string(s.strategy) << "</text>\n";
    out << "<text x=\"" << num(cx) << "\" y=\"" << top + plot_h + 34 << "\" font-size=\"9\" text-anchor=\"middle\">median "
        << num(s.median) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_quantile_svg(std::ostream& out, std::string_view title, const std::vector<QuantilePoint>& points) {
  const int left = 50, top = 40, size = 320;
  open_svg(out, left + size + 30, top + size + 50);
  double lim = 3.0;
  for (const auto& p : points) lim = std::max({lim, std::abs(p.theoretical), std::abs(p.standardized)});
  lim = std::ceil(lim);
  auto x_of = [&](double v) { return left + (v + lim) / (2 * lim) * size; };
  auto y_of = [&](double v) { return top + size - (v + lim) / (2 * lim) * size; };
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << xml_escape(title)
      << ": standardized residuals vs normal quantiles</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<line x1=\"" << num(x_of(-lim)) << "\" y1=\"" << num(y_of(-lim)) << "\" x2=\"" << num(x_of(lim))
      << "\" y2=\"" << num(y_of(lim)) << "\" stroke=\"#d62728\"/>\n";
  for (const auto& p : points)
    out << "<circle cx=\"" << num(x_of(p.theoretical)) << "\" cy=\"" << num(y_of(p.standardized))
        << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
  out << "<text x=\"" << left + size / 2 << "\" y=\"" << top + size + 30
      << "\" font-size=\"11\" text-anchor=\"middle\">theoretical quantile</text>\n";
  out << "</svg>\n";
}

}  // namespace curriculab
