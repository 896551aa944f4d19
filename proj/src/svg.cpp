#include "fdamon/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

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

}  // namespace

void write_chart_svg(std::ostream& out, const ChartRecord& record, const SvgChartOptions& o) {
  if (record.t2.empty()) throw data_error("chart", "EmptyChart", "nothing to plot");
  const double left = 70, right = 20, top = 40, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;

  const auto [dmin_it, dmax_it] = std::minmax_element(record.day_index.begin(), record.day_index.end());
  double x0 = *dmin_it, x1 = *dmax_it;
  if (x1 == x0) x1 = x0 + 1;

  double ymin = o.threshold > 0 ? o.threshold : INFINITY, ymax = o.threshold;
  for (double v : record.t2) {
    if (!o.log_y || v > 0) ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (!std::isfinite(ymin)) ymin = 1e-3;
  auto ty = [&](double v) { return o.log_y ? std::log10(std::max(v, ymin)) : v; };
  double y0 = o.log_y ? std::floor(ty(ymin)) : std::min(0.0, ymin);
  double y1 = o.log_y ? std::ceil(ty(ymax)) : ymax * 1.05;
  if (y1 <= y0) y1 = y0 + 1;

  auto px = [&](double d) { return left + (d - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };
  auto py_raw = [&](double t) { return top + (1.0 - (t - y0) / (y1 - y0)) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty())
    out << "<text x=\"" << num(left) << "\" y=\"22\" font-size=\"14\">" << escape(o.title) << "</text>\n";

  // axes
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
      << num(top + ph) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(top + ph) << "\" stroke=\"black\"/>\n";
  if (o.log_y) {
    for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
      const double y = py_raw(e);
      out << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left) << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << e
          << "</text>\n";
    }
  } else {
    for (int k = 0; k <= 5; ++k) {
      const double t = y0 + (y1 - y0) * k / 5.0;
      out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py_raw(t) + 4) << "\" text-anchor=\"end\">" << num(t)
          << "</text>\n";
    }
  }
  for (int k = 0; k <= 6; ++k) {
    const double d = x0 + (x1 - x0) * k / 6.0;
    out << "<text x=\"" << num(px(d)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
        << static_cast<long>(std::lround(d)) << "</text>\n";
  }
  out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(o.height - 10.0)
      << "\" text-anchor=\"middle\">day</text>\n";
  out << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" transform=\"rotate(-90 16 " << num(top + ph / 2)
      << ")\" text-anchor=\"middle\">T\xC2\xB2</text>\n";

  out << "<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < record.t2.size(); ++i)
    out << (i ? " " : "") << num(px(record.day_index[i])) << ',' << num(py(record.t2[i]));
  out << "\"/>\n";
  for (std::size_t i = 0; i < record.t2.size(); ++i)
    if (record.alarm[i])
      out << "<circle cx=\"" << num(px(record.day_index[i])) << "\" cy=\"" << num(py(record.t2[i]))
          << "\" r=\"2\" fill=\"#c0392b\"/>\n";

  if (o.threshold > 0) {
    const double y = py(o.threshold);
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + pw) << "\" y2=\"" << num(y)
        << "\" stroke=\"#c0392b\" stroke-width=\"1.2\"/>\n";
  }
  if (o.divider) {
    const double x = px(*o.divider);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(top) << "\" x2=\"" << num(x) << "\" y2=\"" << num(top + ph)
        << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace fdamon
