#include "masslab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace masslab {

namespace {

std::string fmt(double v, const char* f = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
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

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (map(v) - lo) / (hi - lo); }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

Axis make_axis(const std::vector<PlotSeries>& series, bool use_x, bool log) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    const auto& v = use_x ? s.x : s.y;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], use_x ? log : false) || !usable(s.y[i], use_x ? false : log)) continue;
      const double m = log ? std::log10(v[i]) : v[i];
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, log};
}

std::string tick_label(double mapped, bool log) {
  if (log) return "1e" + fmt(mapped, "%.1f");
  return fmt(mapped, "%.4g");
}

}  // namespace

std::string line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  const double left = 80, right = 170, top = 40, bottom = 55;
  const double W = spec.width, H = spec.height;
  const double pw = W - left - right, ph = H - top - bottom;
  const Axis ax = make_axis(series, true, spec.log_x);
  const Axis ay = make_axis(series, false, spec.log_y);
  const auto X = [&](double v) { return left + ax.frac(v) * pw; };
  const auto Y = [&](double v) { return top + (1.0 - ay.frac(v)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
     << "</text>\n";
  os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double px = left + pw * i / 4.0;
    const double py = top + ph * (1.0 - i / 4.0);
    os << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px) << "\" y2=\""
       << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
       << tick_label(fx, ax.log) << "</text>\n";
    os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(py)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
       << tick_label(fy, ay.log) << "</text>\n";
  }
  os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(H - 12) << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt(top + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], spec.log_x) || !usable(s.y[i], spec.log_y)) {
        pen = false;
        continue;
      }
      path += (pen ? " L " : (path.empty() ? "M " : " M ")) + fmt(X(s.x[i])) + " " + fmt(Y(s.y[i]));
      pen = true;
    }
    if (!path.empty())
      os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"" << dash
         << "/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
        if (usable(s.x[i], spec.log_x) && usable(s.y[i], spec.log_y))
          os << "<circle cx=\"" << fmt(X(s.x[i])) << "\" cy=\"" << fmt(Y(s.y[i])) << "\" r=\"3\" fill=\"" << s.color
             << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(left + pw + 36)
       << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"" << dash << "/>\n";
    os << "<text x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace masslab
