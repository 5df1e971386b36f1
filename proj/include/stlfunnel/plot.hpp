#pragma once

// Self-contained SVG plots of funnels and states, and a gnuplot script for
// the same CSV.

#include <stlfunnel/common.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace stlfunnel {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  std::string color = "#1f77b4";
};

struct Circle {
  double cx = 0.0, cy = 0.0, r = 0.0;
  std::string color = "#2ca02c";
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
  std::vector<Circle> circles;
  bool equal_aspect = false;
  int width = 640;
  int height = 420;
  std::size_t max_points = 2000;  // per series, after decimation
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return p;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, p);
}

inline std::string escape_xml(const std::string& s) {
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

/// Keeps first/last point and the min and max of every bucket, so short
/// excursions survive decimation.
inline std::vector<std::size_t> decimate(const std::vector<double>& y, std::size_t max_points) {
  std::vector<std::size_t> idx;
  const std::size_t n = y.size();
  if (n <= max_points || max_points < 4) {
    idx.resize(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    return idx;
  }
  const std::size_t buckets = max_points / 2;
  idx.push_back(0);
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = 1 + b * (n - 2) / buckets;
    const std::size_t hi = 1 + (b + 1) * (n - 2) / buckets;
    if (lo >= hi) continue;
    std::size_t imin = lo, imax = lo;
    for (std::size_t k = lo; k < hi; ++k) {
      if (y[k] < y[imin]) imin = k;
      if (y[k] > y[imax]) imax = k;
    }
    idx.push_back(std::min(imin, imax));
    if (imin != imax) idx.push_back(std::max(imin, imax));
  }
  idx.push_back(n - 1);
  return idx;
}

inline double nice_step(double range, int ticks) {
  const double raw = range / std::max(1, ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

/// Writes the plot as SVG. Returns false (and writes an empty frame) when
/// there is nothing to draw.
inline bool write_svg(std::ostream& os, const PlotSpec& spec) {
  const double W = spec.width, H = spec.height;
  const double ml = 70, mr = 20, mt = 36, mb = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : spec.series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xmin = std::min(xmin, s.x[k]);
      xmax = std::max(xmax, s.x[k]);
      ymin = std::min(ymin, s.y[k]);
      ymax = std::max(ymax, s.y[k]);
    }
  for (const auto& c : spec.circles) {
    xmin = std::min(xmin, c.cx - c.r);
    xmax = std::max(xmax, c.cx + c.r);
    ymin = std::min(ymin, c.cy - c.r);
    ymax = std::max(ymax, c.cy + c.r);
  }
  const bool empty = !(xmin <= xmax && ymin <= ymax);

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
     << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">"
     << detail::escape_xml(spec.title) << "</text>\n";
  if (empty) {
    os << "<text x=\"" << W / 2 << "\" y=\"" << H / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#888\">no "
          "data</text>\n</svg>\n";
    return false;
  }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
  const double pad = 0.04 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  double pw = W - ml - mr, ph = H - mt - mb;
  if (spec.equal_aspect) {
    const double sx = pw / (xmax - xmin), sy = ph / (ymax - ymin);
    const double s = std::min(sx, sy);
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    xmin = cx - 0.5 * pw / s;
    xmax = cx + 0.5 * pw / s;
    ymin = cy - 0.5 * ph / s;
    ymax = cy + 0.5 * ph / s;
  }
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  const double xs = detail::nice_step(xmax - xmin, 8), ys = detail::nice_step(ymax - ymin, 6);
  for (double v = std::ceil(xmin / xs) * xs; v <= xmax + 1e-9 * xs; v += xs) {
    os << "<line x1=\"" << X(v) << "\" y1=\"" << mt + ph << "\" x2=\"" << X(v) << "\" y2=\"" << mt
       << "\" stroke=\"#eee\"/>";
    os << "<text x=\"" << X(v) << "\" y=\"" << mt + ph + 15 << "\" text-anchor=\"middle\">"
       << detail::num(std::abs(v) < 1e-12 * xs ? 0.0 : v) << "</text>\n";
  }
  for (double v = std::ceil(ymin / ys) * ys; v <= ymax + 1e-9 * ys; v += ys) {
    os << "<line x1=\"" << ml << "\" y1=\"" << Y(v) << "\" x2=\"" << ml + pw << "\" y2=\"" << Y(v)
       << "\" stroke=\"#eee\"/>";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">"
       << detail::num(std::abs(v) < 1e-12 * ys ? 0.0 : v) << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << detail::escape_xml(spec.xlabel) << "</text>\n";
  os << "<text transform=\"translate(16," << mt + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape_xml(spec.ylabel) << "</text>\n";
  os << "</g>\n";

  os << "<defs><clipPath id=\"plot\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
     << "\" height=\"" << ph << "\"/></clipPath></defs>\n<g clip-path=\"url(#plot)\">\n";
  for (const auto& c : spec.circles)
    os << "<circle cx=\"" << X(c.cx) << "\" cy=\"" << Y(c.cy) << "\" r=\""
       << c.r / (xmax - xmin) * pw << "\" fill=\"" << c.color << "\" fill-opacity=\"0.15\" stroke=\""
       << c.color << "\"/>\n";
  for (const auto& s : spec.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (n == 0) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t k : detail::decimate(s.y, spec.max_points))
      if (k < n && std::isfinite(s.x[k]) && std::isfinite(s.y[k]))
        os << detail::num(X(s.x[k])) << ',' << detail::num(Y(s.y[k])) << ' ';
    os << "\"/>\n";
  }
  os << "</g>\n";

  // legend
  double ly = mt + 14;
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& s : spec.series) {
    if (s.label.empty()) continue;
    os << "<line x1=\"" << ml + pw - 130 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw - 108
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
    os << "<text x=\"" << ml + pw - 102 << "\" y=\"" << ly << "\">" << detail::escape_xml(s.label)
       << "</text>\n";
    ly += 15;
  }
  os << "</g>\n</svg>\n";
  return true;
}

/// rho-trace between the dashed funnel bounds.
inline PlotSpec funnel_plot(const std::string& title, const std::vector<double>& t,
                            const std::vector<double>& rho, const std::vector<double>& lower,
                            const std::vector<double>& upper) {
  PlotSpec p;
  p.title = title;
  p.xlabel = "t [s]";
  p.ylabel = "robustness";
  p.series.push_back({"rho", t, rho, false, "#1f77b4"});
  p.series.push_back({"lower", t, lower, true, "#d62728"});
  p.series.push_back({"upper", t, upper, true, "#d62728"});
  return p;
}

/// gnuplot script drawing the funnel of each listed subsystem from `csv`.
inline std::string gnuplot_script(const std::string& csv, const std::vector<int>& ids,
                                  const std::vector<std::string>& header) {
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? 0 : static_cast<int>(it - header.begin()) + 1;
  };
  std::ostringstream os;
  os << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't [s]'\n"
        "set ylabel 'robustness'\nset terminal svg size 640,420\n";
  for (int id : ids) {
    const std::string s = std::to_string(id);
    os << "set output 'funnel_" << s << "_gnuplot.svg'\n";
    os << "set title 'subsystem " << s << "'\n";
    os << "plot '" << csv << "' using 1:" << col(s + ".rho") << " with lines lw 2 title 'rho', \\\n"
       << "     '' using 1:" << col(s + ".lower") << " with lines dt 2 lc rgb 'red' title 'lower', \\\n"
       << "     '' using 1:" << col(s + ".upper") << " with lines dt 2 lc rgb 'red' title 'upper'\n";
  }
  return os.str();
}

}  // namespace stlfunnel
