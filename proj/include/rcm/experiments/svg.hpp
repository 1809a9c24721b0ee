#ifndef RCM_EXPERIMENTS_SVG_HPP
#define RCM_EXPERIMENTS_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rcm/experiments/analysis.hpp"

namespace rcm::svg {

// Static SVG 1.1 charts; output is a pure function of the inputs.

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double W = 480, H = 360, L = 70, R = 20, T = 40, B = 50;

  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }
};

inline Frame frame(std::vector<double> xs, std::vector<double> ys) {
  auto [xa, xb] = std::minmax_element(xs.begin(), xs.end());
  auto [ya, yb] = std::minmax_element(ys.begin(), ys.end());
  Frame f{*xa, *xb, *ya, *yb};
  if (f.x1 - f.x0 < 1e-12) f.x0 -= 0.5, f.x1 += 0.5;
  if (f.y1 - f.y0 < 1e-12) f.y0 -= 0.5, f.y1 += 0.5;
  const double dx = 0.05 * (f.x1 - f.x0), dy = 0.05 * (f.y1 - f.y0);
  f.x0 -= dx, f.x1 += dx, f.y0 -= dy, f.y1 += dy;
  return f;
}

inline std::string open(const Frame& f, const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"480\" height=\"360\">\n"
                  "<rect width=\"480\" height=\"360\" fill=\"white\"/>\n";
  s += "<text x=\"240\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) +
       "</text>\n";
  const double xl = Frame::L, xr = Frame::W - Frame::R, yt = Frame::T, yb = Frame::H - Frame::B;
  s += "<path d=\"M" + num(xl) + " " + num(yt) + " V" + num(yb) + " H" + num(xr) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = f.x0 + (f.x1 - f.x0) * k / 4, y = f.y0 + (f.y1 - f.y0) * k / 4;
    s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(yb + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(x) + "</text>\n";
    s += "<text x=\"" + num(xl - 6) + "\" y=\"" + num(f.py(y) + 3) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(y) + "</text>\n";
  }
  s += "<text x=\"" + num((xl + xr) / 2) + "\" y=\"" + num(Frame::H - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((yt + yb) / 2) + "\" transform=\"rotate(-90 16 " + num((yt + yb) / 2) +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(ylabel) + "</text>\n";
  return s;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& colour, bool dashed = false) {
  std::string pts;
  for (std::size_t k = 0; k < xs.size(); ++k) pts += (k ? " " : "") + num(f.px(xs[k])) + "," + num(f.py(ys[k]));
  return "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + colour + "\"" +
         (dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>\n";
}

inline std::string dots(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::string& colour) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k)
    s += "<circle cx=\"" + num(f.px(xs[k])) + "\" cy=\"" + num(f.py(ys[k])) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
  return s;
}

}  // namespace detail

/// log Var against log N, with the fitted line and the bound when known.
inline std::string variance_plot(const std::vector<ScalingPoint>& points, const ScalingFit* fit, const BoundSpec* bound,
                                 const std::string& title) {
  std::vector<double> xs, ys;
  for (const auto& p : points)
    if (p.variance > 0) {
      xs.push_back(std::log(static_cast<double>(p.n)));
      ys.push_back(std::log(p.variance));
    }
  std::vector<double> bx, by;
  if (bound && bound->has_constant())
    for (const auto& p : points) {
      bx.push_back(std::log(static_cast<double>(p.n)));
      by.push_back(std::log(bound->variance_bound(p.n)));
    }
  std::vector<double> allx = xs, ally = ys;
  allx.insert(allx.end(), bx.begin(), bx.end());
  ally.insert(ally.end(), by.begin(), by.end());
  if (allx.empty()) allx = {0.0}, ally = {0.0};
  const auto f = detail::frame(allx, ally);
  std::string s = detail::open(f, title, "log N", "log Var");
  if (!bx.empty()) s += detail::polyline(f, bx, by, "#b03030", true);
  if (fit && std::isfinite(fit->slope) && xs.size() >= 2) {
    const double a = xs.front(), b = xs.back();
    s += detail::polyline(f, {a, b}, {fit->intercept + fit->slope * a, fit->intercept + fit->slope * b}, "#3060b0");
  }
  s += detail::dots(f, xs, ys, "black");
  return s + "</svg>\n";
}

/// Empirical exceedance against the tail bound, for one N.
inline std::string tail_plot(const std::vector<TailRow>& rows, const std::string& title) {
  std::vector<double> t, e, b;
  for (const auto& r : rows) {
    t.push_back(r.t);
    e.push_back(r.empirical);
    if (std::isfinite(r.bound)) b.push_back(std::min(r.bound, 1.0));
  }
  std::vector<double> ys = e;
  ys.insert(ys.end(), b.begin(), b.end());
  ys.push_back(0.0);
  if (t.empty()) t = {0.0};
  const auto f = detail::frame(t, ys);
  std::string s = detail::open(f, title, "t", "P(|f - mean| >= t N^-rho)");
  if (b.size() == t.size()) s += detail::polyline(f, t, b, "#b03030", true);
  if (e.size() == t.size()) {
    s += detail::polyline(f, t, e, "#3060b0");
    s += detail::dots(f, t, e, "black");
  }
  return s + "</svg>\n";
}

}  // namespace rcm::svg

#endif  // RCM_EXPERIMENTS_SVG_HPP
