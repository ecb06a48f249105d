#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "precomp/error.hpp"
#include "precomp/signal.hpp"

namespace precomp {

/// PSNR in dB over every frame with `margin` pixels cropped from each side.
/// Identical signals give +infinity.
inline double psnr(const SignalBuffer& x, const SignalBuffer& y, double peak = 1.0, std::size_t margin = 0) {
  require_same_geometry(x, y, "psnr");
  const auto& g = x.geometry();
  if (2 * margin >= std::min(g.width, g.height)) {
    throw GeometryError("psnr: margin " + std::to_string(margin) + " too large for " + to_string(g));
  }
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < g.frames; ++k) {
    for (std::size_t r = margin; r < g.height - margin; ++r) {
      for (std::size_t c = margin; c < g.width - margin; ++c) {
        const double d = x.at(k, r, c) - y.at(k, r, c);
        sse += d * d;
      }
    }
    count += (g.height - 2 * margin) * (g.width - 2 * margin);
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (sse / static_cast<double>(count)));
}

/// Per-frame PSNR values (same cropping rule).
inline std::vector<double> frame_psnr(const SignalBuffer& x, const SignalBuffer& y, double peak = 1.0,
                                      std::size_t margin = 0) {
  require_same_geometry(x, y, "frame_psnr");
  std::vector<double> out;
  for (std::size_t k = 0; k < x.geometry().frames; ++k) {
    out.push_back(psnr(x.extract_frame(k), y.extract_frame(k), peak, margin));
  }
  return out;
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

namespace detail {

// Valid-region separable filtering of one frame with a normalized 1-D window.
inline std::vector<double> filter_valid(std::span<const double> in, std::size_t w, std::size_t h,
                                        const std::vector<double>& win) {
  const std::size_t n = win.size();
  const std::size_t ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += win[j] * in[r * w + c + j];
      rows[r * ow + c] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += win[i] * rows[(r + i) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM of each frame (Gaussian window, valid region), averaged over frames.
inline double ssim(const SignalBuffer& x, const SignalBuffer& y, const SsimOptions& opt = {}) {
  require_same_geometry(x, y, "ssim");
  const auto& g = x.geometry();
  if (g.width < opt.window || g.height < opt.window) {
    throw GeometryError("ssim: frame " + to_string(g) + " smaller than the window");
  }
  std::vector<double> win(opt.window);
  const double half = static_cast<double>(opt.window / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < opt.window; ++i) {
    const double d = static_cast<double>(i) - half;
    win[i] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
    total += win[i];
  }
  for (double& v : win) v /= total;

  const double c1 = (opt.k1 * opt.peak) * (opt.k1 * opt.peak);
  const double c2 = (opt.k2 * opt.peak) * (opt.k2 * opt.peak);
  const std::size_t n = g.samples_per_frame();
  std::vector<double> xx(n), yy(n), xy(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.frames; ++k) {
    const auto fx = x.frame(k), fy = y.frame(k);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = fx[i] * fx[i];
      yy[i] = fy[i] * fy[i];
      xy[i] = fx[i] * fy[i];
    }
    const auto mx = detail::filter_valid(fx, g.width, g.height, win);
    const auto my = detail::filter_valid(fy, g.width, g.height, win);
    const auto sxx = detail::filter_valid(xx, g.width, g.height, win);
    const auto syy = detail::filter_valid(yy, g.width, g.height, win);
    const auto sxy = detail::filter_valid(xy, g.width, g.height, win);
    double frame_sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      frame_sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    acc += frame_sum / static_cast<double>(mx.size());
  }
  return acc / static_cast<double>(g.frames);
}

/// One rate-distortion working point.
struct RdPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ssim = std::numeric_limits<double>::quiet_NaN();  ///< NaN when not measured
  int theta = -1;                                          ///< -1 when unknown
};

struct RdCurve {
  std::string label;
  std::vector<RdPoint> points;

  /// Sorts by bpp and rejects duplicate or non-positive rates.
  void normalize() {
    std::ranges::sort(points, {}, &RdPoint::bpp);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].bpp > 0.0)) throw Error("curve '" + label + "': bpp must be positive");
      if (i > 0 && !(points[i].bpp > points[i - 1].bpp)) {
        throw Error("curve '" + label + "': bpp values must be strictly increasing");
      }
    }
  }
};

enum class BdSubset { all, high_rate };

/// QP values forming the high-rate subset.
inline const std::vector<int>& high_rate_thetas() {
  static const std::vector<int> q{1, 7, 13, 19};
  return q;
}

namespace detail {

inline std::vector<RdPoint> select_points(const RdCurve& curve, BdSubset subset) {
  std::vector<RdPoint> pts;
  for (const auto& p : curve.points) {
    if (subset == BdSubset::all || std::ranges::find(high_rate_thetas(), p.theta) != high_rate_thetas().end()) {
      pts.push_back(p);
    }
  }
  if (pts.size() < 4) {
    throw Error("bd_psnr: curve '" + curve.label + "' has " + std::to_string(pts.size()) +
                " usable points, need at least 4");
  }
  std::ranges::sort(pts, {}, &RdPoint::bpp);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i].bpp > 0.0) || !std::isfinite(pts[i].psnr_db)) {
      throw Error("bd_psnr: curve '" + curve.label + "' has a non-positive rate or non-finite PSNR");
    }
    if (i > 0 && !(pts[i].bpp > pts[i - 1].bpp)) {
      throw Error("bd_psnr: curve '" + curve.label + "' has repeated bpp values");
    }
  }
  return pts;
}

// Least-squares cubic in log10(bpp); coefficients low order first.
inline Eigen::Vector4d fit_cubic(const std::vector<RdPoint>& pts) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = std::log10(pts[i].bpp);
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1.0;
    a(row, 1) = r;
    a(row, 2) = r * r;
    a(row, 3) = r * r * r;
    b(row) = pts[i].psnr_db;
  }
  return a.colPivHouseholderQr().solve(b);
}

inline double integrate_cubic(const Eigen::Vector4d& c, double lo, double hi) {
  auto prim = [&](double t) { return t * (c(0) + t * (c(1) / 2.0 + t * (c(2) / 3.0 + t * c(3) / 4.0))); };
  return prim(hi) - prim(lo);
}

}  // namespace detail

/// Bjontegaard delta PSNR: mean vertical gap of curve_a over curve_b on the
/// common log10-rate interval. Positive means curve_a is better.
inline double bd_psnr(const RdCurve& curve_a, const RdCurve& curve_b, BdSubset subset = BdSubset::all) {
  const auto pa = detail::select_points(curve_a, subset);
  const auto pb = detail::select_points(curve_b, subset);
  const double lo = std::max(std::log10(pa.front().bpp), std::log10(pb.front().bpp));
  const double hi = std::min(std::log10(pa.back().bpp), std::log10(pb.back().bpp));
  if (!(hi > lo)) {
    throw Error("bd_psnr: curves '" + curve_a.label + "' and '" + curve_b.label + "' have disjoint rate ranges");
  }
  const auto ca = detail::fit_cubic(pa);
  const auto cb = detail::fit_cubic(pb);
  return (detail::integrate_cubic(ca, lo, hi) - detail::integrate_cubic(cb, lo, hi)) / (hi - lo);
}

// Curve serialization: CSV with header "bpp,psnr,ssim,theta" and JSON.

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "' in curve CSV");
  }
}

}  // namespace detail

inline std::string curve_to_csv(const RdCurve& curve) {
  std::string out = "bpp,psnr,ssim,theta\n";
  for (const auto& p : curve.points) {
    out += detail::fmt_double(p.bpp) + "," + detail::fmt_double(p.psnr_db) + "," + detail::fmt_double(p.ssim) + "," +
           std::to_string(p.theta) + "\n";
  }
  return out;
}

inline RdCurve curve_from_csv(const std::string& text, std::string label = {}) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty curve CSV");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) header.push_back(col);
  }
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::ranges::find(header, name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_bpp = column("bpp"), c_psnr = column("psnr"), c_ssim = column("ssim"), c_theta = column("theta");
  if (!c_bpp || !c_psnr) throw FormatError("curve CSV needs bpp and psnr columns");

  RdCurve curve;
  curve.label = std::move(label);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw FormatError("curve CSV row has wrong column count: " + line);
    RdPoint p;
    p.bpp = detail::parse_double(cells[*c_bpp]);
    p.psnr_db = detail::parse_double(cells[*c_psnr]);
    if (c_ssim) p.ssim = detail::parse_double(cells[*c_ssim]);
    if (c_theta) p.theta = static_cast<int>(detail::parse_double(cells[*c_theta]));
    curve.points.push_back(p);
  }
  return curve;
}

inline nlohmann::json curve_to_json(const RdCurve& curve) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : curve.points) {
    nlohmann::json jp{{"bpp", p.bpp}, {"psnr", p.psnr_db}, {"theta", p.theta}};
    jp["ssim"] = std::isnan(p.ssim) ? nlohmann::json(nullptr) : nlohmann::json(p.ssim);
    if (std::isinf(p.psnr_db)) jp["psnr"] = nullptr;
    pts.push_back(jp);
  }
  return {{"label", curve.label}, {"points", pts}};
}

}  // namespace precomp
