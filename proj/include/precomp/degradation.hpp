#pragma once

// Linear degradation operators H: application, adjoint application and the
// regularized inverse (H^T H + (beta/2) I)^{-1} (H^T x + (beta/2) v) used by
// the z-update.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "precomp/error.hpp"
#include "precomp/fft.hpp"
#include "precomp/signal.hpp"

namespace precomp {

enum class Boundary { replicate, circular };

enum class SolveMethod {
  automatic,  ///< closed form when the operator has one, CG otherwise
  cg,
  fft,
};

struct SolveOptions {
  SolveMethod method = SolveMethod::automatic;
  double tolerance = 1e-10;        ///< relative to ||rhs||
  std::size_t max_iterations = 0;  ///< 0 means 10 * N
};

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

class LinearOperator;

SignalBuffer cg_regularized_solve(const LinearOperator& op, const SignalBuffer& x, const SignalBuffer& v_tilde,
                                  double beta, const SolveOptions& opts = {}, SolveStats* stats = nullptr);

/// Abstract linear operator on SignalBuffers.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  /// Throws GeometryError if the operator cannot act on signals of geometry `g`.
  virtual void check_geometry(const SignalGeometry& g) const = 0;
  virtual SignalBuffer apply(const SignalBuffer& v) const = 0;
  virtual SignalBuffer apply_adjoint(const SignalBuffer& v) const = 0;
  virtual std::string describe() const = 0;

  /// Minimizer of ||x - H z||^2 + (beta/2) ||z - v_tilde||^2.
  virtual SignalBuffer regularized_solve(const SignalBuffer& x, const SignalBuffer& v_tilde, double beta,
                                         const SolveOptions& opts = {}) const {
    if (opts.method == SolveMethod::fft) throw Error(describe() + " has no frequency-domain solver");
    return cg_regularized_solve(*this, x, v_tilde, beta, opts);
  }
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

namespace detail {

inline void check_solve_inputs(const LinearOperator& op, const SignalBuffer& x, const SignalBuffer& v_tilde,
                               double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("regularized_solve: beta must be positive and finite");
  require_same_geometry(x, v_tilde, "regularized_solve");
  op.check_geometry(x.geometry());
}

}  // namespace detail

/// Conjugate gradient on the normal equations (H^T H + (beta/2) I) z = H^T x + (beta/2) v_tilde.
/// Works for any operator; starts from v_tilde.
inline SignalBuffer cg_regularized_solve(const LinearOperator& op, const SignalBuffer& x, const SignalBuffer& v_tilde,
                                         double beta, const SolveOptions& opts, SolveStats* stats) {
  detail::check_solve_inputs(op, x, v_tilde, beta);
  const double half_beta = 0.5 * beta;
  const std::size_t n = x.size();
  const std::size_t cap = opts.max_iterations ? opts.max_iterations : 10 * n;

  auto normal_apply = [&](const SignalBuffer& p) {
    SignalBuffer q = op.apply_adjoint(op.apply(p));
    for (std::size_t i = 0; i < n; ++i) q[i] += half_beta * p[i];
    return q;
  };

  SignalBuffer rhs = op.apply_adjoint(x);
  for (std::size_t i = 0; i < n; ++i) rhs[i] += half_beta * v_tilde[i];
  const double rhs_norm = l2_norm(rhs.samples());
  if (rhs_norm == 0.0) {
    if (stats) *stats = {};
    return SignalBuffer(x.geometry());
  }

  SignalBuffer z = v_tilde;
  SignalBuffer r = rhs - normal_apply(z);
  SignalBuffer p = r;
  double rr = dot(r.samples(), r.samples());
  const double target = opts.tolerance * rhs_norm;

  std::size_t it = 0;
  while (std::sqrt(rr) > target) {
    if (it == cap) {
      throw SolverError("CG did not reach tolerance within " + std::to_string(cap) + " iterations (relative residual " +
                            std::to_string(std::sqrt(rr) / rhs_norm) + ")",
                        std::sqrt(rr) / rhs_norm, it);
    }
    const SignalBuffer q = normal_apply(p);
    const double alpha = rr / dot(p.samples(), q.samples());
    for (std::size_t i = 0; i < n; ++i) {
      z[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    const double rr_next = dot(r.samples(), r.samples());
    const double ratio = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + ratio * p[i];
    ++it;
  }
  if (stats) *stats = {it, std::sqrt(rr) / rhs_norm};
  return z;
}

/// Operator that acts on each frame independently with the same frame-level map.
class FrameOperator : public LinearOperator {
 public:
  virtual void apply_frame(std::span<const double> in, std::span<double> out, std::size_t width,
                           std::size_t height) const = 0;
  virtual void apply_adjoint_frame(std::span<const double> in, std::span<double> out, std::size_t width,
                                   std::size_t height) const = 0;

  SignalBuffer apply(const SignalBuffer& v) const override {
    check_geometry(v.geometry());
    SignalBuffer out(v.geometry());
    const auto& g = v.geometry();
    for (std::size_t k = 0; k < g.frames; ++k) apply_frame(v.frame(k), out.frame(k), g.width, g.height);
    return out;
  }

  SignalBuffer apply_adjoint(const SignalBuffer& v) const override {
    check_geometry(v.geometry());
    SignalBuffer out(v.geometry());
    const auto& g = v.geometry();
    for (std::size_t k = 0; k < g.frames; ++k) apply_adjoint_frame(v.frame(k), out.frame(k), g.width, g.height);
    return out;
  }
};

/// s * I. s = 1 is the identity; s = 0 the zero operator.
class ScaledIdentityOp final : public FrameOperator {
 public:
  explicit ScaledIdentityOp(double scale = 1.0) : scale_(scale) {}

  double scale() const noexcept { return scale_; }

  void check_geometry(const SignalGeometry&) const override {}

  void apply_frame(std::span<const double> in, std::span<double> out, std::size_t, std::size_t) const override {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale_ * in[i];
  }
  void apply_adjoint_frame(std::span<const double> in, std::span<double> out, std::size_t w,
                           std::size_t h) const override {
    apply_frame(in, out, w, h);
  }

  std::string describe() const override { return scale_ == 1.0 ? "identity" : "scaled-identity"; }

 private:
  double scale_;
};

/// Odd-sized 2-D kernel, row-major.
struct Kernel2d {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<double> taps{1.0};

  double at(std::size_t r, std::size_t c) const { return taps[r * cols + c]; }
  double sum() const {
    double s = 0.0;
    for (double t : taps) s += t;
    return s;
  }
};

/// Sampled isotropic Gaussian on a side x side integer grid, normalized to sum 1.
inline Kernel2d gaussian_kernel(double sigma, std::size_t side) {
  if (side % 2 == 0) throw Error("gaussian_kernel: side must be odd");
  if (!(sigma > 0.0)) throw Error("gaussian_kernel: sigma must be positive");
  Kernel2d k;
  k.rows = k.cols = side;
  k.taps.assign(side * side, 0.0);
  const auto half = static_cast<long>(side / 2);
  double total = 0.0;
  for (long i = -half; i <= half; ++i) {
    for (long j = -half; j <= half; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
      k.taps[static_cast<std::size_t>((i + half) * static_cast<long>(side) + (j + half))] = v;
      total += v;
    }
  }
  for (double& t : k.taps) t /= total;
  return k;
}

/// Shift-invariant 2-D convolution, y(r,c) = sum_{i,j} k(i,j) x(r + ci - i, c + cj - j),
/// where (ci,cj) is the kernel center.
class ShiftInvariantBlur final : public FrameOperator {
 public:
  explicit ShiftInvariantBlur(Kernel2d kernel, Boundary boundary = Boundary::replicate)
      : kernel_(std::move(kernel)), boundary_(boundary) {
    if (kernel_.rows % 2 == 0 || kernel_.cols % 2 == 0) throw Error("blur kernel sides must be odd");
    if (kernel_.taps.size() != kernel_.rows * kernel_.cols) throw Error("blur kernel size mismatch");
    for (double t : kernel_.taps) {
      if (!std::isfinite(t)) throw Error("blur kernel has non-finite entries");
    }
  }

  const Kernel2d& kernel() const noexcept { return kernel_; }
  Boundary boundary() const noexcept { return boundary_; }

  void check_geometry(const SignalGeometry&) const override {}

  void apply_frame(std::span<const double> in, std::span<double> out, std::size_t w,
                   std::size_t h) const override {
    std::ranges::fill(out, 0.0);
    for_each_tap(w, h, [&](double k, std::size_t dst, std::size_t src) { out[dst] += k * in[src]; });
  }

  void apply_adjoint_frame(std::span<const double> in, std::span<double> out, std::size_t w,
                           std::size_t h) const override {
    std::ranges::fill(out, 0.0);
    for_each_tap(w, h, [&](double k, std::size_t dst, std::size_t src) { out[src] += k * in[dst]; });
  }

  /// DFT of the circularly wrapped kernel for a rows x cols frame (half spectrum).
  std::vector<std::complex<double>> transfer_function(RealFft2d& fft) const {
    const std::size_t h = fft.rows(), w = fft.cols();
    std::vector<double> psf(h * w, 0.0);
    const long ci = static_cast<long>(kernel_.rows / 2), cj = static_cast<long>(kernel_.cols / 2);
    for (std::size_t i = 0; i < kernel_.rows; ++i) {
      for (std::size_t j = 0; j < kernel_.cols; ++j) {
        const auto r = wrap(static_cast<long>(i) - ci, h);
        const auto c = wrap(static_cast<long>(j) - cj, w);
        psf[r * w + c] += kernel_.at(i, j);
      }
    }
    return fft.forward(psf);
  }

  SignalBuffer regularized_solve(const SignalBuffer& x, const SignalBuffer& v_tilde, double beta,
                                 const SolveOptions& opts = {}) const override;

  std::string describe() const override {
    return "blur " + std::to_string(kernel_.rows) + "x" + std::to_string(kernel_.cols) +
           (boundary_ == Boundary::circular ? " circular" : " replicate");
  }

 private:
  static std::size_t wrap(long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
  }

  std::size_t map_index(long v, std::size_t n) const {
    if (boundary_ == Boundary::circular) return wrap(v, n);
    if (v < 0) return 0;
    if (v >= static_cast<long>(n)) return n - 1;
    return static_cast<std::size_t>(v);
  }

  // Calls fn(k, dst, src) for every nonzero tap: dst receives k * src under apply.
  template <typename Fn>
  void for_each_tap(std::size_t w, std::size_t h, Fn&& fn) const {
    const long ci = static_cast<long>(kernel_.rows / 2), cj = static_cast<long>(kernel_.cols / 2);
    std::vector<std::size_t> col_map(w);
    for (std::size_t i = 0; i < kernel_.rows; ++i) {
      for (std::size_t j = 0; j < kernel_.cols; ++j) {
        const double k = kernel_.at(i, j);
        if (k == 0.0) continue;
        const long dy = ci - static_cast<long>(i), dx = cj - static_cast<long>(j);
        for (std::size_t c = 0; c < w; ++c) col_map[c] = map_index(static_cast<long>(c) + dx, w);
        for (std::size_t r = 0; r < h; ++r) {
          const std::size_t src_row = map_index(static_cast<long>(r) + dy, h) * w;
          const std::size_t dst_row = r * w;
          for (std::size_t c = 0; c < w; ++c) fn(k, dst_row + c, src_row + col_map[c]);
        }
      }
    }
  }

  Kernel2d kernel_;
  Boundary boundary_;
};

/// Closed-form frequency-domain solve. Exact for circular boundary; for a
/// replicate-boundary blur it solves the circular counterpart.
inline SignalBuffer fft_regularized_solve(const ShiftInvariantBlur& blur, const SignalBuffer& x,
                                          const SignalBuffer& v_tilde, double beta) {
  detail::check_solve_inputs(blur, x, v_tilde, beta);
  const auto& g = x.geometry();
  RealFft2d fft(g.height, g.width);
  const auto transfer = blur.transfer_function(fft);
  const double half_beta = 0.5 * beta;
  SignalBuffer out(g);
  for (std::size_t k = 0; k < g.frames; ++k) {
    auto xs = fft.forward(x.frame(k));
    const auto vs = fft.forward(v_tilde.frame(k));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto hk = transfer[i];
      xs[i] = (std::conj(hk) * xs[i] + half_beta * vs[i]) / (std::norm(hk) + half_beta);
    }
    const auto z = fft.inverse(xs);
    std::ranges::copy(z, out.frame(k).begin());
  }
  return out;
}

inline SignalBuffer ShiftInvariantBlur::regularized_solve(const SignalBuffer& x, const SignalBuffer& v_tilde,
                                                          double beta, const SolveOptions& opts) const {
  const bool use_fft = opts.method == SolveMethod::fft ||
                       (opts.method == SolveMethod::automatic && boundary_ == Boundary::circular);
  if (use_fft) return fft_regularized_solve(*this, x, v_tilde, beta);
  return cg_regularized_solve(*this, x, v_tilde, beta, opts);
}

/// Per-frame displacement in pixels/frame (x to the right, y downwards).
struct Motion {
  double dx = 0.0;
  double dy = 0.0;
};

/// Hold-type LCD motion blur of one frame as a sparse row-stochastic matrix.
///
/// Each pixel averages uniformly along the straight segment p + s*m/L,
/// s in [0, L), L = max(|dx|,|dy|). Integer L gives L taps of 1/L; a
/// fractional L gives a last tap weighted by its fractional part. Taps that
/// fall outside the frame are dropped and the row is renormalized.
class MotionBlurFrameOp final : public FrameOperator {
 public:
  struct Tap {
    std::size_t index;
    double weight;
  };

  /// Global motion.
  MotionBlurFrameOp(std::size_t width, std::size_t height, Motion motion)
      : MotionBlurFrameOp(width, height, std::vector<Motion>(width * height, motion)) {}

  /// Per-pixel motion field (row-major, one vector per pixel).
  MotionBlurFrameOp(std::size_t width, std::size_t height, const std::vector<Motion>& field)
      : width_(width), height_(height) {
    if (width == 0 || height == 0) throw GeometryError("motion blur: empty frame");
    if (field.size() != width * height) throw GeometryError("motion blur: field size mismatch");
    row_start_.reserve(width * height + 1);
    row_start_.push_back(0);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        build_row(x, y, field[y * width + x]);
        row_start_.push_back(taps_.size());
      }
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  std::span<const Tap> row(std::size_t pixel) const {
    return std::span<const Tap>(taps_).subspan(row_start_[pixel], row_start_[pixel + 1] - row_start_[pixel]);
  }

  void check_geometry(const SignalGeometry& g) const override {
    if (g.width != width_ || g.height != height_) {
      throw GeometryError("motion blur built for " + std::to_string(width_) + "x" + std::to_string(height_) +
                          " frames, got " + to_string(g));
    }
  }

  void apply_frame(std::span<const double> in, std::span<double> out, std::size_t, std::size_t) const override {
    for (std::size_t p = 0; p < width_ * height_; ++p) {
      double s = 0.0;
      for (const Tap& t : row(p)) s += t.weight * in[t.index];
      out[p] = s;
    }
  }

  void apply_adjoint_frame(std::span<const double> in, std::span<double> out, std::size_t,
                           std::size_t) const override {
    std::ranges::fill(out, 0.0);
    for (std::size_t p = 0; p < width_ * height_; ++p) {
      for (const Tap& t : row(p)) out[t.index] += t.weight * in[p];
    }
  }

  std::string describe() const override { return "motion blur"; }

 private:
  void build_row(std::size_t x, std::size_t y, Motion m) {
    if (!std::isfinite(m.dx) || !std::isfinite(m.dy)) throw Error("motion blur: non-finite motion");
    const double length = std::max(std::abs(m.dx), std::abs(m.dy));
    const std::size_t begin = taps_.size();
    if (length <= 1.0) {
      taps_.push_back({y * width_ + x, 1.0});
      return;
    }
    const auto count = static_cast<std::size_t>(std::ceil(length));
    double total = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      const double w = std::min(1.0, length - static_cast<double>(s));
      const double step = static_cast<double>(s) / length;
      const long px = static_cast<long>(x) + std::lround(step * m.dx);
      const long py = static_cast<long>(y) + std::lround(step * m.dy);
      if (px < 0 || py < 0 || px >= static_cast<long>(width_) || py >= static_cast<long>(height_)) continue;
      taps_.push_back({static_cast<std::size_t>(py) * width_ + static_cast<std::size_t>(px), w});
      total += w;
    }
    for (std::size_t i = begin; i < taps_.size(); ++i) taps_[i].weight /= total;
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<Tap> taps_;
  std::vector<std::size_t> row_start_;
};

inline std::shared_ptr<MotionBlurFrameOp> build_motion_blur(const SignalGeometry& frame, Motion motion) {
  return std::make_shared<MotionBlurFrameOp>(frame.width, frame.height, motion);
}

/// diag(H_1, ..., H_T): frame k of the signal goes through operator k.
class BlockDiagonalOp final : public LinearOperator {
 public:
  explicit BlockDiagonalOp(std::vector<std::shared_ptr<const FrameOperator>> per_frame)
      : ops_(std::move(per_frame)) {
    if (ops_.empty()) throw Error("block-diagonal operator needs at least one frame operator");
    for (const auto& op : ops_) {
      if (!op) throw Error("block-diagonal operator: null frame operator");
    }
  }

  std::size_t frames() const noexcept { return ops_.size(); }
  const FrameOperator& frame_op(std::size_t k) const { return *ops_.at(k); }

  void check_geometry(const SignalGeometry& g) const override {
    if (g.frames != ops_.size()) {
      throw GeometryError("block-diagonal operator has " + std::to_string(ops_.size()) + " frames, signal has " +
                          std::to_string(g.frames));
    }
    for (const auto& op : ops_) op->check_geometry(g.frame_geometry());
  }

  SignalBuffer apply(const SignalBuffer& v) const override {
    check_geometry(v.geometry());
    const auto& g = v.geometry();
    SignalBuffer out(g);
    for (std::size_t k = 0; k < g.frames; ++k) ops_[k]->apply_frame(v.frame(k), out.frame(k), g.width, g.height);
    return out;
  }

  SignalBuffer apply_adjoint(const SignalBuffer& v) const override {
    check_geometry(v.geometry());
    const auto& g = v.geometry();
    SignalBuffer out(g);
    for (std::size_t k = 0; k < g.frames; ++k) {
      ops_[k]->apply_adjoint_frame(v.frame(k), out.frame(k), g.width, g.height);
    }
    return out;
  }

  /// Independent frame-level solves, concatenated.
  SignalBuffer regularized_solve(const SignalBuffer& x, const SignalBuffer& v_tilde, double beta,
                                 const SolveOptions& opts = {}) const override {
    detail::check_solve_inputs(*this, x, v_tilde, beta);
    SignalBuffer out(x.geometry());
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      out.place_frame(k, ops_[k]->regularized_solve(x.extract_frame(k), v_tilde.extract_frame(k), beta, opts));
    }
    return out;
  }

  std::string describe() const override { return "block-diagonal(" + std::to_string(ops_.size()) + ")"; }

 private:
  std::vector<std::shared_ptr<const FrameOperator>> ops_;
};

/// Free-function entry points.
inline SignalBuffer apply(const LinearOperator& op, const SignalBuffer& v) { return op.apply(v); }
inline SignalBuffer apply_adjoint(const LinearOperator& op, const SignalBuffer& v) { return op.apply_adjoint(v); }
inline SignalBuffer regularized_solve(const LinearOperator& op, const SignalBuffer& x, const SignalBuffer& v_tilde,
                                      double beta, const SolveOptions& opts = {}) {
  return op.regularized_solve(x, v_tilde, beta, opts);
}

}  // namespace precomp
