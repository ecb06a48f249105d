#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "precomp/error.hpp"

namespace precomp {

/// Width x height x frames. Samples are laid out frame-major, row-major within a frame.
struct SignalGeometry {
  std::size_t width = 1;
  std::size_t height = 1;
  std::size_t frames = 1;

  SignalGeometry() = default;
  SignalGeometry(std::size_t w, std::size_t h, std::size_t t = 1) : width(w), height(h), frames(t) {
    if (w == 0 || h == 0 || t == 0) {
      throw GeometryError("signal geometry must have nonzero width, height and frame count");
    }
  }

  std::size_t samples_per_frame() const noexcept { return width * height; }
  std::size_t total_samples() const noexcept { return frames * width * height; }
  SignalGeometry frame_geometry() const { return {width, height, 1}; }

  friend bool operator==(const SignalGeometry&, const SignalGeometry&) = default;
};

inline std::string to_string(const SignalGeometry& g) {
  return std::to_string(g.width) + "x" + std::to_string(g.height) + "x" + std::to_string(g.frames);
}

/// Real-valued planar signal (still image when frames == 1).
///
/// Values are unconstrained reals; `range_hint` records the nominal dynamic
/// range (default [0,1]) and is never enforced by this type.
class SignalBuffer {
 public:
  SignalBuffer() = default;

  explicit SignalBuffer(SignalGeometry geometry, double fill = 0.0)
      : geometry_(geometry), samples_(geometry.total_samples(), fill) {}

  SignalBuffer(SignalGeometry geometry, std::vector<double> samples)
      : geometry_(geometry), samples_(std::move(samples)) {
    if (samples_.size() != geometry_.total_samples()) {
      throw GeometryError("sample count " + std::to_string(samples_.size()) +
                          " does not match geometry " + to_string(geometry_));
    }
  }

  const SignalGeometry& geometry() const noexcept { return geometry_; }
  std::size_t size() const noexcept { return samples_.size(); }

  std::span<double> samples() noexcept { return samples_; }
  std::span<const double> samples() const noexcept { return samples_; }

  std::span<double> frame(std::size_t k) {
    return std::span<double>(samples_).subspan(k * geometry_.samples_per_frame(),
                                               geometry_.samples_per_frame());
  }
  std::span<const double> frame(std::size_t k) const {
    return std::span<const double>(samples_).subspan(k * geometry_.samples_per_frame(),
                                                     geometry_.samples_per_frame());
  }

  double& at(std::size_t k, std::size_t row, std::size_t col) {
    return samples_[(k * geometry_.height + row) * geometry_.width + col];
  }
  double at(std::size_t k, std::size_t row, std::size_t col) const {
    return samples_[(k * geometry_.height + row) * geometry_.width + col];
  }

  double& operator[](std::size_t i) { return samples_[i]; }
  double operator[](std::size_t i) const { return samples_[i]; }

  std::pair<double, double> range_hint() const noexcept { return range_hint_; }
  void set_range_hint(double lo, double hi) noexcept { range_hint_ = {lo, hi}; }

  /// Copies frame `k` out as a single-frame signal.
  SignalBuffer extract_frame(std::size_t k) const {
    auto f = frame(k);
    return SignalBuffer(geometry_.frame_geometry(), std::vector<double>(f.begin(), f.end()));
  }

  void place_frame(std::size_t k, const SignalBuffer& single) {
    if (single.geometry() != geometry_.frame_geometry()) {
      throw GeometryError("frame geometry mismatch in place_frame");
    }
    std::ranges::copy(single.samples(), frame(k).begin());
  }

  friend bool operator==(const SignalBuffer& a, const SignalBuffer& b) {
    return a.geometry_ == b.geometry_ && a.samples_ == b.samples_;
  }

 private:
  SignalGeometry geometry_;
  std::vector<double> samples_;
  std::pair<double, double> range_hint_{0.0, 1.0};
};

inline void require_same_geometry(const SignalBuffer& a, const SignalBuffer& b, const char* where) {
  if (a.geometry() != b.geometry()) {
    throw GeometryError(std::string(where) + ": geometry mismatch " + to_string(a.geometry()) +
                        " vs " + to_string(b.geometry()));
  }
}

// Elementwise helpers used by the ADMM loop and the metrics.

inline SignalBuffer operator+(const SignalBuffer& a, const SignalBuffer& b) {
  require_same_geometry(a, b, "add");
  SignalBuffer out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline SignalBuffer operator-(const SignalBuffer& a, const SignalBuffer& b) {
  require_same_geometry(a, b, "subtract");
  SignalBuffer out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline SignalBuffer operator*(double s, const SignalBuffer& a) {
  SignalBuffer out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double l1_distance(const SignalBuffer& a, const SignalBuffer& b) {
  require_same_geometry(a, b, "l1_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double max_abs_difference(const SignalBuffer& a, const SignalBuffer& b) {
  require_same_geometry(a, b, "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Axis-aligned rectangle of one block inside a frame.
struct BlockRect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Non-overlapping square-block tiling of one frame. Edge blocks may be
/// smaller than `block_size` when the frame is not a multiple of it.
class BlockGrid {
 public:
  BlockGrid(std::size_t frame_width, std::size_t frame_height, std::size_t block_size)
      : frame_width_(frame_width), frame_height_(frame_height), block_size_(block_size) {
    if (block_size == 0) throw GeometryError("block size must be positive");
    if (frame_width == 0 || frame_height == 0) throw GeometryError("empty frame");
    cols_ = (frame_width + block_size - 1) / block_size;
    rows_ = (frame_height + block_size - 1) / block_size;
  }

  BlockGrid(const SignalGeometry& g, std::size_t block_size) : BlockGrid(g.width, g.height, block_size) {}

  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t block_cols() const noexcept { return cols_; }
  std::size_t block_rows() const noexcept { return rows_; }
  std::size_t block_count() const noexcept { return cols_ * rows_; }

  /// Blocks are enumerated in raster order.
  BlockRect rect(std::size_t i) const {
    if (i >= block_count()) {
      throw std::out_of_range("block index " + std::to_string(i) + " outside grid of " +
                              std::to_string(block_count()));
    }
    const std::size_t bx = i % cols_;
    const std::size_t by = i / cols_;
    BlockRect r;
    r.x0 = bx * block_size_;
    r.y0 = by * block_size_;
    r.width = std::min(block_size_, frame_width_ - r.x0);
    r.height = std::min(block_size_, frame_height_ - r.y0);
    return r;
  }

  bool fits(const SignalGeometry& g) const noexcept {
    return g.width == frame_width_ && g.height == frame_height_;
  }

 private:
  std::size_t frame_width_;
  std::size_t frame_height_;
  std::size_t block_size_;
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
};

/// Copies block `i` of frame `k` (row-major within the block).
inline std::vector<double> extract_block(const SignalBuffer& signal, const BlockGrid& grid,
                                         std::size_t i, std::size_t k = 0) {
  if (!grid.fits(signal.geometry())) throw GeometryError("block grid does not match signal");
  if (k >= signal.geometry().frames) throw std::out_of_range("frame index out of range");
  const BlockRect r = grid.rect(i);
  std::vector<double> out;
  out.reserve(r.width * r.height);
  for (std::size_t y = 0; y < r.height; ++y) {
    for (std::size_t x = 0; x < r.width; ++x) out.push_back(signal.at(k, r.y0 + y, r.x0 + x));
  }
  return out;
}

/// Writes `block` into block `i` of frame `k`; inverse of extract_block on its support.
inline void place_block(SignalBuffer& signal, const BlockGrid& grid, std::span<const double> block,
                        std::size_t i, std::size_t k = 0) {
  if (!grid.fits(signal.geometry())) throw GeometryError("block grid does not match signal");
  if (k >= signal.geometry().frames) throw std::out_of_range("frame index out of range");
  const BlockRect r = grid.rect(i);
  if (block.size() != r.width * r.height) throw GeometryError("block sample count mismatch");
  std::size_t n = 0;
  for (std::size_t y = 0; y < r.height; ++y) {
    for (std::size_t x = 0; x < r.width; ++x) signal.at(k, r.y0 + y, r.x0 + x) = block[n++];
  }
}

}  // namespace precomp
