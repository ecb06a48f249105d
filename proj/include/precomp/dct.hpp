#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace precomp {

/// Orthonormal separable 2-D DCT-II on n x n blocks.
class BlockDct {
 public:
  explicit BlockDct(std::size_t n) : n_(n), basis_(n * n), tmp_(n * n) {
    for (std::size_t u = 0; u < n; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
      for (std::size_t x = 0; x < n; ++x) {
        basis_[u * n + x] =
            alpha * std::cos(std::numbers::pi * (2.0 * static_cast<double>(x) + 1.0) * static_cast<double>(u) /
                             (2.0 * static_cast<double>(n)));
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// coeff = C * block * C^T
  void forward(std::span<const double> block, std::span<double> coeff) {
    // tmp = C * block
    for (std::size_t u = 0; u < n_; ++u) {
      for (std::size_t x = 0; x < n_; ++x) {
        double s = 0.0;
        for (std::size_t y = 0; y < n_; ++y) s += basis_[u * n_ + y] * block[y * n_ + x];
        tmp_[u * n_ + x] = s;
      }
    }
    for (std::size_t u = 0; u < n_; ++u) {
      for (std::size_t v = 0; v < n_; ++v) {
        double s = 0.0;
        for (std::size_t x = 0; x < n_; ++x) s += tmp_[u * n_ + x] * basis_[v * n_ + x];
        coeff[u * n_ + v] = s;
      }
    }
  }

  /// block = C^T * coeff * C
  void inverse(std::span<const double> coeff, std::span<double> block) {
    for (std::size_t y = 0; y < n_; ++y) {
      for (std::size_t v = 0; v < n_; ++v) {
        double s = 0.0;
        for (std::size_t u = 0; u < n_; ++u) s += basis_[u * n_ + y] * coeff[u * n_ + v];
        tmp_[y * n_ + v] = s;
      }
    }
    for (std::size_t y = 0; y < n_; ++y) {
      for (std::size_t x = 0; x < n_; ++x) {
        double s = 0.0;
        for (std::size_t v = 0; v < n_; ++v) s += tmp_[y * n_ + v] * basis_[v * n_ + x];
        block[y * n_ + x] = s;
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<double> basis_;
  std::vector<double> tmp_;
};

/// Zigzag scan order for an n x n block (JPEG-style, starting at DC).
inline std::vector<std::size_t> zigzag_order(std::size_t n) {
  std::vector<std::size_t> order;
  order.reserve(n * n);
  for (std::size_t d = 0; d < 2 * n - 1; ++d) {
    if (d % 2 == 0) {
      // up-right: row decreasing
      for (std::size_t i = 0; i <= d; ++i) {
        const std::size_t row = d - i, col = i;
        if (row < n && col < n) order.push_back(row * n + col);
      }
    } else {
      for (std::size_t i = 0; i <= d; ++i) {
        const std::size_t row = i, col = d - i;
        if (row < n && col < n) order.push_back(row * n + col);
      }
    }
  }
  return order;
}

}  // namespace precomp
