#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace precomp {

/// 2-D real DFT of a rows x cols row-major array (thin FFTW wrapper).
///
/// Plans use FFTW_ESTIMATE so the chosen algorithm, and therefore every
/// output bit, is reproducible from run to run.
class RealFft2d {
 public:
  RealFft2d(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), half_cols_(cols / 2 + 1) {
    real_ = fftw_alloc_real(rows_ * cols_);
    spec_ = fftw_alloc_complex(rows_ * half_cols_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(static_cast<int>(rows_), static_cast<int>(cols_), real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(static_cast<int>(rows_), static_cast<int>(cols_), spec_, real_, FFTW_ESTIMATE);
  }

  RealFft2d(const RealFft2d&) = delete;
  RealFft2d& operator=(const RealFft2d&) = delete;

  ~RealFft2d() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  /// Number of complex bins per row in the half spectrum.
  std::size_t half_cols() const noexcept { return half_cols_; }

  std::vector<std::complex<double>> forward(std::span<const double> in) {
    for (std::size_t i = 0; i < rows_ * cols_; ++i) real_[i] = in[i];
    fftw_execute(forward_);
    std::vector<std::complex<double>> out(rows_ * half_cols_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {spec_[i][0], spec_[i][1]};
    return out;
  }

  /// Normalized inverse: inverse(forward(x)) == x up to rounding.
  std::vector<double> inverse(std::span<const std::complex<double>> in) {
    for (std::size_t i = 0; i < rows_ * half_cols_; ++i) {
      spec_[i][0] = in[i].real();
      spec_[i][1] = in[i].imag();
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / static_cast<double>(rows_ * cols_);
    std::vector<double> out(rows_ * cols_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_[i] * scale;
    return out;
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::size_t half_cols_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace precomp
