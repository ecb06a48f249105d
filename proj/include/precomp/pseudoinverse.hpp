#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "precomp/degradation.hpp"
#include "precomp/fft.hpp"

namespace precomp {

/// Affine map s -> scale * s + offset.
struct AffineMap {
  double scale = 1.0;
  double offset = 0.0;

  double forward(double s) const { return scale * s + offset; }
  double inverse(double s) const { return (s - offset) / scale; }
};

struct PrefilterResult {
  SignalBuffer filtered;  ///< inverse-filtered signal, before the affine map
  AffineMap shift_scale;  ///< brings `filtered` into [0,1]; identity if already inside
};

/// Default Tikhonov floor, relative to the peak spectral magnitude.
inline constexpr double kDefaultPinvEps = 1e-3;

/// Pre-compression inverse filter for a shift-invariant blur (circular boundary).
///
/// With eps == 0 this is the raw pseudoinverse: 1/H on nonzero frequencies and
/// 0 elsewhere. With eps > 0 the filter is conj(H) / (|H|^2 + (eps * max|H|)^2).
inline PrefilterResult pseudoinverse_prefilter(const ShiftInvariantBlur& blur, const SignalBuffer& x,
                                               double eps = kDefaultPinvEps) {
  if (!(eps >= 0.0)) throw Error("pseudoinverse_prefilter: eps must be nonnegative");
  if (std::ranges::all_of(blur.kernel().taps, [](double t) { return t == 0.0; })) {
    throw Error("pseudoinverse_prefilter: all-zero kernel");
  }
  const auto& g = x.geometry();
  RealFft2d fft(g.height, g.width);
  const auto transfer = blur.transfer_function(fft);
  double peak = 0.0;
  for (const auto& h : transfer) peak = std::max(peak, std::abs(h));
  const double floor2 = (eps * peak) * (eps * peak);
  const double zero_cut = 1e-12 * peak;

  SignalBuffer filtered(g);
  for (std::size_t k = 0; k < g.frames; ++k) {
    auto spec = fft.forward(x.frame(k));
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto h = transfer[i];
      if (eps == 0.0) {
        spec[i] = std::abs(h) > zero_cut ? spec[i] / h : 0.0;
      } else {
        spec[i] *= std::conj(h) / (std::norm(h) + floor2);
      }
    }
    const auto out = fft.inverse(spec);
    std::ranges::copy(out, filtered.frame(k).begin());
  }

  const auto [lo_it, hi_it] = std::ranges::minmax_element(filtered.samples());
  const double lo = *lo_it, hi = *hi_it;
  AffineMap map;
  // Rounding noise from the transform round trip does not count as out of range.
  constexpr double slack = 1e-9;
  if (lo < -slack || hi > 1.0 + slack) {
    if (hi > lo) {
      map.scale = 1.0 / (hi - lo);
      map.offset = -lo * map.scale;
    } else {
      map.offset = 0.5 - lo;
    }
  }
  return {std::move(filtered), map};
}

}  // namespace precomp
