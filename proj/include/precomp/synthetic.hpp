#pragma once

// Deterministic synthetic content: textured test images, global-pan video
// built from a texture, and a block-matching global motion estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "precomp/degradation.hpp"
#include "precomp/signal.hpp"

namespace precomp {

namespace detail {

// Uniform [0,1) from the raw engine output; std distributions are not
// portable bit-for-bit, this is.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Grayscale image with smooth shading, sharp-edged shapes, stripes and fine
/// grain, values inside [0.05, 0.95].
inline SignalBuffer textured_image(std::size_t width, std::size_t height, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * detail::unit_uniform(rng); };
  SignalBuffer img(SignalGeometry(width, height, 1));
  const double w = static_cast<double>(width), h = static_cast<double>(height);

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) waves.push_back({uni(0.5, 3.0) / w, uni(0.5, 3.0) / h, uni(0, 2 * std::numbers::pi), uni(0.04, 0.1)});
  struct Disc {
    double cx, cy, r, level;
  };
  std::vector<Disc> discs;
  for (int i = 0; i < 6; ++i) discs.push_back({uni(0, w), uni(0, h), uni(0.05, 0.2) * std::min(w, h), uni(-0.25, 0.25)});
  struct Rect {
    double x0, y0, x1, y1, level;
  };
  std::vector<Rect> rects;
  for (int i = 0; i < 4; ++i) {
    const double x0 = uni(0, w), y0 = uni(0, h);
    rects.push_back({x0, y0, x0 + uni(0.1, 0.4) * w, y0 + uni(0.1, 0.4) * h, uni(-0.2, 0.2)});
  }
  const double stripe_period = uni(3.0, 6.0);
  const double stripe_angle = uni(0, std::numbers::pi);

  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      double v = 0.5;
      for (const auto& wv : waves) v += wv.amp * std::sin(2 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
      for (const auto& d : discs) {
        if ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) < d.r * d.r) v += d.level;
      }
      for (const auto& rc : rects) {
        if (x >= rc.x0 && x < rc.x1 && y >= rc.y0 && y < rc.y1) v += rc.level;
      }
      // stripes confined to the left third
      if (x < w / 3.0) {
        const double s = x * std::cos(stripe_angle) + y * std::sin(stripe_angle);
        v += 0.08 * std::sin(2 * std::numbers::pi * s / stripe_period);
      }
      v += 0.03 * (detail::unit_uniform(rng) - 0.5);
      img.at(0, r, c) = std::clamp(v, 0.05, 0.95);
    }
  }
  return img;
}

/// T frames cropped from `texture` so that content moves by exactly `motion`
/// (integer pixels) per frame: frame_k(r, c) = frame_0(r - k*dy, c - k*dx).
inline SignalBuffer make_synthetic_pan(const SignalBuffer& texture, Motion motion, std::size_t frames,
                                       std::size_t crop_width, std::size_t crop_height) {
  if (texture.geometry().frames != 1) throw GeometryError("texture must be a single frame");
  if (frames == 0 || crop_width == 0 || crop_height == 0) throw GeometryError("empty pan request");
  if (motion.dx != std::round(motion.dx) || motion.dy != std::round(motion.dy)) {
    throw Error("make_synthetic_pan: motion must be integral");
  }
  const auto dx = static_cast<long>(motion.dx), dy = static_cast<long>(motion.dy);
  const auto travel_x = static_cast<std::size_t>(std::abs(dx)) * (frames - 1);
  const auto travel_y = static_cast<std::size_t>(std::abs(dy)) * (frames - 1);
  const auto& tg = texture.geometry();
  if (tg.width < crop_width + travel_x || tg.height < crop_height + travel_y) {
    throw GeometryError("texture " + to_string(tg) + " too small for a " + std::to_string(crop_width) + "x" +
                        std::to_string(crop_height) + " crop panning over " + std::to_string(frames) + " frames");
  }
  // The window moves against the content motion.
  const long ox0 = dx > 0 ? static_cast<long>(travel_x) : 0;
  const long oy0 = dy > 0 ? static_cast<long>(travel_y) : 0;
  SignalBuffer video(SignalGeometry(crop_width, crop_height, frames));
  for (std::size_t k = 0; k < frames; ++k) {
    const long ox = ox0 - static_cast<long>(k) * dx, oy = oy0 - static_cast<long>(k) * dy;
    for (std::size_t r = 0; r < crop_height; ++r) {
      for (std::size_t c = 0; c < crop_width; ++c) {
        video.at(k, r, c) = texture.at(0, static_cast<std::size_t>(oy) + r, static_cast<std::size_t>(ox) + c);
      }
    }
  }
  return video;
}

/// Global motion by exhaustive block matching (16x16 blocks, +-search
/// pixels): per-block SAD minimizers, median per component over all blocks
/// of all consecutive frame pairs. Returns (0,0) for single-frame input.
inline Motion estimate_global_motion(const SignalBuffer& video, int search = 7, std::size_t block = 16) {
  const auto& g = video.geometry();
  if (g.frames < 2) return {};
  std::vector<double> xs, ys;
  const long s = search;
  for (std::size_t k = 1; k < g.frames; ++k) {
    for (std::size_t by = static_cast<std::size_t>(s); by + block + static_cast<std::size_t>(s) <= g.height; by += block) {
      for (std::size_t bx = static_cast<std::size_t>(s); bx + block + static_cast<std::size_t>(s) <= g.width; bx += block) {
        double best = std::numeric_limits<double>::infinity();
        long best_dx = 0, best_dy = 0;
        for (long dy = -s; dy <= s; ++dy) {
          for (long dx = -s; dx <= s; ++dx) {
            double sad = 0.0;
            for (std::size_t r = 0; r < block; ++r) {
              for (std::size_t c = 0; c < block; ++c) {
                const auto pr = static_cast<std::size_t>(static_cast<long>(by + r) - dy);
                const auto pc = static_cast<std::size_t>(static_cast<long>(bx + c) - dx);
                sad += std::abs(video.at(k, by + r, bx + c) - video.at(k - 1, pr, pc));
              }
            }
            // ties prefer the smaller displacement
            const bool better = sad < best || (sad == best && std::abs(dx) + std::abs(dy) < std::abs(best_dx) + std::abs(best_dy));
            if (better) {
              best = sad;
              best_dx = dx;
              best_dy = dy;
            }
          }
        }
        xs.push_back(static_cast<double>(best_dx));
        ys.push_back(static_cast<double>(best_dy));
      }
    }
  }
  if (xs.empty()) throw GeometryError("estimate_global_motion: frame too small for the search window");
  auto median = [](std::vector<double> v) {
    std::ranges::sort(v);
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return {median(xs), median(ys)};
}

}  // namespace precomp
