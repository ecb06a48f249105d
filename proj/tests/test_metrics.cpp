#include <gtest/gtest.h>

#include "support.hpp"

using namespace precomp;
using namespace testing_support;

TEST(Psnr, UniformErrorIsTwentyDb) {
  const SignalBuffer x(SignalGeometry(16, 16, 2), 0.3), y(SignalGeometry(16, 16, 2), 0.4);
  EXPECT_NEAR(psnr(x, y), 20.0, 1e-12);
  EXPECT_TRUE(std::isinf(psnr(x, x)));
  EXPECT_NEAR(psnr(x, y, 255.0 / 255.0 * 2.0), 20.0 + 20.0 * std::log10(2.0), 1e-12);
}

TEST(Psnr, MarginExcludesBorder) {
  const SignalGeometry g(20, 14, 2);
  const auto x = random_signal(g, 1), y = random_signal(g, 2);
  const std::size_t m = 3;
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t r = m; r < 14 - m; ++r)
      for (std::size_t c = m; c < 20 - m; ++c, ++n) se += std::pow(x.at(k, r, c) - y.at(k, r, c), 2);
  EXPECT_NEAR(psnr(x, y, 1.0, m), 10.0 * std::log10(1.0 / (se / static_cast<double>(n))), 1e-10);
  EXPECT_THROW(psnr(x, y, 1.0, 7), Error);
  SignalBuffer z = x;
  z.at(0, 0, 0) += 0.5;  // border-only change
  EXPECT_TRUE(std::isinf(psnr(x, z, 1.0, 1)));
}

TEST(Psnr, PerFrame) {
  SignalBuffer x(SignalGeometry(8, 8, 2), 0.5), y = x;
  for (double& v : y.frame(1)) v += 0.01;
  const auto f = frame_psnr(x, y);
  EXPECT_TRUE(std::isinf(f[0]));
  EXPECT_NEAR(f[1], 40.0, 1e-9);
}

namespace {

double ssim_brute_force(const SignalBuffer& x, const SignalBuffer& y) {
  const std::size_t win = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  std::vector<double> w(win * win);
  double total = 0;
  for (std::size_t i = 0; i < win; ++i)
    for (std::size_t j = 0; j < win; ++j) {
      const double di = static_cast<double>(i) - 5.0, dj = static_cast<double>(j) - 5.0;
      total += w[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
    }
  for (double& v : w) v /= total;
  const auto& g = x.geometry();
  double frames_sum = 0;
  for (std::size_t k = 0; k < g.frames; ++k) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + win <= g.height; ++r)
      for (std::size_t c = 0; c + win <= g.width; ++c, ++count) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (std::size_t i = 0; i < win; ++i)
          for (std::size_t j = 0; j < win; ++j) {
            const double a = x.at(k, r + i, c + j), b = y.at(k, r + i, c + j), wt = w[i * win + j];
            mx += wt * a;
            my += wt * b;
            xx += wt * a * a;
            yy += wt * b * b;
            xy += wt * a * b;
          }
        const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
        sum += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    frames_sum += sum / static_cast<double>(count);
  }
  return frames_sum / static_cast<double>(g.frames);
}

}  // namespace

TEST(Ssim, MatchesBruteForce) {
  const auto x = textured_image(30, 24, 1);
  auto y = x;
  const auto noise = random_signal(x.geometry(), 3, -0.05, 0.05);
  y = y + noise;
  EXPECT_NEAR(ssim(x, y), ssim_brute_force(x, y), 1e-10);
  const auto v = random_signal(SignalGeometry(13, 12, 2), 4), u = random_signal(SignalGeometry(13, 12, 2), 5);
  EXPECT_NEAR(ssim(v, u), ssim_brute_force(v, u), 1e-10);
}

TEST(Ssim, IdentitySymmetryAndBounds) {
  const auto x = textured_image(32, 32, 2), y = textured_image(32, 32, 3);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
  EXPECT_NEAR(ssim(x, y), ssim(y, x), 1e-14);
  EXPECT_LT(ssim(x, y), 1.0);
  EXPECT_THROW(ssim(SignalBuffer(SignalGeometry(10, 20, 1)), SignalBuffer(SignalGeometry(10, 20, 1))), Error);
}

namespace {

RdCurve make_curve(std::vector<std::pair<double, double>> pts, std::vector<int> thetas = {1, 7, 13, 19}) {
  RdCurve c;
  for (std::size_t i = 0; i < pts.size(); ++i)
    c.points.push_back({pts[i].first, pts[i].second, std::numeric_limits<double>::quiet_NaN(),
                        i < thetas.size() ? thetas[i] : -1});
  return c;
}

// Lagrange interpolation through exactly four points, integrated by a fine trapezoid rule.
double quadrature_bd(const RdCurve& a, const RdCurve& b) {
  auto lagrange = [](const RdCurve& c, double t) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      double l = c.points[i].psnr_db;
      for (std::size_t j = 0; j < 4; ++j)
        if (j != i) l *= (t - std::log10(c.points[j].bpp)) / (std::log10(c.points[i].bpp) - std::log10(c.points[j].bpp));
      s += l;
    }
    return s;
  };
  auto lo_hi = [](const RdCurve& c) {
    double lo = 1e300, hi = -1e300;
    for (const auto& p : c.points) {
      lo = std::min(lo, std::log10(p.bpp));
      hi = std::max(hi, std::log10(p.bpp));
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = lo_hi(a);
  const auto [blo, bhi] = lo_hi(b);
  const double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
  const int n = 200000;
  const double hstep = (hi - lo) / n;
  double integral = 0;
  for (int i = 0; i <= n; ++i) {
    const double t = lo + i * hstep;
    const double f = lagrange(a, t) - lagrange(b, t);
    integral += (i == 0 || i == n) ? 0.5 * f : f;
  }
  return integral * hstep / (hi - lo);
}

}  // namespace

TEST(BdPsnr, IdenticalAndShiftedCurves) {
  const auto a = make_curve({{0.5, 30.0}, {1.0, 34.0}, {2.0, 37.5}, {4.0, 40.0}});
  EXPECT_NEAR(bd_psnr(a, a), 0.0, 1e-12);
  auto b = a;
  for (auto& p : b.points) p.psnr_db += 1.0;
  EXPECT_NEAR(bd_psnr(b, a), 1.0, 1e-9);
  EXPECT_NEAR(bd_psnr(a, b), -1.0, 1e-9);
}

TEST(BdPsnr, MatchesQuadratureOracle) {
  const auto a = make_curve({{0.4, 29.0}, {1.1, 33.5}, {2.3, 38.0}, {5.0, 41.0}});
  const auto b = make_curve({{0.6, 28.0}, {1.3, 31.0}, {2.9, 35.5}, {6.5, 39.0}});
  EXPECT_NEAR(bd_psnr(a, b), quadrature_bd(a, b), 1e-6);
  EXPECT_NEAR(bd_psnr(a, b), -bd_psnr(b, a), 1e-12);
}

TEST(BdPsnr, HighRateSubsetSelectsThetas) {
  auto a = make_curve({{0.2, 20.0}, {0.5, 30.0}, {1.0, 34.0}, {2.0, 37.5}, {4.0, 40.0}}, {25, 19, 13, 7, 1});
  auto b = a;
  for (auto& p : b.points) p.psnr_db += (p.theta == 25 ? 9.0 : 2.0);
  EXPECT_NEAR(bd_psnr(b, a, BdSubset::high_rate), 2.0, 1e-9);
  EXPECT_GT(bd_psnr(b, a, BdSubset::all), 2.0);
}

TEST(BdPsnr, RejectsDegenerateCurves) {
  const auto a = make_curve({{0.5, 30.0}, {1.0, 34.0}, {2.0, 37.5}, {4.0, 40.0}});
  EXPECT_THROW(bd_psnr(a, make_curve({{0.5, 30.0}, {1.0, 34.0}, {2.0, 37.5}})), Error);
  EXPECT_THROW(bd_psnr(a, make_curve({{5, 30.0}, {6, 34.0}, {7, 37.5}, {8, 40.0}})), Error);
  EXPECT_THROW(bd_psnr(a, make_curve({{0.5, 30.0}, {0.5, 34.0}, {2.0, 37.5}, {4.0, 40.0}})), Error);
}

TEST(Curves, CsvRoundTrip) {
  auto a = make_curve({{0.5, 30.0}, {1.0 / 3.0, 34.123456789}, {2.0, 37.5}, {4.0, 40.0}});
  a.points[1].ssim = 0.987654321;
  a.label = "x";
  const auto text = curve_to_csv(a);
  EXPECT_EQ(text.substr(0, text.find('\n')), "bpp,psnr,ssim,theta");
  const auto back = curve_from_csv(text, "x");
  ASSERT_EQ(back.points.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.points[i].bpp, a.points[i].bpp);
    EXPECT_EQ(back.points[i].psnr_db, a.points[i].psnr_db);
    EXPECT_EQ(back.points[i].theta, a.points[i].theta);
  }
  EXPECT_EQ(back.points[1].ssim, a.points[1].ssim);
  EXPECT_TRUE(std::isnan(back.points[0].ssim));
  const auto reordered = curve_from_csv("theta,psnr,bpp\n7,33,1.5\n1,35,2.5\n");
  ASSERT_EQ(reordered.points.size(), 2u);
  EXPECT_EQ(reordered.points[1].bpp, 2.5);
  EXPECT_EQ(reordered.points[1].theta, 1);
}
