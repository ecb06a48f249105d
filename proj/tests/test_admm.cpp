#include <gtest/gtest.h>

#include "support.hpp"

using namespace precomp;
using namespace testing_support;

TEST(Beta, ScheduleBrackets) {
  const std::vector<std::pair<int, double>> table{{0, 0.03},  {20, 0.03}, {21, 0.05}, {30, 0.05}, {31, 0.10},
                                                  {40, 0.10}, {41, 0.35}, {45, 0.35}, {46, 0.45}, {51, 0.45}};
  for (const auto& [qp, beta] : table) EXPECT_EQ(beta_schedule(qp), beta) << qp;
  EXPECT_THROW(beta_schedule(52), Error);
  EXPECT_THROW(beta_schedule(-1), Error);
}

TEST(Beta, VideoModesScaleSchedule) {
  auto c = AdmmConfig::video_defaults(8, VideoMode::psnr_oriented);
  EXPECT_DOUBLE_EQ(c.resolve_beta(25), 0.5);
  c = AdmmConfig::video_defaults(8, VideoMode::smoothness_oriented);
  EXPECT_DOUBLE_EQ(c.resolve_beta(10), 1.5);
  c.beta = 0.7;
  EXPECT_EQ(c.resolve_beta(10), 0.7);
}

TEST(Stop, ThresholdsScaleWithFrameCount) {
  for (std::size_t t : {8u, 120u}) {
    const auto c = AdmmConfig::video_defaults(t, VideoMode::psnr_oriented);
    EXPECT_EQ(c.conv_tol, 0.5 * static_cast<double>(t));
    EXPECT_EQ(c.div_tol, 50.0 / static_cast<double>(t));
    EXPECT_EQ(c.max_iters, 10u);
  }
  const auto img = AdmmConfig::image_defaults();
  EXPECT_EQ(img.conv_tol, 0.2);
  EXPECT_EQ(img.div_tol, 50.0);
  EXPECT_EQ(img.conv_streak, 3u);
}

TEST(Stop, ConvergesAfterThreeSmallDeltas) {
  const auto c = AdmmConfig::image_defaults();
  EXPECT_EQ(check_stop(std::vector<double>{}, c), AdmmStatus::running);
  EXPECT_EQ(check_stop(std::vector<double>{100.0}, c), AdmmStatus::running);
  EXPECT_EQ(check_stop({100.0, 99.9, 99.8}, c), AdmmStatus::running);
  EXPECT_EQ(check_stop({100.0, 99.9, 99.8, 99.7}, c), AdmmStatus::converged);
  EXPECT_EQ(check_stop({100.0, 99.9, 99.8, 99.5, 99.4}, c), AdmmStatus::running);
  EXPECT_EQ(check_stop({120.0, 100.0, 99.9, 100.05, 99.9}, c), AdmmStatus::converged);
  EXPECT_EQ(check_stop({100.0, 99.8, 99.6, 99.4}, c), AdmmStatus::running);  // 0.2 is not below 0.2
}

TEST(Stop, DivergesOnLargeJump) {
  const auto c = AdmmConfig::image_defaults();
  EXPECT_EQ(check_stop({10.0, 70.0}, c), AdmmStatus::diverged);
  EXPECT_EQ(check_stop({10.0, 60.0}, c), AdmmStatus::running);
  EXPECT_EQ(check_stop({10.0, 10.0, 10.0, 10.0, 80.0}, c), AdmmStatus::diverged);
}

namespace {

// Stand-in codec: smooth and deterministic, tags each call in the payload.
CompressFn affine_codec(int* calls) {
  return [calls](const SignalBuffer& s) {
    CodecResult r;
    r.decompressed = 0.9 * s;
    for (double& v : r.decompressed.samples()) v += 0.01;
    r.stream.payload = {static_cast<std::uint8_t>((*calls)++)};
    r.stream.bit_count = 8;
    return r;
  };
}

struct Oracle {
  Eigen::VectorXd z, u, v;
};

// Straight-line transcription of the three updates with a dense solve.
Oracle oracle_steps(const Eigen::MatrixXd& h, const Eigen::VectorXd& x, double beta, int steps,
                    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& codec) {
  const auto n = x.size();
  Oracle o{x, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  const Eigen::MatrixXd a = h.transpose() * h + 0.5 * beta * Eigen::MatrixXd::Identity(n, n);
  const auto ldlt = a.ldlt();
  for (int t = 0; t < steps; ++t) {
    o.v = codec(o.z - o.u);
    const Eigen::VectorXd vt = o.v + o.u;
    o.z = ldlt.solve(h.transpose() * x + 0.5 * beta * vt);
    o.u = o.u + o.v - o.z;
  }
  return o;
}

double max_diff(const SignalBuffer& a, const Eigen::VectorXd& b) { return (to_vec(a) - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Step, MatchesStraightLineOracleWithSmoothCodec) {
  const SignalGeometry g(32, 32, 1);
  const ShiftInvariantBlur op(gaussian_kernel(0.6, 15), Boundary::circular);
  const auto x = textured_image(32, 32, 3);
  const double beta = 0.05;
  int calls = 0;
  const auto codec = affine_codec(&calls);
  auto state = admm_init(x);
  const auto cfg = AdmmConfig::image_defaults();
  admm_step(state, x, op, codec, beta, cfg);
  admm_step(state, x, op, codec, beta, cfg);
  const auto o = oracle_steps(dense_matrix(op, g), to_vec(x), beta, 2,
                              [](const Eigen::VectorXd& s) { return Eigen::VectorXd(0.9 * s.array() + 0.01); });
  EXPECT_LT(max_diff(state.v_hat, o.v), 1e-12);
  EXPECT_LT(max_diff(state.z_hat, o.z), 1e-12);
  EXPECT_LT(max_diff(state.u, o.u), 1e-12);
  EXPECT_EQ(state.iteration, 2u);
  EXPECT_NEAR(state.w_history.back(), (o.v - o.z).lpNorm<1>(), 1e-9);
}

TEST(Step, MatchesStraightLineOracleWithBuiltinCodec) {
  const SignalGeometry g(32, 32, 1);
  const ShiftInvariantBlur op(gaussian_kernel(0.6, 15), Boundary::circular);
  const auto x = textured_image(32, 32, 4);
  CodecParams p;
  p.theta = 13;
  const double beta = beta_schedule(13);
  auto state = admm_init(x);
  admm_step(state, x, op, make_compressor(p), beta, {});
  admm_step(state, x, op, make_compressor(p), beta, {});
  const auto o = oracle_steps(dense_matrix(op, g), to_vec(x), beta, 2, [&](const Eigen::VectorXd& s) {
    return to_vec(compress_decompress(from_vec(s, g), p).decompressed);
  });
  EXPECT_LT(max_diff(state.v_hat, o.v), 1e-12);
  EXPECT_LT(max_diff(state.z_hat, o.z), 1e-12);
  EXPECT_LT(max_diff(state.u, o.u), 1e-12);
}

TEST(Step, FailureLeavesStateUntouched) {
  const auto x = textured_image(16, 16, 1);
  const ShiftInvariantBlur op(gaussian_kernel(0.6, 3));
  auto state = admm_init(x);
  CodecParams p;
  p.theta = 10;
  admm_step(state, x, op, make_compressor(p), 0.1, {});
  const auto before = state.z_hat;
  const CompressFn broken = [](const SignalBuffer&) -> CodecResult { throw CodecError("codec down"); };
  EXPECT_THROW(admm_step(state, x, op, broken, 0.1, {}), CodecError);
  EXPECT_EQ(state.iteration, 1u);
  EXPECT_EQ(state.z_hat, before);
  EXPECT_EQ(state.w_history.size(), 1u);
}

TEST(Run, SingleIterationEqualsPlainCompression) {
  const ShiftInvariantBlur op(gaussian_kernel(0.6, 15), Boundary::circular);
  auto cfg = AdmmConfig::image_defaults();
  cfg.max_iters = 1;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto x = textured_image(48, 40, seed);
    for (int theta : {1, 19, 37}) {
      CodecParams p;
      p.theta = theta;
      const auto res = admm_run(x, op, p, cfg);
      const auto plain = compress_decompress(x, p);
      EXPECT_EQ(res.stream.payload, plain.stream.payload);
      EXPECT_EQ(res.decompressed, plain.decompressed);
      EXPECT_EQ(res.diagnostics.status, AdmmStatus::max_iters);
    }
  }
}

TEST(Run, DivergenceRollsBackToPreviousStream) {
  const auto x = textured_image(16, 16, 2);
  const ScaledIdentityOp op(1.0);
  int calls = 0;
  const CompressFn codec = [&calls](const SignalBuffer& s) {
    CodecResult r;
    r.decompressed = s;
    if (calls >= 2) {
      for (double& v : r.decompressed.samples()) v += 5.0;
    }
    r.stream.payload = {static_cast<std::uint8_t>(calls++)};
    r.stream.bit_count = 8;
    return r;
  };
  const auto res = admm_run(x, op, codec, 0.1, AdmmConfig::image_defaults());
  EXPECT_EQ(res.diagnostics.status, AdmmStatus::diverged);
  EXPECT_EQ(res.diagnostics.iterations.size(), 3u);
  EXPECT_EQ(res.diagnostics.output_iteration, 2u);
  EXPECT_EQ(res.stream.payload, std::vector<std::uint8_t>{1});
}

TEST(Run, ConvergesOnBlurredImage) {
  const auto x = textured_image(64, 64, 5);
  const ShiftInvariantBlur op(gaussian_kernel(0.6, 15), Boundary::circular);
  CodecParams p;
  p.theta = 7;
  const auto res = admm_run(x, op, p, AdmmConfig::image_defaults());
  EXPECT_EQ(res.diagnostics.status, AdmmStatus::converged);
  EXPECT_EQ(builtin_decode(res.stream), res.decompressed);
  const auto plain = compress_decompress(x, p);
  EXPECT_GT(psnr(x, op.apply(res.decompressed)), psnr(x, op.apply(plain.decompressed)) + 2.0);
  const auto j = to_json(res.diagnostics);
  EXPECT_EQ(j["final"]["status"], "converged");
  EXPECT_EQ(j["iterations"].size(), res.diagnostics.iterations.size());
}

TEST(Run, VideoUsesBlockDiagonalSolve) {
  const auto pan = make_synthetic_pan(textured_image(64, 48, 1), Motion{-3, 0}, 4, 48, 48);
  const auto op = make_operator({{"type", "motion"}, {"dx", -3}, {"dy", 0}}, pan.geometry());
  CodecParams p;
  p.theta = 7;
  const auto cfg = AdmmConfig::video_defaults(4, VideoMode::psnr_oriented);
  const auto res = admm_run(pan, *op, p, cfg);
  EXPECT_LE(res.diagnostics.iterations.size(), 10u);
  EXPECT_GT(psnr(pan, op->apply(res.decompressed)), psnr(pan, op->apply(compress_decompress(pan, p).decompressed)));
}

TEST(Config, Validation) {
  AdmmConfig c;
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta = -1.0;
  EXPECT_THROW(c.validate(), Error);
}
