#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace precomp;
using namespace testing_support;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentSpec small_image_spec() {
  ExperimentSpec spec;
  spec.label = "small";
  spec.input = textured_image(48, 48, 2);
  spec.degradation = {{"type", "gaussian"}, {"sigma", 0.6}, {"size", 15}};
  spec.thetas = {1, 7, 13, 19};
  spec.methods = {"regular", "pinv", "proposed"};
  spec.margin = 8;
  return spec;
}

}  // namespace

TEST(Synthetic, TexturedImageIsDeterministicAndBounded) {
  const auto a = textured_image(40, 30, 9), b = textured_image(40, 30, 9), c = textured_image(40, 30, 10);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  for (double v : a.samples()) {
    EXPECT_GE(v, 0.05);
    EXPECT_LE(v, 0.95);
  }
}

TEST(Synthetic, PanShiftsContent) {
  const auto tex = textured_image(60, 40, 1);
  const auto pan = make_synthetic_pan(tex, Motion{2, 0}, 3, 40, 40);
  for (std::size_t k = 1; k < 3; ++k)
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t c = 2 * k; c < 40; ++c) EXPECT_EQ(pan.at(k, r, c), pan.at(0, r, c - 2 * k));
  const auto up = make_synthetic_pan(tex, Motion{0, -1}, 4, 30, 30);
  for (std::size_t r = 0; r + 3 < 30; ++r) EXPECT_EQ(up.at(3, r, 5), up.at(0, r + 3, 5));
  EXPECT_THROW(make_synthetic_pan(tex, Motion{0.5, 0}, 3, 10, 10), Error);
  EXPECT_THROW(make_synthetic_pan(tex, Motion{30, 0}, 3, 40, 40), GeometryError);
}

TEST(Synthetic, GlobalMotionEstimate) {
  const auto tex = textured_image(120, 100, 4);
  for (const Motion m : {Motion{-3, 0}, Motion{2, -1}, Motion{0, 4}}) {
    const auto pan = make_synthetic_pan(tex, m, 4, 64, 64);
    const auto est = estimate_global_motion(pan);
    EXPECT_EQ(est.dx, m.dx);
    EXPECT_EQ(est.dy, m.dy);
  }
  EXPECT_EQ(estimate_global_motion(tex).dx, 0.0);
}

TEST(Display, PerceivedMatchesDenseOperator) {
  const auto pan = make_synthetic_pan(textured_image(50, 40, 2), Motion{3, 0}, 3, 32, 32);
  const auto sim = simulate_display(pan, Motion{3, 0});
  const MotionBlurFrameOp frame_op(32, 32, Motion{3, 0});
  const auto h = dense_matrix(frame_op, SignalGeometry(32, 32, 1));
  for (std::size_t k = 0; k < 3; ++k) {
    const auto f = pan.extract_frame(k);
    const Eigen::VectorXd expected = h * to_vec(f);
    EXPECT_LT((to_vec(sim.perceived.extract_frame(k)) - expected).cwiseAbs().maxCoeff(), 1e-14);
    const Eigen::VectorXd diff = ((expected - to_vec(f)) * 255.0).array() / 100.0 + 0.5;
    EXPECT_LT((to_vec(sim.difference.extract_frame(k)) - diff).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Display, VerticalLineSmearsOverThreeColumns) {
  SignalBuffer v(SignalGeometry(20, 6, 1), 0.0);
  for (std::size_t r = 0; r < 6; ++r) v.at(0, r, 10) = 1.0;
  const auto sim = simulate_display(v, Motion{3, 0});
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      const double expected = (c >= 8 && c <= 10) ? 1.0 / 3.0 : 0.0;
      EXPECT_NEAR(sim.perceived.at(0, r, c), expected, 1e-15) << r << "," << c;
    }
  }
}

TEST(Experiment, CellsCurvesAndBd) {
  const auto report = run_experiment(small_image_spec());
  ASSERT_EQ(report.cells.size(), 12u);
  for (const auto& c : report.cells) {
    ASSERT_TRUE(c.ok) << c.method << " " << c.error;
    EXPECT_DOUBLE_EQ(c.point.bpp, 8.0 * static_cast<double>(c.stream.payload.size()) / (48.0 * 48.0));
    EXPECT_FALSE(std::isnan(c.point.ssim));
  }
  EXPECT_EQ(report.curves.at("proposed").points.size(), 4u);
  EXPECT_TRUE(report.bd_psnr.at("proposed_over_regular").high_rate.has_value());
  EXPECT_GT(*report.bd_psnr.at("proposed_over_regular").high_rate, 0.0);
  const auto* regular = report.cell("regular", 7);
  ASSERT_NE(regular, nullptr);
  EXPECT_EQ(regular->stream.payload, builtin_encode(small_image_spec().input, [] {
    CodecParams p;
    p.theta = 7;
    return p;
  }()).payload);
}

TEST(Experiment, WritesArtifactsDeterministically) {
  auto spec = small_image_spec();
  const auto dir_a = scratch_dir("det-a");
  const auto dir_b = scratch_dir("det-b");
  spec.out_dir = dir_a;
  run_experiment(spec);
  spec.out_dir = dir_b;
  run_experiment(spec);
  for (const auto* name : {"proposed_q13.pcc", "pinv_q1.pcc", "curve_proposed.csv", "curve_regular.csv",
                           "bd_psnr.json", "report.json", "proposed_q7_diag.json", "regular_q19_decoded.pgm"}) {
    ASSERT_TRUE(std::filesystem::exists(dir_a / name)) << name;
    EXPECT_EQ(slurp(dir_a / name), slurp(dir_b / name)) << name;
  }
  const auto curve = curve_from_csv(slurp(dir_a / "curve_proposed.csv"));
  EXPECT_EQ(curve.points.size(), 4u);
  const auto report = nlohmann::json::parse(slurp(dir_a / "report.json"));
  EXPECT_EQ(report["cells"].size(), 12u);
}

TEST(Experiment, FailingCellsAreRecorded) {
  ExperimentSpec spec;
  spec.input = make_synthetic_pan(textured_image(40, 32, 1), Motion{2, 0}, 3, 32, 32);
  spec.degradation = {{"type", "motion"}, {"dx", 2}, {"dy", 0}};
  spec.thetas = {7, 13};
  spec.methods = {"regular", "pinv"};
  spec.margin = 4;
  const auto report = run_experiment(spec);
  EXPECT_TRUE(report.cell("regular", 7)->ok);
  EXPECT_FALSE(report.cell("pinv", 7)->ok);
  EXPECT_FALSE(report.all_failed());
  EXPECT_FALSE(report.bd_psnr.at("regular_over_pinv").error.empty());
}

TEST(Experiment, SpecValidation) {
  auto spec = small_image_spec();
  spec.methods = {"magic"};
  EXPECT_THROW(run_experiment(spec), Error);
  spec = small_image_spec();
  spec.margin = 24;
  EXPECT_THROW(run_experiment(spec), Error);
  spec = small_image_spec();
  spec.thetas = {};
  EXPECT_EQ(spec.resolved_thetas(), default_image_thetas());
  EXPECT_EQ(default_image_thetas().size(), 17u);
  EXPECT_EQ(default_video_thetas(), (std::vector<int>{1, 4, 7, 10, 13, 16, 19}));
}
