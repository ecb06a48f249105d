#pragma once

// Method comparison runner: regular compression, pseudoinverse prefilter and
// the ADMM pre-compensation, swept over theta, with RD curves and BD-PSNR.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "precomp/admm.hpp"
#include "precomp/codec.hpp"
#include "precomp/degradation.hpp"
#include "precomp/external_codec.hpp"
#include "precomp/metrics.hpp"
#include "precomp/operator_spec.hpp"
#include "precomp/pseudoinverse.hpp"
#include "precomp/signal_io.hpp"

namespace precomp {

inline std::vector<int> theta_range(int first, int last, int step) {
  std::vector<int> out;
  for (int q = first; q <= last; q += step) out.push_back(q);
  return out;
}

/// Image sweep 1..49 step 3; video sweep 1..19 step 3.
inline std::vector<int> default_image_thetas() { return theta_range(1, 49, 3); }
inline std::vector<int> default_video_thetas() { return theta_range(1, 19, 3); }

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"regular", "pinv", "proposed"};
  return m;
}

struct ExperimentSpec {
  std::string label = "signal";
  SignalBuffer input;
  nlohmann::json degradation = {{"type", "identity"}};
  CodecParams codec;                ///< theta is overridden per cell
  std::vector<int> thetas;          ///< empty: default sweep for the signal type
  std::vector<std::string> methods{"regular", "proposed"};
  std::optional<double> beta;       ///< fixed beta; nullopt uses the QP schedule
  VideoMode mode = VideoMode::psnr_oriented;
  std::optional<std::size_t> max_iters;
  std::size_t margin = 35;
  double pinv_eps = kDefaultPinvEps;
  std::filesystem::path out_dir;    ///< empty: nothing written

  void validate() const {
    if (methods.empty()) throw Error("experiment needs at least one method");
    for (const auto& m : methods) {
      if (std::ranges::find(known_methods(), m) == known_methods().end()) throw Error("unknown method '" + m + "'");
    }
    for (int q : thetas) check_theta(q);
    const auto& g = input.geometry();
    if (2 * margin >= std::min(g.width, g.height)) {
      throw Error("margin " + std::to_string(margin) + " too large for " + to_string(g));
    }
  }

  std::vector<int> resolved_thetas() const {
    if (!thetas.empty()) return thetas;
    return input.geometry().frames > 1 ? default_video_thetas() : default_image_thetas();
  }

  AdmmConfig admm_config() const {
    const std::size_t t = input.geometry().frames;
    AdmmConfig c = t > 1 ? AdmmConfig::video_defaults(t, mode) : AdmmConfig::image_defaults();
    c.beta = beta;
    if (max_iters) c.max_iters = *max_iters;
    c.psnr_margin = margin;
    return c;
  }
};

struct CellResult {
  std::string method;
  int theta = 0;
  bool ok = false;
  std::string error;
  RdPoint point;
  double mean_frame_psnr = 0.0;  ///< average of per-frame PSNRs
  CompressedBitstream stream;
  SignalBuffer decompressed;
  SignalBuffer degraded;
  std::optional<AdmmDiagnostics> diagnostics;
};

struct BdEntry {
  std::optional<double> all;
  std::optional<double> high_rate;
  std::string error;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::map<std::string, RdCurve> curves;             ///< by method
  std::map<std::string, BdEntry> bd_psnr;            ///< key "a_over_b"

  bool all_failed() const {
    return std::ranges::none_of(cells, [](const CellResult& c) { return c.ok; });
  }

  const CellResult* cell(const std::string& method, int theta) const {
    for (const auto& c : cells) {
      if (c.method == method && c.theta == theta) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline CellResult run_cell(const ExperimentSpec& spec, const LinearOperator& op, const std::string& method, int theta) {
  CellResult cell;
  cell.method = method;
  cell.theta = theta;
  const SignalBuffer& x = spec.input;
  CodecParams params = spec.codec;
  params.theta = theta;

  if (method == "regular") {
    auto coded = compress_decompress(x, params);
    cell.stream = std::move(coded.stream);
    cell.decompressed = std::move(coded.decompressed);
  } else if (method == "pinv") {
    const auto* blur = dynamic_cast<const ShiftInvariantBlur*>(&op);
    if (!blur) throw Error("pinv baseline needs a shift-invariant blur degradation");
    auto pre = pseudoinverse_prefilter(*blur, x, spec.pinv_eps);
    SignalBuffer mapped = pre.filtered;
    for (double& s : mapped.samples()) s = pre.shift_scale.forward(s);
    auto coded = compress_decompress(mapped, params);
    cell.stream = std::move(coded.stream);
    cell.decompressed = std::move(coded.decompressed);
    for (double& s : cell.decompressed.samples()) s = pre.shift_scale.inverse(s);
  } else {
    auto res = admm_run(x, op, params, spec.admm_config());
    cell.stream = std::move(res.stream);
    cell.decompressed = std::move(res.decompressed);
    cell.diagnostics = std::move(res.diagnostics);
  }

  cell.degraded = op.apply(cell.decompressed);
  // Rate is recomputed from the stream bytes rather than trusted from the codec.
  cell.point.bpp = 8.0 * static_cast<double>(cell.stream.payload.size()) / static_cast<double>(x.size());
  cell.point.psnr_db = psnr(x, cell.degraded, 1.0, spec.margin);
  cell.point.theta = theta;
  const auto& g = x.geometry();
  if (g.width >= 11 && g.height >= 11) cell.point.ssim = ssim(x, cell.degraded);
  const auto per_frame = frame_psnr(x, cell.degraded, 1.0, spec.margin);
  double sum = 0.0;
  for (double p : per_frame) sum += p;
  cell.mean_frame_psnr = sum / static_cast<double>(per_frame.size());
  cell.ok = true;
  return cell;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string bitstream_extension(const CodecParams& p) {
  return p.backend == CodecBackendKind::builtin ? ".pcc" : ".bin";
}

}  // namespace detail

inline nlohmann::json to_json(const BdEntry& e) {
  nlohmann::json j;
  j["all"] = e.all ? nlohmann::json(*e.all) : nlohmann::json(nullptr);
  j["high_rate"] = e.high_rate ? nlohmann::json(*e.high_rate) : nlohmann::json(nullptr);
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

inline BdEntry compare_curves(const RdCurve& a, const RdCurve& b) {
  BdEntry e;
  try {
    e.all = bd_psnr(a, b, BdSubset::all);
  } catch (const Error& ex) {
    e.error = std::string("all: ") + ex.what();
  }
  try {
    e.high_rate = bd_psnr(a, b, BdSubset::high_rate);
  } catch (const Error& ex) {
    e.error += (e.error.empty() ? "" : "; ") + std::string("high_rate: ") + ex.what();
  }
  return e;
}

/// Runs every method x theta cell. A failing cell is recorded and skipped.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const OperatorPtr op = make_operator(spec.degradation, spec.input.geometry());
  op->check_geometry(spec.input.geometry());
  const auto thetas = spec.resolved_thetas();

  ExperimentReport report;
  for (const auto& method : spec.methods) {
    RdCurve curve;
    curve.label = method;
    for (int theta : thetas) {
      CellResult cell;
      try {
        cell = detail::run_cell(spec, *op, method, theta);
        curve.points.push_back(cell.point);
      } catch (const std::exception& e) {
        cell.method = method;
        cell.theta = theta;
        cell.ok = false;
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
    }
    std::ranges::sort(curve.points, {}, &RdPoint::bpp);
    report.curves[method] = std::move(curve);
  }
  for (const auto& a : spec.methods) {
    for (const auto& b : spec.methods) {
      if (a != b) report.bd_psnr[a + "_over_" + b] = compare_curves(report.curves[a], report.curves[b]);
    }
  }

  if (!spec.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    const bool video = spec.input.geometry().frames > 1;
    const std::string img_ext = video ? ".y4m" : ".pgm";
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
      const std::string stem = c.method + "_q" + std::to_string(c.theta);
      nlohmann::json jc{{"method", c.method}, {"theta", c.theta}, {"ok", c.ok}};
      if (c.ok) {
        const auto bs_path = spec.out_dir / (stem + detail::bitstream_extension(c.stream.params));
        detail::write_text(bs_path, std::string(c.stream.payload.begin(), c.stream.payload.end()));
        write_signal(c.decompressed, spec.out_dir / (stem + "_decoded" + img_ext));
        write_signal(c.degraded, spec.out_dir / (stem + "_degraded" + img_ext));
        jc["bitstream"] = bs_path.filename().string();
        jc["bits"] = c.stream.bit_count;
        jc["bpp"] = c.point.bpp;
        jc["psnr"] = c.point.psnr_db;
        jc["mean_frame_psnr"] = c.mean_frame_psnr;
        jc["ssim"] = std::isnan(c.point.ssim) ? nlohmann::json(nullptr) : nlohmann::json(c.point.ssim);
        if (c.diagnostics) {
          detail::write_text(spec.out_dir / (stem + "_diag.json"), to_json(*c.diagnostics).dump(2) + "\n");
        }
      } else {
        jc["error"] = c.error;
      }
      cells.push_back(jc);
    }
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& [method, curve] : report.curves) {
      detail::write_text(spec.out_dir / ("curve_" + method + ".csv"), curve_to_csv(curve));
      curves.push_back(curve_to_json(curve));
    }
    detail::write_text(spec.out_dir / "curves.json", curves.dump(2) + "\n");
    nlohmann::json bd = nlohmann::json::object();
    for (const auto& [key, entry] : report.bd_psnr) bd[key] = to_json(entry);
    detail::write_text(spec.out_dir / "bd_psnr.json", bd.dump(2) + "\n");
    detail::write_text(spec.out_dir / "report.json",
                       nlohmann::json{{"label", spec.label},
                                      {"geometry", {{"width", spec.input.geometry().width},
                                                    {"height", spec.input.geometry().height},
                                                    {"frames", spec.input.geometry().frames}}},
                                      {"degradation", spec.degradation},
                                      {"margin", spec.margin},
                                      {"cells", cells}}
                               .dump(2) + "\n");
  }
  return report;
}

struct DisplaySimulation {
  SignalBuffer perceived;
  SignalBuffer difference;  ///< perceived - displayed, mapped so [-50, 50]/255 spans [0, 1]
};

/// Perceived video on a hold-type display for the given per-frame motion.
inline DisplaySimulation simulate_display(const SignalBuffer& video, const LinearOperator& motion_op) {
  DisplaySimulation sim;
  sim.perceived = motion_op.apply(video);
  sim.difference = sim.perceived - video;
  for (double& d : sim.difference.samples()) d = (d * 255.0 + 50.0) / 100.0;
  return sim;
}

inline DisplaySimulation simulate_display(const SignalBuffer& video, Motion motion) {
  const auto op = make_operator({{"type", "motion"}, {"dx", motion.dx}, {"dy", motion.dy}}, video.geometry());
  return simulate_display(video, *op);
}

}  // namespace precomp
