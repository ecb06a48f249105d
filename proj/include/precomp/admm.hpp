#pragma once

// Pre-compensating compression: ADMM over the split v = z, where v is
// restricted to codec outputs and z carries the degradation-aware data term.
//
//   z~(t) = z^(t-1) - u(t)
//   v^(t) = CompressDecompress_theta(z~(t))
//   v~(t) = v^(t) + u(t)
//   z^(t) = (H^T H + beta/2 I)^{-1} (H^T x + beta/2 v~(t))
//   u(t+1) = u(t) + v^(t) - z^(t)
//
// with z^(0) = x, u(1) = 0. The bitstream of the last v-update is the output.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "precomp/codec.hpp"
#include "precomp/degradation.hpp"
#include "precomp/external_codec.hpp"
#include "precomp/metrics.hpp"

namespace precomp {

/// QP-dependent beta for still images.
inline double beta_schedule(int qp) {
  if (qp < 0 || qp > 51) throw Error("beta_schedule: qp must be in [0, 51], got " + std::to_string(qp));
  if (qp <= 20) return 0.03;
  if (qp <= 30) return 0.05;
  if (qp <= 40) return 0.10;
  if (qp <= 45) return 0.35;
  return 0.45;
}

enum class VideoMode { psnr_oriented, smoothness_oriented };

inline double video_beta_multiplier(VideoMode mode) { return mode == VideoMode::psnr_oriented ? 10.0 : 50.0; }

enum class AdmmStatus { running, converged, diverged, max_iters };

inline const char* to_string(AdmmStatus s) {
  switch (s) {
    case AdmmStatus::running: return "running";
    case AdmmStatus::converged: return "converged";
    case AdmmStatus::diverged: return "diverged";
    case AdmmStatus::max_iters: return "max_iters";
  }
  return "?";
}

struct AdmmConfig {
  std::optional<double> beta;    ///< nullopt: beta_multiplier * beta_schedule(theta)
  double beta_multiplier = 1.0;  ///< 10 / 50 for the two video modes
  std::size_t max_iters = 40;
  double conv_tol = 0.2;
  std::size_t conv_streak = 3;
  double div_tol = 50.0;
  /// Divide w by N so thresholds are independent of signal size.
  bool normalized_w = false;
  std::size_t psnr_margin = 0;  ///< for the per-iteration diagnostics only
  SolveOptions solve;

  static AdmmConfig image_defaults() { return {}; }

  /// Video thresholds scale with the frame count: 0.5*T and 50/T.
  static AdmmConfig video_defaults(std::size_t frames, VideoMode mode) {
    AdmmConfig c;
    c.max_iters = 10;
    c.beta_multiplier = video_beta_multiplier(mode);
    c.conv_tol = 0.5 * static_cast<double>(frames);
    c.div_tol = 50.0 / static_cast<double>(frames);
    return c;
  }

  double resolve_beta(int theta) const {
    const double b = beta ? *beta : beta_multiplier * beta_schedule(theta);
    if (!(b > 0.0)) throw Error("beta must be positive");
    return b;
  }

  void validate() const {
    if (beta && !(*beta > 0.0)) throw Error("beta must be positive");
    if (max_iters < 1) throw Error("max_iters must be at least 1");
    if (conv_streak < 1) throw Error("conv_streak must be at least 1");
  }
};

struct AdmmState {
  std::size_t iteration = 0;  ///< completed iterations
  SignalBuffer v_hat;
  SignalBuffer z_hat;
  SignalBuffer u;
  std::vector<double> w_history;
  CompressedBitstream last_stream;
  /// Output of the iteration before the last one; kept for divergence rollback.
  CompressedBitstream previous_stream;
  SignalBuffer previous_v_hat;
  AdmmStatus status = AdmmStatus::running;
};

/// z^(0) = x, u(1) = 0.
inline AdmmState admm_init(const SignalBuffer& x) {
  AdmmState s;
  s.z_hat = x;
  s.u = SignalBuffer(x.geometry(), 0.0);
  return s;
}

using CompressFn = std::function<CodecResult(const SignalBuffer&)>;

inline CompressFn make_compressor(const CodecParams& params) {
  return [params](const SignalBuffer& s) { return compress_decompress(s, params); };
}

/// One v/z/u sweep. Errors from the codec or the solver propagate and leave
/// `state` untouched.
inline void admm_step(AdmmState& state, const SignalBuffer& x, const LinearOperator& op, const CompressFn& codec,
                      double beta, const AdmmConfig& config) {
  require_same_geometry(x, state.z_hat, "admm_step");
  const SignalBuffer z_tilde = state.z_hat - state.u;
  CodecResult coded = codec(z_tilde);
  require_same_geometry(x, coded.decompressed, "admm_step codec output");
  const SignalBuffer v_tilde = coded.decompressed + state.u;
  SignalBuffer z_hat = op.regularized_solve(x, v_tilde, beta, config.solve);

  const SignalBuffer residual = coded.decompressed - z_hat;
  double w = 0.0;
  for (double r : residual.samples()) w += std::abs(r);
  if (config.normalized_w) w /= static_cast<double>(x.size());

  state.u = state.u + residual;
  state.previous_stream = std::move(state.last_stream);
  state.previous_v_hat = std::move(state.v_hat);
  state.last_stream = std::move(coded.stream);
  state.v_hat = std::move(coded.decompressed);
  state.z_hat = std::move(z_hat);
  state.w_history.push_back(w);
  ++state.iteration;
}

/// Stopping verdict from the w history alone.
inline AdmmStatus check_stop(const std::vector<double>& w, const AdmmConfig& config) {
  if (w.size() < 2) return AdmmStatus::running;
  if (w.back() - w[w.size() - 2] > config.div_tol) return AdmmStatus::diverged;
  if (w.size() < config.conv_streak + 1) return AdmmStatus::running;
  for (std::size_t i = w.size() - config.conv_streak; i < w.size(); ++i) {
    if (!(std::abs(w[i] - w[i - 1]) < config.conv_tol)) return AdmmStatus::running;
  }
  return AdmmStatus::converged;
}

inline AdmmStatus check_stop(const AdmmState& state, const AdmmConfig& config) {
  return check_stop(state.w_history, config);
}

struct IterationRecord {
  std::size_t t = 0;
  double w = 0.0;
  double psnr_degraded = 0.0;
  std::size_t bits = 0;
};

struct AdmmDiagnostics {
  std::vector<IterationRecord> iterations;
  AdmmStatus status = AdmmStatus::running;
  double beta = 0.0;
  std::size_t output_iteration = 0;  ///< iteration whose stream was returned
  std::size_t bits = 0;
};

inline nlohmann::json to_json(const AdmmDiagnostics& d) {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& r : d.iterations) {
    iters.push_back({{"t", r.t},
                     {"w", r.w},
                     {"psnr_degraded", std::isfinite(r.psnr_degraded) ? nlohmann::json(r.psnr_degraded) : nlohmann::json(nullptr)},
                     {"bits", r.bits}});
  }
  return {{"iterations", iters},
          {"final",
           {{"status", to_string(d.status)},
            {"iterations", d.iterations.size()},
            {"output_iteration", d.output_iteration},
            {"beta", d.beta},
            {"bits", d.bits}}}};
}

struct AdmmResult {
  CompressedBitstream stream;
  SignalBuffer decompressed;  ///< decode(stream)
  AdmmDiagnostics diagnostics;
};

inline AdmmResult admm_run(const SignalBuffer& x, const LinearOperator& op, const CompressFn& codec, double beta,
                           const AdmmConfig& config) {
  config.validate();
  op.check_geometry(x.geometry());
  AdmmState state = admm_init(x);
  AdmmDiagnostics diag;
  diag.beta = beta;
  const std::size_t margin =
      2 * config.psnr_margin < std::min(x.geometry().width, x.geometry().height) ? config.psnr_margin : 0;

  while (state.status == AdmmStatus::running) {
    admm_step(state, x, op, codec, beta, config);
    diag.iterations.push_back({state.iteration, state.w_history.back(), psnr(x, op.apply(state.v_hat), 1.0, margin),
                               state.last_stream.bit_count});
    state.status = check_stop(state, config);
    if (state.status == AdmmStatus::running && state.iteration >= config.max_iters) {
      state.status = AdmmStatus::max_iters;
    }
  }

  AdmmResult result;
  if (state.status == AdmmStatus::diverged) {
    result.stream = std::move(state.previous_stream);
    result.decompressed = std::move(state.previous_v_hat);
    diag.output_iteration = state.iteration - 1;
  } else {
    result.stream = std::move(state.last_stream);
    result.decompressed = std::move(state.v_hat);
    diag.output_iteration = state.iteration;
  }
  diag.status = state.status;
  diag.bits = result.stream.bit_count;
  result.diagnostics = std::move(diag);
  return result;
}

/// Algorithm entry point: beta comes from the config (or the QP schedule).
inline AdmmResult admm_run(const SignalBuffer& x, const LinearOperator& op, const CodecParams& params,
                           const AdmmConfig& config) {
  return admm_run(x, op, make_compressor(params), config.resolve_beta(params.theta), config);
}

}  // namespace precomp
