// precomp: command-line front end.
//
//   precomp run      --input img.pgm --degradation '{"type":"gaussian"}' --out-dir out
//   precomp simulate --input video.y4m --motion -3,0 --out-dir sim
//   precomp encode   --input img.pgm --theta 13 [--degradation spec.json] --output img.pcc
//   precomp decode   --input img.pcc --output img.pgm
//   precomp curves   --a curve_proposed.csv --b curve_regular.csv
//   precomp synth    --width 128 --height 128 [--frames 8 --motion -3,0] --output clip.y4m

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "precomp/precomp.hpp"

namespace {

using nlohmann::json;
using namespace precomp;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Inline JSON when the argument starts with '{', otherwise a file path.
json load_json_arg(const std::string& arg) {
  try {
    return json::parse(!arg.empty() && arg.front() == '{' ? arg : slurp(arg));
  } catch (const json::exception& e) {
    throw Error("bad JSON in '" + arg + "': " + e.what());
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<std::string> parse_str_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Motion parse_motion(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw Error("motion must be 'dx,dy', got '" + s + "'");
  return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

VideoMode parse_mode(const std::string& s) {
  if (s == "psnr") return VideoMode::psnr_oriented;
  if (s == "smooth") return VideoMode::smoothness_oriented;
  throw Error("mode must be psnr or smooth");
}

struct CodecFlags {
  std::string backend = "builtin";
  std::string codec_cmd;
  std::size_t block_size = 8;
  double timeout = 600.0;

  void add(CLI::App* app) {
    app->add_option("--backend", backend, "builtin or external")->check(CLI::IsMember({"builtin", "external"}));
    app->add_option("--codec-cmd", codec_cmd, "external command template ({input} {bitstream} {output} {qp})");
    app->add_option("--block-size", block_size, "builtin codec block size");
    app->add_option("--codec-timeout", timeout, "external codec timeout in seconds");
  }

  CodecParams params(int theta) const {
    CodecParams p;
    p.theta = theta;
    p.block_size = block_size;
    p.backend = backend == "external" ? CodecBackendKind::external : CodecBackendKind::builtin;
    p.command_template = codec_cmd;
    p.timeout_seconds = timeout;
    return p;
  }
};

int cmd_run(const std::string& spec_path, const std::string& input, const std::string& degradation,
            const std::string& theta_list, const std::string& methods, std::optional<double> beta, bool beta_auto,
            const std::string& mode, std::optional<std::size_t> margin, std::optional<std::size_t> max_iters,
            const std::string& out_dir, const CodecFlags& codec, CLI::App* app) {
  json j = spec_path.empty() ? json::object() : load_json_arg(spec_path);
  ExperimentSpec spec;

  const std::string in_path = !input.empty() ? input : j.value("input", std::string());
  if (in_path.empty()) throw Error("run: --input (or \"input\" in the spec) is required");
  spec.input = read_signal(in_path);
  spec.label = j.value("label", std::filesystem::path(in_path).stem().string());

  if (!degradation.empty()) {
    spec.degradation = load_json_arg(degradation);
  } else if (j.contains("degradation")) {
    spec.degradation = j.at("degradation");
  }

  CodecFlags cf = codec;
  if (app->count("--backend") == 0 && j.contains("backend")) cf.backend = j.at("backend").get<std::string>();
  if (app->count("--codec-cmd") == 0 && j.contains("codec_cmd")) cf.codec_cmd = j.at("codec_cmd").get<std::string>();
  if (app->count("--block-size") == 0 && j.contains("block_size")) cf.block_size = j.at("block_size").get<std::size_t>();
  spec.codec = cf.params(0);

  if (!theta_list.empty()) {
    spec.thetas = parse_int_list(theta_list);
  } else if (j.contains("thetas")) {
    spec.thetas = j.at("thetas").get<std::vector<int>>();
  }
  if (!methods.empty()) {
    spec.methods = parse_str_list(methods);
  } else if (j.contains("methods")) {
    spec.methods = j.at("methods").get<std::vector<std::string>>();
  }

  if (beta) {
    spec.beta = beta;
  } else if (!beta_auto && j.contains("beta") && j.at("beta").is_number()) {
    spec.beta = j.at("beta").get<double>();
  }
  spec.mode = parse_mode(!mode.empty() ? mode : j.value("mode", std::string("psnr")));
  if (margin) {
    spec.margin = *margin;
  } else if (j.contains("margin")) {
    spec.margin = j.at("margin").get<std::size_t>();
  }
  if (max_iters) {
    spec.max_iters = max_iters;
  } else if (j.contains("max_iters")) {
    spec.max_iters = j.at("max_iters").get<std::size_t>();
  }
  spec.pinv_eps = j.value("pinv_eps", kDefaultPinvEps);
  spec.out_dir = !out_dir.empty() ? out_dir : j.value("out_dir", std::string("precomp_out"));

  const auto report = run_experiment(spec);
  for (const auto& c : report.cells) {
    if (c.ok) {
      std::printf("%-9s q=%2d  bpp=%8.4f  psnr=%7.3f dB  ssim=%.5f\n", c.method.c_str(), c.theta, c.point.bpp,
                  c.point.psnr_db, c.point.ssim);
    } else {
      std::printf("%-9s q=%2d  FAILED: %s\n", c.method.c_str(), c.theta, c.error.c_str());
    }
  }
  for (const auto& [key, e] : report.bd_psnr) {
    std::printf("BD-PSNR %-22s all=%s high_rate=%s\n", key.c_str(),
                e.all ? std::to_string(*e.all).c_str() : "n/a", e.high_rate ? std::to_string(*e.high_rate).c_str() : "n/a");
  }
  std::printf("results written to %s\n", spec.out_dir.string().c_str());
  return report.all_failed() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compression pre-compensated for a known post-decompression degradation"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "method comparison over a theta sweep");
  std::string spec_path, input, degradation, theta_list, methods, mode, out_dir;
  std::optional<double> beta;
  bool beta_auto = false;
  std::optional<std::size_t> margin, max_iters;
  CodecFlags run_codec;
  run->add_option("--spec", spec_path, "experiment spec JSON (file or inline)");
  run->add_option("--input", input, "input .pgm / .y4m / .f64");
  run->add_option("--degradation", degradation, "degradation JSON (file or inline)");
  run->add_option("--theta-list", theta_list, "comma-separated theta values");
  run->add_option("--methods", methods, "comma-separated subset of regular,pinv,proposed");
  auto* beta_opt = run->add_option("--beta", beta, "fixed ADMM beta");
  run->add_flag("--beta-auto", beta_auto, "QP-dependent beta schedule (default)")->excludes(beta_opt);
  run->add_option("--mode", mode, "video beta mode: psnr or smooth");
  run->add_option("--margin", margin, "PSNR border exclusion in pixels");
  run->add_option("--max-iters", max_iters, "ADMM iteration cap");
  run->add_option("--out-dir", out_dir, "output directory");
  run_codec.add(run);

  // simulate
  auto* sim = app.add_subcommand("simulate", "perceived video on a hold-type display");
  std::string sim_input, sim_motion, sim_out = "simulation";
  bool sim_estimate = false;
  sim->add_option("--input", sim_input, "input .y4m")->required();
  sim->add_option("--motion", sim_motion, "global motion dx,dy in pixels/frame");
  sim->add_flag("--estimate", sim_estimate, "estimate global motion by block matching");
  sim->add_option("--out-dir", sim_out, "output directory");

  // encode
  auto* enc = app.add_subcommand("encode", "single-shot compression (regular, or pre-compensated with --degradation)");
  std::string enc_input, enc_output, enc_deg, enc_diag, enc_mode = "psnr";
  int enc_theta = 25;
  std::optional<double> enc_beta;
  std::optional<std::size_t> enc_iters;
  CodecFlags enc_codec;
  enc->add_option("--input", enc_input)->required();
  enc->add_option("--output", enc_output, "bitstream path")->required();
  enc->add_option("--theta", enc_theta)->check(CLI::Range(0, 51));
  enc->add_option("--degradation", enc_deg, "run the ADMM pre-compensation for this degradation");
  enc->add_option("--beta", enc_beta, "fixed beta (default: schedule)");
  enc->add_option("--mode", enc_mode, "video beta mode: psnr or smooth");
  enc->add_option("--max-iters", enc_iters);
  enc->add_option("--diagnostics", enc_diag, "write ADMM diagnostics JSON here");
  enc_codec.add(enc);

  // decode
  auto* dec = app.add_subcommand("decode", "decode a builtin bitstream");
  std::string dec_input, dec_output;
  dec->add_option("--input", dec_input)->required();
  dec->add_option("--output", dec_output, ".pgm / .y4m / .f64")->required();

  // curves
  auto* cur = app.add_subcommand("curves", "BD-PSNR between two curve CSVs");
  std::string curve_a, curve_b, curve_out;
  cur->add_option("--a", curve_a, "curve CSV (bpp,psnr[,ssim,theta])")->required();
  cur->add_option("--b", curve_b, "reference curve CSV")->required();
  cur->add_option("--out", curve_out, "write JSON report here");

  // synth
  auto* syn = app.add_subcommand("synth", "synthetic textured image or panning video");
  std::size_t syn_w = 128, syn_h = 128, syn_t = 1;
  std::uint64_t syn_seed = 1;
  std::string syn_motion = "0,0", syn_out;
  syn->add_option("--width", syn_w);
  syn->add_option("--height", syn_h);
  syn->add_option("--frames", syn_t);
  syn->add_option("--motion", syn_motion, "integer pan dx,dy per frame");
  syn->add_option("--seed", syn_seed);
  syn->add_option("--output", syn_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(spec_path, input, degradation, theta_list, methods, beta, beta_auto, mode, margin, max_iters,
                     out_dir, run_codec, run);
    }
    if (*sim) {
      const auto video = read_signal(sim_input);
      Motion m;
      if (sim_estimate) {
        m = estimate_global_motion(video);
        std::printf("estimated motion: %g,%g\n", m.dx, m.dy);
      } else if (!sim_motion.empty()) {
        m = parse_motion(sim_motion);
      } else {
        throw Error("simulate: give --motion or --estimate");
      }
      const auto result = simulate_display(video, m);
      std::filesystem::create_directories(sim_out);
      write_y4m(video, std::filesystem::path(sim_out) / "displayed.y4m");
      write_y4m(result.perceived, std::filesystem::path(sim_out) / "perceived.y4m");
      write_y4m(result.difference, std::filesystem::path(sim_out) / "difference.y4m");
      return 0;
    }
    if (*enc) {
      const auto x = read_signal(enc_input);
      const auto params = enc_codec.params(enc_theta);
      CompressedBitstream stream;
      if (enc_deg.empty()) {
        stream = compress_decompress(x, params).stream;
      } else {
        const auto op = make_operator(load_json_arg(enc_deg), x.geometry());
        const std::size_t t = x.geometry().frames;
        AdmmConfig cfg = t > 1 ? AdmmConfig::video_defaults(t, parse_mode(enc_mode)) : AdmmConfig::image_defaults();
        cfg.beta = enc_beta;
        if (enc_iters) cfg.max_iters = *enc_iters;
        auto res = admm_run(x, *op, params, cfg);
        std::printf("status=%s iterations=%zu output_iteration=%zu\n", to_string(res.diagnostics.status),
                    res.diagnostics.iterations.size(), res.diagnostics.output_iteration);
        if (!enc_diag.empty()) std::ofstream(enc_diag) << to_json(res.diagnostics).dump(2) << "\n";
        stream = std::move(res.stream);
      }
      std::ofstream out(enc_output, std::ios::binary);
      out.write(reinterpret_cast<const char*>(stream.payload.data()), static_cast<std::streamsize>(stream.payload.size()));
      std::printf("bits=%zu bpp=%.6f\n", stream.bit_count,
                  static_cast<double>(stream.bit_count) / static_cast<double>(x.size()));
      return 0;
    }
    if (*dec) {
      const auto bytes = slurp(dec_input);
      const std::vector<std::uint8_t> payload(bytes.begin(), bytes.end());
      write_signal(builtin_decode(payload), dec_output);
      return 0;
    }
    if (*cur) {
      const auto a = curve_from_csv(slurp(curve_a), std::filesystem::path(curve_a).stem().string());
      const auto b = curve_from_csv(slurp(curve_b), std::filesystem::path(curve_b).stem().string());
      const auto report = to_json(compare_curves(a, b)).dump(2);
      std::printf("%s\n", report.c_str());
      if (!curve_out.empty()) std::ofstream(curve_out) << report << "\n";
      return 0;
    }
    if (*syn) {
      const Motion m = parse_motion(syn_motion);
      if (syn_t <= 1) {
        write_signal(textured_image(syn_w, syn_h, syn_seed), syn_out);
      } else {
        const auto extra_w = static_cast<std::size_t>(std::abs(m.dx)) * (syn_t - 1);
        const auto extra_h = static_cast<std::size_t>(std::abs(m.dy)) * (syn_t - 1);
        const auto texture = textured_image(syn_w + extra_w, syn_h + extra_h, syn_seed);
        write_signal(make_synthetic_pan(texture, m, syn_t, syn_w, syn_h), syn_out);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
