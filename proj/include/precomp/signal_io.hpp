#pragma once

// PGM (P5, maxval 255), Y4M (mono or 4:2:0, luma only) and raw little-endian
// float64 with a JSON geometry sidecar.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "precomp/error.hpp"
#include "precomp/signal.hpp"

namespace precomp {

enum class FileFormat { pgm, y4m, raw_f64 };

inline FileFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return FileFormat::pgm;
  if (ext == ".y4m") return FileFormat::y4m;
  if (ext == ".f64" || ext == ".raw") return FileFormat::raw_f64;
  throw FormatError("cannot infer file format from extension '" + ext + "'");
}

inline std::uint8_t to_8bit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline double from_8bit(std::uint8_t k) { return static_cast<double>(k) / 255.0; }

namespace detail {

inline std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads the next whitespace-delimited PGM header token, skipping '#' comments.
inline std::string pgm_token(const std::vector<char>& data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) tok += data[pos++];
  if (tok.empty()) throw FormatError("truncated PGM header");
  return tok;
}

inline std::size_t parse_dim(const std::string& tok, const char* what) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &used);
  } catch (const std::exception&) {
    throw FormatError(std::string("bad ") + what + " '" + tok + "'");
  }
  if (used != tok.size() || v == 0) throw FormatError(std::string("bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

inline SignalBuffer read_pgm(const std::filesystem::path& path) {
  const auto data = detail::read_all(path);
  std::size_t pos = 0;
  if (detail::pgm_token(data, pos) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const std::size_t w = detail::parse_dim(detail::pgm_token(data, pos), "width");
  const std::size_t h = detail::parse_dim(detail::pgm_token(data, pos), "height");
  const std::size_t maxval = detail::parse_dim(detail::pgm_token(data, pos), "maxval");
  if (maxval != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
  ++pos;  // single whitespace after maxval
  if (data.size() < pos + w * h) throw FormatError(path.string() + ": pixel data shorter than header");
  if (data.size() > pos + w * h) throw FormatError(path.string() + ": trailing bytes after pixel data");
  SignalBuffer out(SignalGeometry(w, h, 1));
  for (std::size_t i = 0; i < w * h; ++i) out[i] = from_8bit(static_cast<std::uint8_t>(data[pos + i]));
  return out;
}

inline void write_pgm(const SignalBuffer& signal, const std::filesystem::path& path) {
  const auto& g = signal.geometry();
  if (g.frames != 1) throw GeometryError("PGM holds a single frame; got " + to_string(g));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << g.width << " " << g.height << "\n255\n";
  std::vector<char> bytes(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) bytes[i] = static_cast<char>(to_8bit(signal[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

enum class Y4mChroma { mono, c420 };

inline SignalBuffer read_y4m(const std::filesystem::path& path) {
  const auto data = detail::read_all(path);
  auto line_end = [&](std::size_t from) {
    const auto it = std::find(data.begin() + static_cast<std::ptrdiff_t>(from), data.end(), '\n');
    if (it == data.end()) throw FormatError(path.string() + ": unterminated Y4M header line");
    return static_cast<std::size_t>(it - data.begin());
  };

  std::size_t eol = line_end(0);
  std::istringstream header(std::string(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(eol)));
  std::string tok;
  header >> tok;
  if (tok != "YUV4MPEG2") throw FormatError(path.string() + ": missing YUV4MPEG2 signature");
  std::size_t w = 0, h = 0;
  std::string chroma = "420";
  while (header >> tok) {
    switch (tok[0]) {
      case 'W': w = detail::parse_dim(tok.substr(1), "width"); break;
      case 'H': h = detail::parse_dim(tok.substr(1), "height"); break;
      case 'C': chroma = tok.substr(1); break;
      default: break;  // F, I, A, X are irrelevant for luma processing
    }
  }
  if (w == 0 || h == 0) throw FormatError(path.string() + ": Y4M header lacks W or H");

  std::size_t chroma_bytes = 0;
  if (chroma == "mono") {
    chroma_bytes = 0;
  } else if (chroma == "420" || chroma == "420jpeg" || chroma == "420paldv" || chroma == "420mpeg2") {
    chroma_bytes = 2 * ((w + 1) / 2) * ((h + 1) / 2);
  } else {
    throw FormatError(path.string() + ": unsupported Y4M chroma 'C" + chroma + "'");
  }

  std::vector<double> samples;
  std::size_t frames = 0;
  std::size_t pos = eol + 1;
  while (pos < data.size()) {
    eol = line_end(pos);
    if (eol - pos < 5 || std::memcmp(&data[pos], "FRAME", 5) != 0) {
      throw FormatError(path.string() + ": expected FRAME marker");
    }
    pos = eol + 1;
    if (data.size() < pos + w * h + chroma_bytes) {
      throw FormatError(path.string() + ": truncated frame " + std::to_string(frames));
    }
    for (std::size_t i = 0; i < w * h; ++i) samples.push_back(from_8bit(static_cast<std::uint8_t>(data[pos + i])));
    pos += w * h + chroma_bytes;
    ++frames;
  }
  if (frames == 0) throw FormatError(path.string() + ": no frames");
  return SignalBuffer(SignalGeometry(w, h, frames), std::move(samples));
}

inline void write_y4m(const SignalBuffer& signal, const std::filesystem::path& path,
                      Y4mChroma chroma = Y4mChroma::mono) {
  const auto& g = signal.geometry();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "YUV4MPEG2 W" << g.width << " H" << g.height << " F60:1 Ip A1:1 "
      << (chroma == Y4mChroma::mono ? "Cmono" : "C420jpeg") << "\n";
  const std::size_t chroma_bytes = chroma == Y4mChroma::mono ? 0 : 2 * ((g.width + 1) / 2) * ((g.height + 1) / 2);
  const std::vector<char> neutral(chroma_bytes, static_cast<char>(128));
  std::vector<char> bytes(g.samples_per_frame());
  for (std::size_t k = 0; k < g.frames; ++k) {
    const auto f = signal.frame(k);
    for (std::size_t i = 0; i < f.size(); ++i) bytes[i] = static_cast<char>(to_8bit(f[i]));
    out << "FRAME\n";
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.write(neutral.data(), static_cast<std::streamsize>(neutral.size()));
  }
}

inline std::filesystem::path raw_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

/// Raw float64 samples (little-endian) plus `<path>.json` = {"width","height","frames"}.
inline SignalBuffer read_raw_f64(const std::filesystem::path& path) {
  std::ifstream side(raw_sidecar_path(path));
  if (!side) throw FormatError(path.string() + ": raw-f64 requires geometry sidecar " + raw_sidecar_path(path).string());
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad raw-f64 sidecar: ") + e.what());
  }
  const SignalGeometry g(j.at("width").get<std::size_t>(), j.at("height").get<std::size_t>(),
                         j.value("frames", std::size_t{1}));
  const auto data = detail::read_all(path);
  if (data.size() != g.total_samples() * 8) {
    throw FormatError(path.string() + ": expected " + std::to_string(g.total_samples() * 8) + " bytes, got " +
                      std::to_string(data.size()));
  }
  std::vector<double> samples(g.total_samples());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<std::uint8_t>(data[i * 8 + static_cast<std::size_t>(b)]);
    samples[i] = std::bit_cast<double>(bits);
  }
  return SignalBuffer(g, std::move(samples));
}

inline void write_raw_f64(const SignalBuffer& signal, const std::filesystem::path& path) {
  const auto& g = signal.geometry();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  std::vector<char> bytes(signal.size() * 8);
  for (std::size_t i = 0; i < signal.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(signal[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>(bits & 0xFF);
      bits >>= 8;
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream side(raw_sidecar_path(path));
  side << nlohmann::json{{"width", g.width}, {"height", g.height}, {"frames", g.frames}}.dump() << "\n";
}

inline SignalBuffer read_signal(const std::filesystem::path& path, FileFormat format) {
  switch (format) {
    case FileFormat::pgm: return read_pgm(path);
    case FileFormat::y4m: return read_y4m(path);
    case FileFormat::raw_f64: return read_raw_f64(path);
  }
  throw FormatError("unknown format");
}

inline SignalBuffer read_signal(const std::filesystem::path& path) { return read_signal(path, format_from_path(path)); }

inline void write_signal(const SignalBuffer& signal, const std::filesystem::path& path, FileFormat format) {
  switch (format) {
    case FileFormat::pgm: write_pgm(signal, path); return;
    case FileFormat::y4m: write_y4m(signal, path); return;
    case FileFormat::raw_f64: write_raw_f64(signal, path); return;
  }
}

inline void write_signal(const SignalBuffer& signal, const std::filesystem::path& path) {
  write_signal(signal, path, format_from_path(path));
}

}  // namespace precomp
