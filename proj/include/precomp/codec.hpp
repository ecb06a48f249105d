#pragma once

// CompressDecompress_theta: the black-box codec used by the v-update.
//
// Builtin bitstream ("PCC1", version 1), all multi-byte fields as noted:
//
//   bytes 0-3   magic "PCC1"
//   byte  4     version (1)
//   varint      width   (LEB128, 7 bits per byte, low group first)
//   varint      height
//   varint      frames
//   byte        theta (0..51)
//   byte        block size N_b
//   ceil(T/8)   frame mode flags, frame k at bit (k % 8) of byte k / 8
//               (LSB first); 1 = difference from previous decoded frame
//   entropy payload, MSB-first bits, per frame, blocks in raster order:
//     se(dc - previous block dc)      dc prediction resets every frame
//     ue(n)                           nonzero AC count in zigzag order
//     n x { ue(zero run), ue(2*(|level|-1) + (level < 0)) }
//   zero bits up to the next byte boundary
//
// Quantizer step: delta(theta) = (1/255) * 2^((theta - 4) / 6).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "precomp/bitio.hpp"
#include "precomp/dct.hpp"
#include "precomp/error.hpp"
#include "precomp/signal.hpp"

namespace precomp {

enum class CodecBackendKind { builtin, external };

struct CodecParams {
  int theta = 25;
  std::size_t block_size = 8;
  CodecBackendKind backend = CodecBackendKind::builtin;
  /// External only: shell command with {input}, {bitstream}, {output}, {qp}.
  std::string command_template;
  double timeout_seconds = 600.0;
};

struct CompressedBitstream {
  std::vector<std::uint8_t> payload;
  std::size_t bit_count = 0;  ///< always 8 * payload.size()
  CodecParams params;
};

struct CodecResult {
  SignalBuffer decompressed;
  CompressedBitstream stream;
};

enum class FrameMode : std::uint8_t { intra = 0, difference = 1 };

/// Per-block rate accounting of one builtin encode.
struct EncodeReport {
  std::size_t header_bits = 0;   ///< fixed header plus mode flags
  std::size_t padding_bits = 0;  ///< trailing zero bits
  std::vector<FrameMode> modes;
  std::vector<std::vector<std::size_t>> block_bits;  ///< [frame][block]
};

inline constexpr std::array<std::uint8_t, 4> kBitstreamMagic{'P', 'C', 'C', '1'};
inline constexpr std::uint8_t kBitstreamVersion = 1;

inline void check_theta(int theta) {
  if (theta < 0 || theta > 51) throw Error("theta must be in [0, 51], got " + std::to_string(theta));
}

inline double quant_step(int theta) {
  check_theta(theta);
  return std::exp2((theta - 4) / 6.0) / 255.0;
}

namespace detail {

inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  do {
    std::uint8_t b = v & 0x7F;
    v >>= 7;
    if (v) b |= 0x80;
    out.push_back(b);
  } while (v);
}

inline std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (unsigned shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) throw FormatError("bitstream header truncated");
    const std::uint8_t b = in[pos++];
    v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
    if (!(b & 0x80)) return v;
  }
  throw FormatError("bitstream varint too long");
}

// Quantizes and entropy-codes one frame-shaped plane; returns the plane as the
// decoder will reconstruct it (before adding any prediction).
class PlaneCoder {
 public:
  PlaneCoder(std::size_t block_size, double step)
      : n_(block_size), step_(step), dct_(block_size), zigzag_(zigzag_order(block_size)),
        block_(n_ * n_), coeff_(n_ * n_) {}

  SignalBuffer encode(const SignalBuffer& plane, BitWriter& bits, std::vector<std::size_t>& block_bits) {
    const auto& g = plane.geometry();
    const BlockGrid grid(g, n_);
    SignalBuffer recon(g);
    std::vector<std::int64_t> q(n_ * n_);
    std::int64_t dc_pred = 0;
    block_bits.clear();
    for (std::size_t b = 0; b < grid.block_count(); ++b) {
      const BlockRect r = grid.rect(b);
      // Replicate-pad edge blocks.
      for (std::size_t y = 0; y < n_; ++y) {
        for (std::size_t x = 0; x < n_; ++x) {
          block_[y * n_ + x] = plane.at(0, r.y0 + std::min(y, r.height - 1), r.x0 + std::min(x, r.width - 1));
        }
      }
      dct_.forward(block_, coeff_);
      for (std::size_t i = 0; i < n_ * n_; ++i) {
        const double level = coeff_[i] / step_;
        if (!(std::abs(level) < 4.0e15)) throw Error("builtin codec: coefficient out of quantizer range");
        q[i] = static_cast<std::int64_t>(std::round(level));
      }
      const std::size_t start = bits.bit_count();
      write_block(q, dc_pred, bits);
      block_bits.push_back(bits.bit_count() - start);
      dc_pred = q[0];
      reconstruct(q, recon, r);
    }
    return recon;
  }

  SignalBuffer decode(const SignalGeometry& g, BitReader& bits) {
    const BlockGrid grid(g, n_);
    SignalBuffer recon(g);
    std::vector<std::int64_t> q(n_ * n_);
    std::int64_t dc_pred = 0;
    for (std::size_t b = 0; b < grid.block_count(); ++b) {
      read_block(q, dc_pred, bits);
      dc_pred = q[0];
      reconstruct(q, recon, grid.rect(b));
    }
    return recon;
  }

 private:
  void write_block(const std::vector<std::int64_t>& q, std::int64_t dc_pred, BitWriter& bits) const {
    bits.put_se(q[0] - dc_pred);
    std::size_t nonzero = 0;
    for (std::size_t i = 1; i < zigzag_.size(); ++i) nonzero += q[zigzag_[i]] != 0;
    bits.put_ue(nonzero);
    std::uint64_t run = 0;
    for (std::size_t i = 1; i < zigzag_.size(); ++i) {
      const std::int64_t level = q[zigzag_[i]];
      if (level == 0) {
        ++run;
        continue;
      }
      bits.put_ue(run);
      const auto mag = static_cast<std::uint64_t>(level < 0 ? -level : level);
      bits.put_ue(2 * (mag - 1) + (level < 0 ? 1 : 0));
      run = 0;
    }
  }

  void read_block(std::vector<std::int64_t>& q, std::int64_t dc_pred, BitReader& bits) const {
    std::ranges::fill(q, 0);
    q[0] = dc_pred + bits.get_se();
    const std::uint64_t nonzero = bits.get_ue();
    if (nonzero > zigzag_.size() - 1) throw FormatError("corrupt block: too many coefficients");
    std::size_t pos = 1;
    for (std::uint64_t k = 0; k < nonzero; ++k) {
      const std::uint64_t run = bits.get_ue();
      if (run > zigzag_.size() - 1 - pos) throw FormatError("corrupt block: run past end");
      pos += run;
      const std::uint64_t code = bits.get_ue();
      const auto mag = static_cast<std::int64_t>(code / 2 + 1);
      q[zigzag_[pos]] = (code & 1u) ? -mag : mag;
      ++pos;
    }
  }

  void reconstruct(const std::vector<std::int64_t>& q, SignalBuffer& recon, const BlockRect& r) {
    for (std::size_t i = 0; i < n_ * n_; ++i) coeff_[i] = static_cast<double>(q[i]) * step_;
    dct_.inverse(coeff_, block_);
    for (std::size_t y = 0; y < r.height; ++y) {
      for (std::size_t x = 0; x < r.width; ++x) recon.at(0, r.y0 + y, r.x0 + x) = block_[y * n_ + x];
    }
  }

  std::size_t n_;
  double step_;
  BlockDct dct_;
  std::vector<std::size_t> zigzag_;
  std::vector<double> block_;
  std::vector<double> coeff_;
};

}  // namespace detail

/// Block-DCT encoder. Accepts any real input; nothing is clipped.
inline CompressedBitstream builtin_encode(const SignalBuffer& signal, const CodecParams& params,
                                          EncodeReport* report = nullptr) {
  check_theta(params.theta);
  if (params.block_size < 2 || params.block_size > 64) throw Error("block size must be in [2, 64]");
  const auto& g = signal.geometry();

  std::vector<std::uint8_t> out(kBitstreamMagic.begin(), kBitstreamMagic.end());
  out.push_back(kBitstreamVersion);
  detail::put_varint(out, g.width);
  detail::put_varint(out, g.height);
  detail::put_varint(out, g.frames);
  out.push_back(static_cast<std::uint8_t>(params.theta));
  out.push_back(static_cast<std::uint8_t>(params.block_size));
  const std::size_t flags_at = out.size();
  out.resize(out.size() + (g.frames + 7) / 8, 0);

  detail::PlaneCoder coder(params.block_size, quant_step(params.theta));
  BitWriter payload;
  EncodeReport rep;
  SignalBuffer previous;
  for (std::size_t k = 0; k < g.frames; ++k) {
    const SignalBuffer frame = signal.extract_frame(k);
    BitWriter intra_bits;
    std::vector<std::size_t> intra_blocks;
    SignalBuffer recon = coder.encode(frame, intra_bits, intra_blocks);
    FrameMode mode = FrameMode::intra;
    const BitWriter* chosen = &intra_bits;
    std::vector<std::size_t>* chosen_blocks = &intra_blocks;

    BitWriter diff_bits;
    std::vector<std::size_t> diff_blocks;
    if (k > 0) {
      SignalBuffer diff_recon = coder.encode(frame - previous, diff_bits, diff_blocks);
      if (diff_bits.bit_count() < intra_bits.bit_count()) {
        mode = FrameMode::difference;
        chosen = &diff_bits;
        chosen_blocks = &diff_blocks;
        recon = previous + diff_recon;
      }
    }
    if (mode == FrameMode::difference) out[flags_at + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    payload.append(*chosen);
    rep.modes.push_back(mode);
    rep.block_bits.push_back(std::move(*chosen_blocks));
    previous = std::move(recon);
  }

  rep.header_bits = out.size() * 8;
  rep.padding_bits = payload.bytes().size() * 8 - payload.bit_count();
  out.insert(out.end(), payload.bytes().begin(), payload.bytes().end());
  if (report) *report = std::move(rep);

  CompressedBitstream stream;
  stream.bit_count = out.size() * 8;
  stream.payload = std::move(out);
  stream.params = params;
  stream.params.backend = CodecBackendKind::builtin;
  return stream;
}

/// Standalone decoder: needs nothing but the bytes.
inline SignalBuffer builtin_decode(std::span<const std::uint8_t> data) {
  if (data.size() < 5 || !std::equal(kBitstreamMagic.begin(), kBitstreamMagic.end(), data.begin())) {
    throw FormatError("not a PCC1 bitstream (bad magic)");
  }
  if (data[4] != kBitstreamVersion) throw FormatError("unsupported bitstream version " + std::to_string(data[4]));
  std::size_t pos = 5;
  const auto w = detail::get_varint(data, pos);
  const auto h = detail::get_varint(data, pos);
  const auto t = detail::get_varint(data, pos);
  if (w == 0 || h == 0 || t == 0 || w > (1u << 20) || h > (1u << 20) || t > (1u << 24)) {
    throw FormatError("bitstream geometry out of range");
  }
  if (pos + 2 > data.size()) throw FormatError("bitstream header truncated");
  const int theta = data[pos++];
  const std::size_t block = data[pos++];
  if (theta > 51 || block < 2 || block > 64) throw FormatError("bitstream parameters out of range");
  const std::size_t flags_at = pos;
  pos += (t + 7) / 8;
  if (pos > data.size()) throw FormatError("bitstream header truncated");

  const SignalGeometry g(w, h, t);
  detail::PlaneCoder coder(block, quant_step(theta));
  BitReader bits(data, pos * 8);
  SignalBuffer out(g);
  SignalBuffer previous;
  for (std::size_t k = 0; k < t; ++k) {
    const bool diff = (data[flags_at + k / 8] >> (k % 8)) & 1u;
    if (diff && k == 0) throw FormatError("first frame cannot be difference-coded");
    SignalBuffer recon = coder.decode(g.frame_geometry(), bits);
    if (diff) recon = previous + recon;
    out.place_frame(k, recon);
    previous = std::move(recon);
  }
  if (bits.remaining() >= 8) throw FormatError("trailing bytes after bitstream payload");
  return out;
}

inline SignalBuffer builtin_decode(const CompressedBitstream& stream) { return builtin_decode(stream.payload); }

}  // namespace precomp
