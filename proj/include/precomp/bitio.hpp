#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "precomp/error.hpp"

namespace precomp {

/// MSB-first bit writer with order-0 exp-Golomb helpers.
class BitWriter {
 public:
  void put_bit(bool b) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (b) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
  }

  void put_bits(std::uint64_t value, unsigned count) {
    for (unsigned i = count; i-- > 0;) put_bit((value >> i) & 1u);
  }

  /// Unsigned exp-Golomb: k+1 in binary, preceded by (bit length - 1) zeros.
  void put_ue(std::uint64_t k) {
    if (k >= (std::uint64_t{1} << 62)) throw Error("exp-Golomb value out of range");
    const std::uint64_t v = k + 1;
    const auto len = static_cast<unsigned>(std::bit_width(v));
    put_bits(0, len - 1);
    put_bits(v, len);
  }

  /// Signed exp-Golomb: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ...
  void put_se(std::int64_t k) {
    put_ue(k > 0 ? 2 * static_cast<std::uint64_t>(k) - 1 : 2 * static_cast<std::uint64_t>(-k));
  }

  void append(const BitWriter& other) {
    for (std::size_t i = 0; i < other.bits_; ++i) put_bit((other.bytes_[i / 8] >> (7 - i % 8)) & 1u);
  }

  std::size_t bit_count() const noexcept { return bits_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data, std::size_t bit_offset = 0)
      : data_(data), pos_(bit_offset) {}

  bool get_bit() {
    if (pos_ >= data_.size() * 8) throw FormatError("bitstream truncated");
    const bool b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return b;
  }

  std::uint64_t get_bits(unsigned count) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
    return v;
  }

  std::uint64_t get_ue() {
    unsigned zeros = 0;
    while (!get_bit()) {
      if (++zeros > 62) throw FormatError("corrupt exp-Golomb code");
    }
    const std::uint64_t rest = get_bits(zeros);
    return ((std::uint64_t{1} << zeros) | rest) - 1;
  }

  std::int64_t get_se() {
    const std::uint64_t k = get_ue();
    return (k & 1u) ? static_cast<std::int64_t>((k + 1) / 2) : -static_cast<std::int64_t>(k / 2);
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_;
};

}  // namespace precomp
