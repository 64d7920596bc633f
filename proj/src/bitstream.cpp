#include "tilecast/bitstream.hpp"

#include <algorithm>
#include <bit>

#include "tilecast/errors.hpp"

namespace tilecast {

void BitWriter::put_bit(bool bit) {
  if (bits_ % 8 == 0) buf_.push_back(0);
  if (bit) buf_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void BitWriter::put_bits(std::uint32_t value, int count) {
  // Fill the partial last byte, then whole bytes, a chunk at a time.
  while (count > 0) {
    const int used = static_cast<int>(bits_ % 8);
    if (used == 0) buf_.push_back(0);
    const int take = std::min(8 - used, count);
    const auto chunk = static_cast<std::uint32_t>((value >> (count - take)) & ((1u << take) - 1u));
    buf_.back() |= static_cast<std::uint8_t>(chunk << (8 - used - take));
    bits_ += static_cast<std::size_t>(take);
    count -= take;
  }
}

void BitWriter::put_ue(std::uint32_t value) {
  const std::uint64_t v = static_cast<std::uint64_t>(value) + 1;
  const int len = std::bit_width(v);
  put_bits(0, len - 1);
  if (len > 32) {
    put_bit(true);
    put_bits(static_cast<std::uint32_t>(v), 32);
  } else {
    put_bits(static_cast<std::uint32_t>(v), len);
  }
}

void BitWriter::put_se(std::int32_t value) {
  const std::int64_t v = value;
  put_ue(static_cast<std::uint32_t>(v > 0 ? 2 * v - 1 : -2 * v));
}

void BitWriter::append(const BitWriter& other) {
  if (bits_ % 8 == 0) {
    buf_.insert(buf_.end(), other.buf_.begin(), other.buf_.end());
    bits_ += other.bits_;
    return;
  }
  const std::size_t whole = other.bits_ / 8;
  for (std::size_t i = 0; i < whole; ++i) put_bits(other.buf_[i], 8);
  if (const int rest = static_cast<int>(other.bits_ % 8); rest > 0)
    put_bits(static_cast<std::uint32_t>(other.buf_[whole] >> (8 - rest)), rest);
}

std::vector<std::uint8_t> BitWriter::take_bytes() && { return std::move(buf_); }

bool BitReader::get_bit() {
  if (pos_ >= data_.size() * 8) throw DecodeError("bitstream truncated", data_.size());
  const bool bit = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
  ++pos_;
  return bit;
}

std::uint32_t BitReader::get_bits(int count) {
  if (static_cast<std::size_t>(count) > bits_left()) {
    pos_ = data_.size() * 8;
    throw DecodeError("bitstream truncated", data_.size());
  }
  std::uint32_t v = 0;
  while (count > 0) {
    const int used = static_cast<int>(pos_ % 8);
    const int take = std::min(8 - used, count);
    const std::uint32_t byte = data_[pos_ / 8];
    v = (v << take) | ((byte >> (8 - used - take)) & ((1u << take) - 1u));
    pos_ += static_cast<std::size_t>(take);
    count -= take;
  }
  return v;
}

std::uint32_t BitReader::get_ue() {
  const std::size_t start = byte_offset();
  int zeros = 0;
  while (!get_bit()) {
    if (++zeros > 32) throw DecodeError("Exp-Golomb prefix too long", start);
  }
  const std::uint64_t v = (std::uint64_t{1} << zeros) | get_bits(zeros);
  if (v - 1 > 0xFFFFFFFFull) throw DecodeError("Exp-Golomb value overflow", start);
  return static_cast<std::uint32_t>(v - 1);
}

std::int32_t BitReader::get_se() {
  const std::uint32_t k = get_ue();
  const std::int64_t v = (k & 1u) ? (static_cast<std::int64_t>(k) + 1) / 2
                                  : -static_cast<std::int64_t>(k) / 2;
  return static_cast<std::int32_t>(v);
}

}  // namespace tilecast
