#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tilecast {

// MSB-first bit packer.
class BitWriter {
 public:
  void put_bit(bool bit);
  void put_bits(std::uint32_t value, int count);
  // Exp-Golomb codes: ue(k) writes k+1 in binary after floor(log2(k+1)) zeros;
  // se(v) maps v > 0 to 2v-1 and v <= 0 to -2v before ue.
  void put_ue(std::uint32_t value);
  void put_se(std::int32_t value);
  void append(const BitWriter& other);

  std::size_t bit_count() const { return bits_; }
  // Zero-padded to a whole byte.
  std::vector<std::uint8_t> take_bytes() &&;
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t bits_ = 0;
};

// Reads what BitWriter wrote. Running past the end throws DecodeError with the
// offending byte offset.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}

  bool get_bit();
  std::uint32_t get_bits(int count);
  std::uint32_t get_ue();
  std::int32_t get_se();

  std::size_t bit_position() const { return pos_; }
  std::size_t byte_offset() const { return pos_ / 8; }
  std::size_t bits_left() const { return data_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace tilecast
