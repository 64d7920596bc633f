#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tilecast/color_space.hpp"

namespace tilecast {

inline constexpr int kBlockSize = 8;

// Square n x n block in row-major order.
template <typename T>
struct SquareBlock {
  int n = 0;
  std::vector<T> values;

  SquareBlock() = default;
  explicit SquareBlock(int size) : n(size), values(static_cast<std::size_t>(size) * size) {}
  SquareBlock(int size, std::vector<T> v) : n(size), values(std::move(v)) {}

  T& at(int row, int col) { return values[static_cast<std::size_t>(row) * n + col]; }
  const T& at(int row, int col) const { return values[static_cast<std::size_t>(row) * n + col]; }

  friend bool operator==(const SquareBlock&, const SquareBlock&) = default;
};

// Spatial samples, already centered (channel - 128).
struct SampleBlock : SquareBlock<double> {
  using SquareBlock::SquareBlock;
};

struct CoeffBlock : SquareBlock<double> {
  using SquareBlock::SquareBlock;
};

struct QuantBlock : SquareBlock<std::int32_t> {
  int step = 1;

  QuantBlock() = default;
  QuantBlock(int size, int s) : SquareBlock(size), step(s) {}
  QuantBlock(int size, int s, std::vector<std::int32_t> v) : SquareBlock(size, std::move(v)), step(s) {}

  friend bool operator==(const QuantBlock&, const QuantBlock&) = default;
};

struct ScanSequence {
  std::vector<std::int32_t> values;

  friend bool operator==(const ScanSequence&, const ScanSequence&) = default;
};

/// Orthonormal DCT-II: F(u) = c(u) * sum_i f(i) cos((i + 0.5) * pi * u / N),
/// c(0) = sqrt(1/N), c(u) = sqrt(2/N) otherwise.
std::vector<double> dct_1d(std::span<const double> signal);
std::vector<double> idct_1d(std::span<const double> coeffs);

// Rows then columns. Throws DimensionError when values.size() != n * n.
CoeffBlock dct_2d(const SampleBlock& block);
SampleBlock idct_2d(const CoeffBlock& block);

// q = F / step rounded half away from zero. Throws ParameterError for step < 1.
QuantBlock quantize(const CoeffBlock& block, int step);
CoeffBlock dequantize(const QuantBlock& block);

// Anti-diagonal scan (0,0) (0,1) (1,0) (2,0) (1,1) (0,2) ...; entry k of the
// result is the row-major index visited k-th.
const std::vector<int>& zigzag_order(int n);
ScanSequence zigzag(const QuantBlock& block);
QuantBlock unzigzag(const ScanSequence& seq, int n, int step = 1);

/// Lossless (level, run) token code. Each nonzero coefficient is written as
/// se(level) followed by ue(run of zeros before it); se(0) marks end of block.
/// Values must fit in int16. The result is zero-padded to a byte boundary.
std::vector<std::uint8_t> entropy_encode(const ScanSequence& seq);
ScanSequence entropy_decode(std::span<const std::uint8_t> bytes, int n);

// Frame container: 22-byte little-endian header (see docs/formats.md)
// followed by the entropy-coded payload.
struct EncodedFrame {
  static constexpr std::size_t kHeaderSize = 22;

  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint16_t step = 1;
  std::uint32_t frame_index = 0;
  std::uint64_t capture_ts_us = 0;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const;
  static EncodedFrame parse(std::span<const std::uint8_t> bytes);
  std::size_t byte_size() const { return kHeaderSize + payload.size(); }

  friend bool operator==(const EncodedFrame&, const EncodedFrame&) = default;
};

/// Y plane, then U and V (deinterleaved from the NV12 chroma plane), each cut
/// into 8x8 blocks in raster order. Planes whose size is not a multiple of 8
/// are padded by edge replication.
EncodedFrame encode_frame(const Nv12Image& image, int step, std::uint32_t frame_index,
                          std::uint64_t capture_ts_us);
Nv12Image decode_frame(const EncodedFrame& frame);

namespace reference {
EncodedFrame encode_frame(const Nv12Image& image, int step, std::uint32_t frame_index,
                          std::uint64_t capture_ts_us);
Nv12Image decode_frame(const EncodedFrame& frame);
}  // namespace reference

}  // namespace tilecast
