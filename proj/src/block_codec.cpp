#include "tilecast/block_codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "tilecast/bitstream.hpp"
#include "tilecast/errors.hpp"

namespace tilecast {
namespace {

// basis[u * n + i] = c(u) * cos((i + 0.5) * pi * u / n)
std::vector<double> make_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    const double c = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i)
      basis[static_cast<std::size_t>(u) * n + i] =
          c * std::cos((i + 0.5) * std::numbers::pi * u / n);
  }
  return basis;
}

const std::vector<double>& basis_for(int n, std::vector<double>& scratch) {
  static const std::vector<double> b4 = make_basis(4);
  static const std::vector<double> b8 = make_basis(8);
  if (n == 4) return b4;
  if (n == 8) return b8;
  scratch = make_basis(n);
  return scratch;
}

void check_square(int n, std::size_t size) {
  if (n < 1 || size != static_cast<std::size_t>(n) * n)
    throw DimensionError("block is not " + std::to_string(n) + "x" + std::to_string(n));
}

std::vector<int> make_zigzag(int n) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n) * n);
  for (int d = 0; d < 2 * n - 1; ++d) {
    // Odd diagonals run top-right to bottom-left, even ones the other way.
    if (d % 2 == 1) {
      for (int row = std::max(0, d - n + 1); row <= std::min(d, n - 1); ++row)
        order.push_back(row * n + (d - row));
    } else {
      for (int row = std::min(d, n - 1); row >= std::max(0, d - n + 1); --row)
        order.push_back(row * n + (d - row));
    }
  }
  return order;
}

std::int32_t round_half_away(double v) {
  return static_cast<std::int32_t>(v >= 0 ? std::floor(v + 0.5) : -std::floor(-v + 0.5));
}

void write_tokens(BitWriter& out, std::span<const std::int32_t> values) {
  std::uint32_t run = 0;
  for (std::int32_t v : values) {
    if (v < std::numeric_limits<std::int16_t>::min() || v > std::numeric_limits<std::int16_t>::max())
      throw ParameterError("coefficient " + std::to_string(v) + " does not fit in int16");
    if (v == 0) {
      ++run;
      continue;
    }
    out.put_se(v);
    out.put_ue(run);
    run = 0;
  }
  out.put_se(0);
}

void read_tokens(BitReader& in, std::span<std::int32_t> out) {
  std::fill(out.begin(), out.end(), 0);
  std::size_t pos = 0;
  for (;;) {
    const std::size_t token_offset = in.byte_offset();
    const std::int32_t level = in.get_se();
    if (level == 0) return;
    if (level < std::numeric_limits<std::int16_t>::min() || level > std::numeric_limits<std::int16_t>::max())
      throw DecodeError("level out of int16 range", token_offset);
    const std::uint32_t run = in.get_ue();
    if (run >= out.size() || pos + run >= out.size())
      throw DecodeError("run overflows block", token_offset);
    pos += run;
    out[pos++] = level;
  }
}

// One image plane, padded by edge replication when read block-wise.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  int blocks_x() const { return (width + kBlockSize - 1) / kBlockSize; }
  int blocks_y() const { return (height + kBlockSize - 1) / kBlockSize; }
  int block_count() const { return blocks_x() * blocks_y(); }
};

std::array<Plane, 3> split_planes(const Nv12Image& img) {
  std::array<Plane, 3> planes;
  planes[0] = {img.width, img.height, img.y_plane};
  const int cw = img.width / 2;
  const int ch = img.height / 2;
  planes[1] = {cw, ch, std::vector<std::uint8_t>(static_cast<std::size_t>(cw) * ch)};
  planes[2] = {cw, ch, std::vector<std::uint8_t>(static_cast<std::size_t>(cw) * ch)};
  for (std::size_t i = 0; i < planes[1].data.size(); ++i) {
    planes[1].data[i] = img.uv_plane[2 * i];
    planes[2].data[i] = img.uv_plane[2 * i + 1];
  }
  return planes;
}

// Block b of the concatenated Y, U, V block lists.
struct BlockRef {
  int plane;
  int bx;
  int by;
};

BlockRef locate(const std::array<Plane, 3>& planes, int index) {
  for (int p = 0; p < 3; ++p) {
    const int count = planes[p].block_count();
    if (index < count) return {p, index % planes[p].blocks_x(), index / planes[p].blocks_x()};
    index -= count;
  }
  return {3, 0, 0};
}

int total_blocks(const std::array<Plane, 3>& planes) {
  return planes[0].block_count() + planes[1].block_count() + planes[2].block_count();
}

// Fixed-size 8x8 kernels for the frame paths. Same summation order as
// dct_2d/idct_2d, so results are bit-identical, just without heap traffic.
using Block8 = std::array<double, kBlockSize * kBlockSize>;

const std::array<double, kBlockSize * kBlockSize>& basis8() {
  static const auto table = [] {
    std::array<double, kBlockSize * kBlockSize> t{};
    const auto b = make_basis(kBlockSize);
    std::copy(b.begin(), b.end(), t.begin());
    return t;
  }();
  return table;
}

const std::array<int, kBlockSize * kBlockSize>& zigzag8() {
  static const auto table = [] {
    std::array<int, kBlockSize * kBlockSize> t{};
    const auto z = make_zigzag(kBlockSize);
    std::copy(z.begin(), z.end(), t.begin());
    return t;
  }();
  return table;
}

void forward8(const Block8& in, Block8& out) {
  constexpr int n = kBlockSize;
  const auto& basis = basis8();
  Block8 rows;
  for (int r = 0; r < n; ++r)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += basis[u * n + i] * in[r * n + i];
      rows[r * n + u] = acc;
    }
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += basis[v * n + r] * rows[r * n + u];
      out[v * n + u] = acc;
    }
}

void inverse8(const Block8& in, Block8& out) {
  constexpr int n = kBlockSize;
  const auto& basis = basis8();
  Block8 cols;
  for (int r = 0; r < n; ++r)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int v = 0; v < n; ++v) acc += basis[v * n + r] * in[v * n + u];
      cols[r * n + u] = acc;
    }
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int u = 0; u < n; ++u) acc += basis[u * n + i] * cols[r * n + u];
      out[r * n + i] = acc;
    }
}

void encode_block(const Plane& plane, int bx, int by, int step, BitWriter& out) {
  Block8 block;
  for (int r = 0; r < kBlockSize; ++r) {
    const int y = std::min(by * kBlockSize + r, plane.height - 1);
    for (int c = 0; c < kBlockSize; ++c) {
      const int x = std::min(bx * kBlockSize + c, plane.width - 1);
      block[r * kBlockSize + c] = static_cast<double>(plane.data[static_cast<std::size_t>(y) * plane.width + x]) - 128.0;
    }
  }
  Block8 coeffs;
  forward8(block, coeffs);
  const auto& order = zigzag8();
  std::array<std::int32_t, kBlockSize * kBlockSize> scan;
  for (std::size_t k = 0; k < scan.size(); ++k) scan[k] = round_half_away(coeffs[order[k]] / step);
  write_tokens(out, scan);
}

void decode_block(std::span<const std::int32_t> scan, int step, Plane& plane, int bx, int by) {
  const auto& order = zigzag8();
  Block8 coeffs;
  for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[order[k]] = static_cast<double>(scan[k]) * step;
  Block8 block;
  inverse8(coeffs, block);
  for (int r = 0; r < kBlockSize; ++r) {
    const int y = by * kBlockSize + r;
    if (y >= plane.height) break;
    for (int c = 0; c < kBlockSize; ++c) {
      const int x = bx * kBlockSize + c;
      if (x >= plane.width) break;
      const long v = std::lround(block[r * kBlockSize + c] + 128.0);
      plane.data[static_cast<std::size_t>(y) * plane.width + x] =
          static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
}

void check_encodable(const Nv12Image& image, int step) {
  if (step < 1 || step > 0xFFFF) throw ParameterError("quantization step must be in [1, 65535]");
  if (image.width <= 0 || image.height <= 0 || image.width % 2 || image.height % 2 ||
      image.width > 0xFFFF || image.height > 0xFFFF)
    throw DimensionError("frame dimensions must be even and fit in 16 bits");
  if (image.y_plane.size() != static_cast<std::size_t>(image.width) * image.height ||
      image.uv_plane.size() != image.y_plane.size() / 2)
    throw DimensionError("NV12 plane sizes do not match dimensions");
}

EncodedFrame make_header(const Nv12Image& image, int step, std::uint32_t index, std::uint64_t ts) {
  EncodedFrame f;
  f.width = static_cast<std::uint16_t>(image.width);
  f.height = static_cast<std::uint16_t>(image.height);
  f.step = static_cast<std::uint16_t>(step);
  f.frame_index = index;
  f.capture_ts_us = ts;
  return f;
}

std::array<Plane, 3> empty_planes(const EncodedFrame& frame) {
  if (frame.width == 0 || frame.height == 0 || frame.width % 2 || frame.height % 2)
    throw DecodeError("invalid frame dimensions", 0);
  if (frame.step == 0) throw DecodeError("zero quantization step", 4);
  const int cw = frame.width / 2;
  const int ch = frame.height / 2;
  return {Plane{frame.width, frame.height, std::vector<std::uint8_t>(static_cast<std::size_t>(frame.width) * frame.height)},
          Plane{cw, ch, std::vector<std::uint8_t>(static_cast<std::size_t>(cw) * ch)},
          Plane{cw, ch, std::vector<std::uint8_t>(static_cast<std::size_t>(cw) * ch)}};
}

// Serial token parse shared by both decoders; the payload is one bitstream.
std::vector<std::int32_t> read_all_scans(const EncodedFrame& frame, int blocks) {
  constexpr int kCoeffs = kBlockSize * kBlockSize;
  std::vector<std::int32_t> scans(static_cast<std::size_t>(blocks) * kCoeffs);
  BitReader in(frame.payload);
  for (int b = 0; b < blocks; ++b)
    read_tokens(in, std::span<std::int32_t>(scans).subspan(static_cast<std::size_t>(b) * kCoeffs, kCoeffs));
  if (in.bits_left() >= 8) throw DecodeError("payload has trailing data", in.byte_offset());
  while (in.bits_left() > 0)
    if (in.get_bit()) throw DecodeError("nonzero padding bits", frame.payload.size() - 1);
  return scans;
}

Nv12Image merge_planes(const EncodedFrame& frame, const std::array<Plane, 3>& planes) {
  Nv12Image out(frame.width, frame.height);
  out.y_plane = planes[0].data;
  for (std::size_t i = 0; i < planes[1].data.size(); ++i) {
    out.uv_plane[2 * i] = planes[1].data[i];
    out.uv_plane[2 * i + 1] = planes[2].data[i];
  }
  return out;
}

}  // namespace

std::vector<double> dct_1d(std::span<const double> signal) {
  const int n = static_cast<int>(signal.size());
  if (n == 0) throw DimensionError("dct_1d of an empty signal");
  std::vector<double> scratch;
  const auto& basis = basis_for(n, scratch);
  std::vector<double> out(n, 0.0);
  for (int u = 0; u < n; ++u) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += basis[static_cast<std::size_t>(u) * n + i] * signal[i];
    out[u] = acc;
  }
  return out;
}

std::vector<double> idct_1d(std::span<const double> coeffs) {
  const int n = static_cast<int>(coeffs.size());
  if (n == 0) throw DimensionError("idct_1d of an empty signal");
  std::vector<double> scratch;
  const auto& basis = basis_for(n, scratch);
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int u = 0; u < n; ++u) acc += basis[static_cast<std::size_t>(u) * n + i] * coeffs[u];
    out[i] = acc;
  }
  return out;
}

CoeffBlock dct_2d(const SampleBlock& block) {
  const int n = block.n;
  check_square(n, block.values.size());
  std::vector<double> scratch;
  const auto& basis = basis_for(n, scratch);
  std::vector<double> rows(block.values.size());
  for (int r = 0; r < n; ++r)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += basis[u * n + i] * block.at(r, i);
      rows[r * n + u] = acc;
    }
  CoeffBlock out(n);
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += basis[v * n + r] * rows[r * n + u];
      out.at(v, u) = acc;
    }
  return out;
}

SampleBlock idct_2d(const CoeffBlock& block) {
  const int n = block.n;
  check_square(n, block.values.size());
  std::vector<double> scratch;
  const auto& basis = basis_for(n, scratch);
  std::vector<double> cols(block.values.size());
  for (int r = 0; r < n; ++r)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int v = 0; v < n; ++v) acc += basis[v * n + r] * block.at(v, u);
      cols[r * n + u] = acc;
    }
  SampleBlock out(n);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int u = 0; u < n; ++u) acc += basis[u * n + i] * cols[r * n + u];
      out.at(r, i) = acc;
    }
  return out;
}

QuantBlock quantize(const CoeffBlock& block, int step) {
  if (step < 1) throw ParameterError("quantization step must be >= 1");
  check_square(block.n, block.values.size());
  QuantBlock out(block.n, step);
  for (std::size_t i = 0; i < block.values.size(); ++i)
    out.values[i] = round_half_away(block.values[i] / step);
  return out;
}

CoeffBlock dequantize(const QuantBlock& block) {
  if (block.step < 1) throw ParameterError("quantization step must be >= 1");
  check_square(block.n, block.values.size());
  CoeffBlock out(block.n);
  for (std::size_t i = 0; i < block.values.size(); ++i)
    out.values[i] = static_cast<double>(block.values[i]) * block.step;
  return out;
}

const std::vector<int>& zigzag_order(int n) {
  static const std::vector<int> z4 = make_zigzag(4);
  static const std::vector<int> z8 = make_zigzag(8);
  if (n == 4) return z4;
  if (n == 8) return z8;
  thread_local std::vector<int> other;
  other = make_zigzag(n);
  return other;
}

ScanSequence zigzag(const QuantBlock& block) {
  check_square(block.n, block.values.size());
  const auto& order = zigzag_order(block.n);
  ScanSequence seq;
  seq.values.reserve(order.size());
  for (int idx : order) seq.values.push_back(block.values[idx]);
  return seq;
}

QuantBlock unzigzag(const ScanSequence& seq, int n, int step) {
  check_square(n, seq.values.size());
  const auto& order = zigzag_order(n);
  QuantBlock out(n, step);
  for (std::size_t k = 0; k < order.size(); ++k) out.values[order[k]] = seq.values[k];
  return out;
}

std::vector<std::uint8_t> entropy_encode(const ScanSequence& seq) {
  BitWriter out;
  write_tokens(out, seq.values);
  return std::move(out).take_bytes();
}

ScanSequence entropy_decode(std::span<const std::uint8_t> bytes, int n) {
  if (n < 1) throw DimensionError("block size must be positive");
  ScanSequence seq;
  seq.values.resize(static_cast<std::size_t>(n) * n);
  BitReader in(bytes);
  read_tokens(in, seq.values);
  return seq;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> EncodedFrame::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  put_le(out, width);
  put_le(out, height);
  put_le(out, step);
  put_le(out, frame_index);
  put_le(out, capture_ts_us);
  put_le(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

EncodedFrame EncodedFrame::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw DecodeError("frame header truncated", bytes.size());
  EncodedFrame f;
  f.width = get_le<std::uint16_t>(bytes, 0);
  f.height = get_le<std::uint16_t>(bytes, 2);
  f.step = get_le<std::uint16_t>(bytes, 4);
  f.frame_index = get_le<std::uint32_t>(bytes, 6);
  f.capture_ts_us = get_le<std::uint64_t>(bytes, 10);
  const auto length = get_le<std::uint32_t>(bytes, 18);
  if (length != bytes.size() - kHeaderSize)
    throw DecodeError("payload length field " + std::to_string(length) + " does not match " +
                          std::to_string(bytes.size() - kHeaderSize) + " available bytes",
                      18);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return f;
}

EncodedFrame encode_frame(const Nv12Image& image, int step, std::uint32_t frame_index,
                          std::uint64_t capture_ts_us) {
  check_encodable(image, step);
  const auto planes = split_planes(image);
  const int blocks = total_blocks(planes);
  std::vector<BitWriter> parts(blocks);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const BlockRef ref = locate(planes, b);
    encode_block(planes[ref.plane], ref.bx, ref.by, step, parts[b]);
  }
  BitWriter all;
  for (const auto& part : parts) all.append(part);
  EncodedFrame out = make_header(image, step, frame_index, capture_ts_us);
  out.payload = std::move(all).take_bytes();
  return out;
}

Nv12Image decode_frame(const EncodedFrame& frame) {
  auto planes = empty_planes(frame);
  const int blocks = total_blocks(planes);
  const auto scans = read_all_scans(frame, blocks);
  constexpr std::size_t kCoeffs = kBlockSize * kBlockSize;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const BlockRef ref = locate(planes, b);
    decode_block(std::span<const std::int32_t>(scans).subspan(b * kCoeffs, kCoeffs), frame.step,
                 planes[ref.plane], ref.bx, ref.by);
  }
  return merge_planes(frame, planes);
}

namespace reference {

EncodedFrame encode_frame(const Nv12Image& image, int step, std::uint32_t frame_index,
                          std::uint64_t capture_ts_us) {
  check_encodable(image, step);
  const auto planes = split_planes(image);
  BitWriter all;
  for (int p = 0; p < 3; ++p)
    for (int by = 0; by < planes[p].blocks_y(); ++by)
      for (int bx = 0; bx < planes[p].blocks_x(); ++bx) encode_block(planes[p], bx, by, step, all);
  EncodedFrame out = make_header(image, step, frame_index, capture_ts_us);
  out.payload = std::move(all).take_bytes();
  return out;
}

Nv12Image decode_frame(const EncodedFrame& frame) {
  auto planes = empty_planes(frame);
  const auto scans = read_all_scans(frame, total_blocks(planes));
  constexpr std::size_t kCoeffs = kBlockSize * kBlockSize;
  std::size_t offset = 0;
  for (int p = 0; p < 3; ++p)
    for (int by = 0; by < planes[p].blocks_y(); ++by)
      for (int bx = 0; bx < planes[p].blocks_x(); ++bx) {
        decode_block(std::span<const std::int32_t>(scans).subspan(offset, kCoeffs), frame.step, planes[p], bx, by);
        offset += kCoeffs;
      }
  return merge_planes(frame, planes);
}

}  // namespace reference
}  // namespace tilecast
