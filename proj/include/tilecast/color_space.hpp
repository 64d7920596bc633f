#pragma once

#include <cstdint>
#include <vector>

#include "tilecast/frame.hpp"

namespace tilecast {

struct YuvPixel {
  std::uint8_t y = 0;
  std::uint8_t u = 0;  // Cb
  std::uint8_t v = 0;  // Cr

  friend bool operator==(const YuvPixel&, const YuvPixel&) = default;
};

// Full-resolution luma plane followed by interleaved UVUV chroma at half
// resolution in both directions.
struct Nv12Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> y_plane;   // width * height
  std::vector<std::uint8_t> uv_plane;  // width * height / 2

  Nv12Image() = default;
  Nv12Image(int w, int h);

  std::size_t byte_size() const { return y_plane.size() + uv_plane.size(); }

  friend bool operator==(const Nv12Image&, const Nv12Image&) = default;
};

/// BT.601 studio-swing conversion with the three-decimal coefficients
/// Y = 0.257R + 0.504G + 0.098B + 16 (and likewise for Cb, Cr). Channels are
/// rounded half away from zero and clamped to [0, 255].
YuvPixel rgb_to_yuv(RgbPixel p) noexcept;

/// Inverse of rgb_to_yuv using the 1.164 / 1.596 / 0.813 / 0.391 / 2.018
/// coefficients. Not an exact inverse; roundtrip error is at most 3 per channel.
RgbPixel yuv_to_rgb(YuvPixel p) noexcept;

/// Linear to gamma-space transfer on a normalized component. Non-positive
/// inputs map to 0; values at or above 1 use a plain 1/2.2 power.
double linear_to_gamma(double value) noexcept;

// 256-entry table of linear_to_gamma over 8-bit channels.
const std::vector<std::uint8_t>& gamma_lut();

/// In-place gamma correction of every channel of `frame`.
void apply_gamma(Frame& frame);

/// Per-pixel rgb_to_yuv with 4:2:0 chroma taken as the rounded mean of each
/// 2x2 block. Throws DimensionError unless width and height are even.
Nv12Image pack_nv12(const Frame& frame);

/// Expands NV12 back to RGB, replicating each chroma sample over its 2x2 block.
Frame unpack_nv12(const Nv12Image& image);

// Serial versions of the parallel kernels above. They produce identical
// output and exist so tests and the benchmark have a fixed baseline.
namespace reference {
void apply_gamma(Frame& frame);
Nv12Image pack_nv12(const Frame& frame);
Frame unpack_nv12(const Nv12Image& image);
}  // namespace reference

}  // namespace tilecast
