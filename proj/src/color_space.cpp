#include "tilecast/color_space.hpp"

#include <algorithm>
#include <cmath>

#include "tilecast/errors.hpp"

namespace tilecast {
namespace {

// Coefficients are carried in thousandths so the arithmetic is exact and gray
// inputs land on 128 without floating-point drift.
constexpr int kScale = 1000;

int div_round_half_away(int num, int den) {
  return num >= 0 ? (num + den / 2) / den : -((-num + den / 2) / den);
}

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

void check_even(int w, int h) {
  if (w <= 0 || h <= 0 || w % 2 != 0 || h % 2 != 0)
    throw DimensionError("NV12 requires positive even dimensions, got " + std::to_string(w) +
                         "x" + std::to_string(h));
}

// Converts rows [2*pair, 2*pair + 2) of `frame` into `out`.
void pack_row_pair(const Frame& frame, Nv12Image& out, int pair) {
  const int w = frame.width;
  const int y0 = pair * 2;
  std::uint8_t* uv = &out.uv_plane[static_cast<std::size_t>(pair) * w];
  for (int x = 0; x < w; x += 2) {
    int usum = 0;
    int vsum = 0;
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const YuvPixel yuv = rgb_to_yuv(frame.at(x + dx, y0 + dy));
        out.y_plane[static_cast<std::size_t>(y0 + dy) * w + x + dx] = yuv.y;
        usum += yuv.u;
        vsum += yuv.v;
      }
    }
    uv[x] = static_cast<std::uint8_t>((usum + 2) / 4);
    uv[x + 1] = static_cast<std::uint8_t>((vsum + 2) / 4);
  }
}

void unpack_row_pair(const Nv12Image& image, Frame& out, int pair) {
  const int w = image.width;
  const std::uint8_t* uv = &image.uv_plane[static_cast<std::size_t>(pair) * w];
  for (int dy = 0; dy < 2; ++dy) {
    const int y = pair * 2 + dy;
    for (int x = 0; x < w; ++x) {
      const int cx = x & ~1;
      out.set(x, y, yuv_to_rgb({image.y_plane[static_cast<std::size_t>(y) * w + x], uv[cx], uv[cx + 1]}));
    }
  }
}

void gamma_range(std::uint8_t* data, std::size_t begin, std::size_t end) {
  const auto& lut = gamma_lut();
  for (std::size_t i = begin; i < end; ++i) data[i] = lut[data[i]];
}

}  // namespace

Nv12Image::Nv12Image(int w, int h)
    : width(w),
      height(h),
      y_plane(static_cast<std::size_t>(w) * h),
      uv_plane(static_cast<std::size_t>(w) * h / 2) {}

YuvPixel rgb_to_yuv(RgbPixel p) noexcept {
  const int r = p.r;
  const int g = p.g;
  const int b = p.b;
  const int y = 257 * r + 504 * g + 98 * b + 16 * kScale;
  const int v = 439 * r - 368 * g - 71 * b + 128 * kScale;
  const int u = -148 * r - 291 * g + 439 * b + 128 * kScale;
  return {clamp_u8(div_round_half_away(y, kScale)), clamp_u8(div_round_half_away(u, kScale)),
          clamp_u8(div_round_half_away(v, kScale))};
}

RgbPixel yuv_to_rgb(YuvPixel p) noexcept {
  const int y = 1164 * (p.y - 16);
  const int u = p.u - 128;
  const int v = p.v - 128;
  const int r = y + 1596 * v;
  const int g = y - 813 * v - 391 * u;
  const int b = y + 2018 * u;
  return {clamp_u8(div_round_half_away(r, kScale)), clamp_u8(div_round_half_away(g, kScale)),
          clamp_u8(div_round_half_away(b, kScale))};
}

double linear_to_gamma(double value) noexcept {
  if (value <= 0.0) return 0.0;
  if (value <= 0.0031308) return 12.92 * value;
  if (value < 1.0) return 1.055 * std::pow(value, 0.4166667) - 0.055;
  return std::pow(value, 0.45454545);
}

const std::vector<std::uint8_t>& gamma_lut() {
  static const std::vector<std::uint8_t> lut = [] {
    std::vector<std::uint8_t> t(256);
    for (int c = 0; c < 256; ++c) {
      const double g = linear_to_gamma(c / 255.0) * 255.0;
      t[c] = clamp_u8(static_cast<int>(std::lround(g)));
    }
    return t;
  }();
  return lut;
}

void apply_gamma(Frame& frame) {
  const std::size_t n = frame.rgb.size();
  const std::size_t chunk = 4096;
  const long chunks = static_cast<long>((n + chunk - 1) / chunk);
  std::uint8_t* data = frame.rgb.data();
#pragma omp parallel for schedule(static)
  for (long c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk;
    gamma_range(data, begin, std::min(n, begin + chunk));
  }
}

Nv12Image pack_nv12(const Frame& frame) {
  check_even(frame.width, frame.height);
  Nv12Image out(frame.width, frame.height);
  const int pairs = frame.height / 2;
#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < pairs; ++pair) pack_row_pair(frame, out, pair);
  return out;
}

Frame unpack_nv12(const Nv12Image& image) {
  check_even(image.width, image.height);
  Frame out(image.width, image.height);
  const int pairs = image.height / 2;
#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < pairs; ++pair) unpack_row_pair(image, out, pair);
  return out;
}

namespace reference {

void apply_gamma(Frame& frame) { gamma_range(frame.rgb.data(), 0, frame.rgb.size()); }

Nv12Image pack_nv12(const Frame& frame) {
  check_even(frame.width, frame.height);
  Nv12Image out(frame.width, frame.height);
  for (int pair = 0; pair < frame.height / 2; ++pair) pack_row_pair(frame, out, pair);
  return out;
}

Frame unpack_nv12(const Nv12Image& image) {
  check_even(image.width, image.height);
  Frame out(image.width, image.height);
  for (int pair = 0; pair < image.height / 2; ++pair) unpack_row_pair(image, out, pair);
  return out;
}

}  // namespace reference
}  // namespace tilecast
