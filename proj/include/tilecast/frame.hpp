#pragma once

#include <cstdint>
#include <vector>

namespace tilecast {

struct RgbPixel {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const RgbPixel&, const RgbPixel&) = default;
};

// Interleaved 8-bit RGB raster with the capture time of its content.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
  std::uint64_t capture_ts_us = 0;
  int source_id = -1;

  Frame() = default;
  Frame(int w, int h, RgbPixel fill = {});

  RgbPixel at(int x, int y) const {
    const std::uint8_t* p = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, RgbPixel c) {
    std::uint8_t* p = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  void fill_rect(int x, int y, int w, int h, RgbPixel c);

  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace tilecast
