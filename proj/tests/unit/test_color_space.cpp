#include <cmath>
#include <random>

#include "doctest.h"
#include "tilecast/color_space.hpp"
#include "tilecast/errors.hpp"

using namespace tilecast;

namespace {

// Straight floating-point evaluation of the conversion formulas.
YuvPixel oracle_rgb_to_yuv(int r, int g, int b) {
  auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); };
  return {q(0.257 * r + 0.504 * g + 0.098 * b + 16), q(-0.148 * r - 0.291 * g + 0.439 * b + 128),
          q(0.439 * r - 0.368 * g - 0.071 * b + 128)};
}

double oracle_gamma(double v) {
  if (v <= 0) return 0;
  if (v <= 0.0031308) return 12.92 * v;
  if (v < 1) return 1.055 * std::pow(v, 0.4166667) - 0.055;
  return std::pow(v, 0.45454545);
}

}  // namespace

TEST_CASE("rgb_to_yuv examples") {
  CHECK(rgb_to_yuv({0, 0, 0}) == YuvPixel{16, 128, 128});
  CHECK(rgb_to_yuv({255, 255, 255}) == YuvPixel{235, 128, 128});
  CHECK(rgb_to_yuv({255, 0, 0}) == YuvPixel{82, 90, 240});
}

TEST_CASE("rgb_to_yuv agrees with floating-point oracle on random pixels") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> d(0, 255);
  for (int i = 0; i < 20000; ++i) {
    const int r = d(rng), g = d(rng), b = d(rng);
    const auto got = rgb_to_yuv({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
    const auto want = oracle_rgb_to_yuv(r, g, b);
    // The oracle can land on the other side of .5 through binary rounding.
    CHECK(std::abs(got.y - want.y) <= 1);
    CHECK(std::abs(got.u - want.u) <= 1);
    CHECK(std::abs(got.v - want.v) <= 1);
  }
}

TEST_CASE("yuv_to_rgb examples") {
  CHECK(yuv_to_rgb({16, 128, 128}) == RgbPixel{0, 0, 0});
  const RgbPixel white = yuv_to_rgb({235, 128, 128});
  CHECK(white.r >= 254);
  CHECK(white.g >= 254);
  CHECK(white.b >= 254);
}

TEST_CASE("gray maps to neutral chroma and Y is monotone in brightness") {
  for (int c = 0; c < 256; ++c) {
    const auto p = static_cast<std::uint8_t>(c);
    const YuvPixel yuv = rgb_to_yuv({p, p, p});
    CHECK(yuv.u == 128);
    CHECK(yuv.v == 128);
  }
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> d(0, 200);
  for (int i = 0; i < 5000; ++i) {
    const int r = d(rng), g = d(rng), b = d(rng);
    const int delta = 1 + d(rng) % (255 - std::max({r, g, b}));
    const auto a = rgb_to_yuv({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
    const auto c = rgb_to_yuv({static_cast<std::uint8_t>(r + delta),
                               static_cast<std::uint8_t>(g + delta),
                               static_cast<std::uint8_t>(b + delta)});
    CHECK(c.y >= a.y);
  }
}

TEST_CASE("roundtrip stays within 3 per channel over the whole 8-bit cube") {
  int worst = 0;
  for (int r = 0; r < 256; ++r)
    for (int g = 0; g < 256; ++g)
      for (int b = 0; b < 256; ++b) {
        const RgbPixel p{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        const RgbPixel q = yuv_to_rgb(rgb_to_yuv(p));
        worst = std::max({worst, std::abs(q.r - r), std::abs(q.g - g), std::abs(q.b - b)});
      }
  CHECK(worst <= 3);
}

TEST_CASE("linear_to_gamma") {
  CHECK(linear_to_gamma(0.0) == 0.0);
  CHECK(linear_to_gamma(-0.5) == 0.0);
  CHECK(linear_to_gamma(1.0) == doctest::Approx(1.0));
  CHECK(std::abs(linear_to_gamma(0.5) - 0.73536) < 1e-4);

  const double knee = 0.0031308;
  CHECK(std::abs(linear_to_gamma(knee) - linear_to_gamma(std::nextafter(knee, 1.0))) < 1e-4);

  double prev = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double v = i / 10000.0;
    const double g = linear_to_gamma(v);
    CHECK(g >= prev);
    CHECK(std::abs(g - oracle_gamma(v)) < 1e-12);
    prev = g;
  }
}

TEST_CASE("pack_nv12 examples") {
  const Nv12Image black = pack_nv12(Frame(2, 2, {0, 0, 0}));
  CHECK(black.y_plane == std::vector<std::uint8_t>{16, 16, 16, 16});
  CHECK(black.uv_plane == std::vector<std::uint8_t>{128, 128});

  Frame ramp(4, 2);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 2; ++y) {
      const auto c = static_cast<std::uint8_t>(x * 60 + y * 20);
      ramp.set(x, y, {c, c, c});
    }
  const Nv12Image packed = pack_nv12(ramp);
  for (auto v : packed.uv_plane) CHECK(v == 128);

  CHECK_THROWS_AS(pack_nv12(Frame(3, 2)), DimensionError);
  CHECK_THROWS_AS(pack_nv12(Frame(4, 1)), DimensionError);
}

TEST_CASE("pack_nv12 averages chroma over 2x2 blocks") {
  Frame f(2, 2);
  f.set(0, 0, {255, 0, 0});
  f.set(1, 0, {0, 0, 255});
  f.set(0, 1, {0, 255, 0});
  f.set(1, 1, {0, 0, 0});
  int usum = 0, vsum = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      usum += rgb_to_yuv(f.at(x, y)).u;
      vsum += rgb_to_yuv(f.at(x, y)).v;
    }
  const Nv12Image img = pack_nv12(f);
  CHECK(img.uv_plane[0] == (usum + 2) / 4);
  CHECK(img.uv_plane[1] == (vsum + 2) / 4);
  CHECK(img.y_plane[1] == rgb_to_yuv({0, 0, 255}).y);
}

TEST_CASE("parallel kernels match the serial reference") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto [w, h] : {std::pair{2, 2}, std::pair{64, 48}, std::pair{130, 66}}) {
    Frame f(w, h);
    for (auto& b : f.rgb) b = static_cast<std::uint8_t>(d(rng));
    const Nv12Image a = pack_nv12(f);
    CHECK(a.byte_size() == static_cast<std::size_t>(w) * h * 3 / 2);
    CHECK(a == reference::pack_nv12(f));
    CHECK(unpack_nv12(a) == reference::unpack_nv12(a));
    Frame g1 = f, g2 = f;
    apply_gamma(g1);
    reference::apply_gamma(g2);
    CHECK(g1 == g2);
  }
}

TEST_CASE("gamma keeps black and white fixed") {
  CHECK(gamma_lut()[0] == 0);
  CHECK(gamma_lut()[255] == 255);
}
