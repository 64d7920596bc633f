#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tilecast/block_codec.hpp"
#include "tilecast/color_space.hpp"
#include "tilecast/errors.hpp"
#include "tilecast/media_sources.hpp"

using namespace tilecast;

namespace {

DeclaredSource pattern(std::string name, bool flagged = false) {
  DeclaredSource d;
  d.name = std::move(name);
  d.is_virtual = flagged;
  return d;
}

std::filesystem::path temp_path(const std::string& stem) {
  return std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(::getpid()) + ".tcrf");
}

}  // namespace

TEST_CASE("virtual device detection") {
  CHECK(is_virtual_device(pattern("OBS Virtual Camera")));
  CHECK(is_virtual_device(pattern("  VIRTUAL  ")));
  CHECK(is_virtual_device(pattern("desk cam", true)));
  CHECK_FALSE(is_virtual_device(pattern("desk cam")));
  CHECK_FALSE(is_virtual_device(pattern("virt cam")));
}

TEST_CASE("enumerate_sources filters virtual devices and numbers the rest") {
  const std::vector<DeclaredSource> declared{pattern("a"), pattern("Virtual b"), pattern("c"), pattern("d", true),
                                             pattern("e")};
  const auto out = enumerate_sources(declared);
  REQUIRE(out.size() == 3);
  CHECK(out[0].name == "a");
  CHECK(out[1].name == "c");
  CHECK(out[2].name == "e");
  for (int i = 0; i < 3; ++i) CHECK(out[i].id == i);
  CHECK(enumerate_sources(std::vector<DeclaredSource>{}).empty());

  auto bad_fps = pattern("x");
  bad_fps.fps = 0;
  CHECK_THROWS_AS(enumerate_sources(std::vector{bad_fps}), ConfigError);
  auto tiny = pattern("y");
  tiny.width = 8;
  CHECK_THROWS_AS(enumerate_sources(std::vector{tiny}), ConfigError);
}

TEST_CASE("pattern source is deterministic and timestamps follow the tick") {
  SourceDescriptor d{.id = 2, .name = "p", .native_width = 320, .native_height = 180, .fps = 30.0, .path = {}};
  PatternSource a(d), b(d);
  for (std::uint64_t tick : {0ull, 1ull, 29ull, 30ull, 12345ull}) {
    const auto fa = a.next_frame(tick);
    const auto fb = b.next_frame(tick);
    REQUIRE(fa);
    CHECK(*fa == *fb);
    CHECK(fa->width == 320);
    CHECK(fa->height == 180);
    CHECK(fa->source_id == 2);
    CHECK(fa->capture_ts_us == static_cast<std::uint64_t>(std::llround(tick * 1e6 / 30.0)));
    CHECK(decode_timestamp(*fa) == fa->capture_ts_us);
  }
  CHECK(a.next_frame(0)->rgb != a.next_frame(1)->rgb);

  SourceDescriptor other = d;
  other.id = 3;
  CHECK(PatternSource(other).next_frame(0)->rgb != a.next_frame(0)->rgb);

  SourceDescriptor small = d;
  small.native_width = 32;
  small.native_height = 32;
  CHECK(PatternSource(small).next_frame(5)->width == 32);

  SourceDescriptor broken = d;
  broken.fps = 0;
  CHECK_THROWS_AS(PatternSource{broken}, ConfigError);
}

TEST_CASE("timestamp strip roundtrip") {
  std::mt19937_64 rng(77);
  Frame f(80, 72, {90, 90, 90});
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t ts = rng();
    stamp_timestamp(f, ts);
    CHECK(decode_timestamp(f) == ts);
  }
  stamp_timestamp(f, 0);
  CHECK(decode_timestamp(f) == 0);
  stamp_timestamp(f, UINT64_MAX);
  CHECK(decode_timestamp(f) == UINT64_MAX);

  CHECK(has_strip_room(64, 72));
  CHECK_FALSE(has_strip_room(63, 72));
  CHECK_FALSE(has_strip_room(64, 71));
  Frame small(32, 32);
  CHECK_THROWS_AS(stamp_timestamp(small, 1), DimensionError);
  CHECK_THROWS_AS(decode_timestamp(small), DecodeError);

  Frame blank(64, 72, {128, 128, 128});
  CHECK_THROWS_AS(decode_timestamp(blank), DecodeError);

  // Cell geometry: row 0 is the sync byte, drawn as alternating 8px cells.
  stamp_timestamp(f, 0);
  CHECK(f.at(0, 0) == RgbPixel{255, 255, 255});
  CHECK(f.at(7, 7) == RgbPixel{255, 255, 255});
  CHECK(f.at(8, 0) == RgbPixel{0, 0, 0});
  CHECK(f.at(0, 8) == RgbPixel{0, 0, 0});
  CHECK(f.at(64, 0) == RgbPixel{90, 90, 90});
}

TEST_CASE("timestamp strip survives the codec") {
  std::mt19937_64 rng(78);
  SourceDescriptor d{.id = 0, .name = "p", .native_width = 640, .native_height = 352, .fps = 30.0, .path = {}};
  PatternSource src(d);
  for (int step : {1, 16, 64}) {
    for (int trial = 0; trial < 5; ++trial) {
      Frame f = *src.next_frame(trial * 7);
      const std::uint64_t ts = rng();
      stamp_timestamp(f, ts);
      const Frame back = unpack_nv12(decode_frame(encode_frame(pack_nv12(f), step, 0, ts)));
      CHECK(decode_timestamp(back) == ts);
    }
  }
}

TEST_CASE("raw clip files") {
  const auto path = temp_path("clip");
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.emplace_back(32, 16, RgbPixel{static_cast<std::uint8_t>(i * 50), 1, 2});
  write_raw_clip(path, {32, 16, 25}, frames);

  CHECK(std::filesystem::file_size(path) == kRawClipHeaderSize + 3 * 32 * 16 * 3);
  const RawClipHeader h = read_raw_clip_header(path);
  CHECK(h.width == 32);
  CHECK(h.height == 16);
  CHECK(h.fps == 25);

  SUBCASE("looping playback") {
    SourceDescriptor d{.id = 4, .name = "f", .kind = SourceKind::file, .fps = 25.0, .path = path, .loop = true};
    auto src = open_source(d);
    CHECK(src->descriptor().native_width == 32);
    CHECK(src->descriptor().native_height == 16);
    for (std::uint64_t t = 0; t < 7; ++t) {
      auto f = src->next_frame(t);
      REQUIRE(f);
      CHECK(f->rgb == frames[t % 3].rgb);
      CHECK(f->source_id == 4);
      CHECK(f->capture_ts_us == t * 40000);
    }
  }
  SUBCASE("play once then end of stream") {
    SourceDescriptor d{.id = 0, .name = "f", .kind = SourceKind::file, .fps = 25.0, .path = path, .loop = false};
    FileSource src(d);
    CHECK(src.frame_count() == 3);
    CHECK(src.next_frame(2));
    CHECK_FALSE(src.next_frame(3));
  }

  CHECK_THROWS_AS(write_raw_clip(path, {16, 16, 25}, frames), DimensionError);
  std::filesystem::remove(path);

  const auto junk = temp_path("junk");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "NOTACLIPHEADER!!";
  }
  CHECK_THROWS_AS(read_raw_clip_header(junk), ConfigError);
  std::filesystem::remove(junk);
  CHECK_THROWS_AS(read_raw_clip_header(temp_path("missing")), ConfigError);
}
