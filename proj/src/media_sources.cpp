#include "tilecast/media_sources.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>

#include "tilecast/color_space.hpp"
#include "tilecast/errors.hpp"

namespace tilecast {
namespace {

constexpr std::array<RgbPixel, 7> kBars = {{
    {235, 235, 235},
    {235, 235, 16},
    {16, 235, 235},
    {16, 235, 16},
    {235, 16, 235},
    {235, 16, 16},
    {16, 16, 235},
}};

constexpr RgbPixel kBlack{0, 0, 0};
constexpr RgbPixel kWhite{255, 255, 255};

int triangle(std::uint64_t t, int range) {
  if (range <= 0) return 0;
  const auto period = static_cast<std::uint64_t>(2 * range);
  const auto v = static_cast<int>(t % period);
  return v < range ? v : 2 * range - v;
}

std::string trim_lower(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(begin, end - begin + 1);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}

int cell_luma(const Frame& frame, int col, int row) {
  int sum = 0;
  for (int y = row * kStripCell; y < (row + 1) * kStripCell; ++y)
    for (int x = col * kStripCell; x < (col + 1) * kStripCell; ++x) sum += rgb_to_yuv(frame.at(x, y)).y;
  return sum / (kStripCell * kStripCell);
}

void paint_byte(Frame& frame, int row, std::uint8_t value) {
  for (int bit = 0; bit < 8; ++bit) {
    const bool on = (value >> (7 - bit)) & 1u;
    frame.fill_rect(bit * kStripCell, row * kStripCell, kStripCell, kStripCell, on ? kWhite : kBlack);
  }
}

}  // namespace

bool is_virtual_device(const DeclaredSource& declared) {
  return declared.is_virtual || trim_lower(declared.name).find("virtual") != std::string::npos;
}

std::vector<SourceDescriptor> enumerate_sources(std::span<const DeclaredSource> declared) {
  std::vector<SourceDescriptor> out;
  for (const auto& d : declared) {
    if (is_virtual_device(d)) continue;
    if (!(d.fps > 0)) throw ConfigError("source '" + d.name + "': fps must be positive");
    if (d.kind == SourceKind::pattern && (d.width < 16 || d.height < 16))
      throw ConfigError("source '" + d.name + "': dimensions must be at least 16x16");
    SourceDescriptor desc;
    desc.id = static_cast<int>(out.size());
    desc.name = d.name;
    desc.kind = d.kind;
    desc.native_width = d.width;
    desc.native_height = d.height;
    desc.fps = d.fps;
    desc.path = d.path;
    desc.loop = d.loop;
    out.push_back(std::move(desc));
  }
  return out;
}

PatternSource::PatternSource(SourceDescriptor desc) : desc_(std::move(desc)) {
  if (desc_.native_width < 16 || desc_.native_height < 16 || !(desc_.fps > 0))
    throw ConfigError("pattern source '" + desc_.name + "' has invalid geometry or rate");
}

std::optional<Frame> PatternSource::next_frame(std::uint64_t tick) {
  const int w = desc_.native_width;
  const int h = desc_.native_height;
  const auto id = static_cast<std::uint64_t>(desc_.id);
  Frame frame(w, h);
  frame.source_id = desc_.id;
  frame.capture_ts_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(tick) * 1e6 / desc_.fps));

  for (int x = 0; x < w; ++x)
    frame.set(x, 0, kBars[(static_cast<std::uint64_t>(x) * kBars.size() / w + id) % kBars.size()]);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * 3;
  for (int y = 1; y < h; ++y)
    std::copy_n(frame.rgb.begin(), row_bytes, frame.rgb.begin() + static_cast<std::ptrdiff_t>(y * row_bytes));
  const int side = std::max(4, std::min(w, h) / 5);
  const int sx = triangle(tick * 4 + id * 37, w - side);
  const int sy = triangle(tick * 3 + id * 23, h - side);
  const RgbPixel square{static_cast<std::uint8_t>(40 + (id * 70) % 180), static_cast<std::uint8_t>(200 - (id * 40) % 160),
                        static_cast<std::uint8_t>(60 + (id * 110) % 180)};
  frame.fill_rect(sx, sy, side, side, square);

  if (has_strip_room(w, h)) stamp_timestamp(frame, frame.capture_ts_us);
  return frame;
}

FileSource::FileSource(SourceDescriptor desc) : desc_(std::move(desc)) {
  const RawClipHeader header = read_raw_clip_header(desc_.path);
  desc_.native_width = static_cast<int>(header.width);
  desc_.native_height = static_cast<int>(header.height);
  if (header.fps > 0 && !(desc_.fps > 0)) desc_.fps = header.fps;
  const auto frame_bytes = static_cast<std::uintmax_t>(header.width) * header.height * 3;
  const auto size = std::filesystem::file_size(desc_.path);
  frame_count_ = frame_bytes == 0 ? 0 : (size - kRawClipHeaderSize) / frame_bytes;
}

std::optional<Frame> FileSource::next_frame(std::uint64_t tick) {
  if (frame_count_ == 0) return std::nullopt;
  if (tick >= frame_count_ && !desc_.loop) return std::nullopt;
  const std::uint64_t index = tick % frame_count_;
  Frame frame(desc_.native_width, desc_.native_height);
  frame.source_id = desc_.id;
  frame.capture_ts_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(tick) * 1e6 / desc_.fps));
  std::ifstream in(desc_.path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(kRawClipHeaderSize + index * frame.rgb.size()));
  in.read(reinterpret_cast<char*>(frame.rgb.data()), static_cast<std::streamsize>(frame.rgb.size()));
  if (!in) return std::nullopt;
  return frame;
}

std::unique_ptr<Source> open_source(const SourceDescriptor& desc) {
  if (desc.kind == SourceKind::file) return std::make_unique<FileSource>(desc);
  return std::make_unique<PatternSource>(desc);
}

void write_raw_clip(const std::filesystem::path& path, const RawClipHeader& header, std::span<const Frame> frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write clip " + path.string());
  out.write("TCRF", 4);
  write_u32(out, header.width);
  write_u32(out, header.height);
  write_u32(out, header.fps);
  for (const auto& f : frames) {
    if (f.width != static_cast<int>(header.width) || f.height != static_cast<int>(header.height))
      throw DimensionError("clip frame does not match header dimensions");
    out.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  }
}

RawClipHeader read_raw_clip_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint8_t raw[kRawClipHeaderSize] = {};
  in.read(reinterpret_cast<char*>(raw), sizeof raw);
  if (!in) throw ConfigError("cannot read clip header from " + path.string());
  if (raw[0] != 'T' || raw[1] != 'C' || raw[2] != 'R' || raw[3] != 'F')
    throw ConfigError(path.string() + " is not a raw clip (bad magic)");
  RawClipHeader h{read_u32(raw + 4), read_u32(raw + 8), read_u32(raw + 12)};
  if (h.width < 16 || h.height < 16) throw ConfigError(path.string() + ": clip dimensions below 16");
  return h;
}

bool has_strip_room(int width, int height) { return width >= kStripWidth && height >= kStripHeight; }

void stamp_timestamp(Frame& frame, std::uint64_t ts_us) {
  if (!has_strip_room(frame.width, frame.height)) throw DimensionError("frame too small for a timestamp strip");
  paint_byte(frame, 0, kStripSync);
  for (int i = 0; i < 8; ++i) paint_byte(frame, 1 + i, static_cast<std::uint8_t>(ts_us >> (8 * (7 - i))));
}

std::uint64_t decode_timestamp(const Frame& frame) {
  if (!has_strip_room(frame.width, frame.height)) throw DecodeError("frame too small for a timestamp strip", 0);
  auto read_byte = [&](int row) {
    std::uint8_t v = 0;
    for (int bit = 0; bit < 8; ++bit) v = static_cast<std::uint8_t>((v << 1) | (cell_luma(frame, bit, row) >= 128));
    return v;
  };
  if (read_byte(0) != kStripSync) throw DecodeError("timestamp strip sync pattern missing", 0);
  std::uint64_t ts = 0;
  for (int i = 0; i < 8; ++i) ts = (ts << 8) | read_byte(1 + i);
  return ts;
}

}  // namespace tilecast
