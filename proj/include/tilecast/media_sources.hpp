#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tilecast/frame.hpp"

namespace tilecast {

enum class SourceKind { pattern, file };

// A source as written in the `[sources]` config section.
struct DeclaredSource {
  std::string name;
  SourceKind kind = SourceKind::pattern;
  int width = 320;
  int height = 180;
  double fps = 30.0;
  std::filesystem::path path;  // file sources only
  bool loop = true;
  bool is_virtual = false;
};

struct SourceDescriptor {
  int id = 0;
  std::string name;
  SourceKind kind = SourceKind::pattern;
  int native_width = 0;
  int native_height = 0;
  double fps = 30.0;
  std::filesystem::path path;
  bool loop = true;
};

// True when the device should be skipped: flagged virtual, or its trimmed,
// lower-cased name contains "virtual".
bool is_virtual_device(const DeclaredSource& declared);

/// Drops virtual devices, keeps declaration order and numbers the survivors
/// 0..k-1. Throws ConfigError for fps <= 0 or a dimension below 16.
std::vector<SourceDescriptor> enumerate_sources(std::span<const DeclaredSource> declared);

class Source {
 public:
  virtual ~Source() = default;
  virtual const SourceDescriptor& descriptor() const = 0;
  // std::nullopt signals end of stream.
  virtual std::optional<Frame> next_frame(std::uint64_t tick) = 0;
};

// Color bars, a bouncing square and a timestamp strip, all a pure function of
// (id, tick). capture_ts_us = tick * 1e6 / fps.
class PatternSource final : public Source {
 public:
  explicit PatternSource(SourceDescriptor desc);
  const SourceDescriptor& descriptor() const override { return desc_; }
  std::optional<Frame> next_frame(std::uint64_t tick) override;

 private:
  SourceDescriptor desc_;
};

// Plays a raw clip; frame `tick` (modulo the clip length when looping).
class FileSource final : public Source {
 public:
  explicit FileSource(SourceDescriptor desc);
  const SourceDescriptor& descriptor() const override { return desc_; }
  std::optional<Frame> next_frame(std::uint64_t tick) override;

  std::uint64_t frame_count() const { return frame_count_; }

 private:
  SourceDescriptor desc_;
  std::uint64_t frame_count_ = 0;
};

// Fills in native dimensions for file sources from the clip header.
std::unique_ptr<Source> open_source(const SourceDescriptor& desc);

/// Runs another source on a thread of its own at the source's frame rate
/// and hands out its most recent frame, the way a capture device delivers
/// frames whether or not anyone is looking. next_frame ignores `tick`; the
/// first call waits (up to a second) for the first captured frame.
class CaptureThreadSource final : public Source {
 public:
  explicit CaptureThreadSource(std::unique_ptr<Source> inner);
  ~CaptureThreadSource() override;
  CaptureThreadSource(const CaptureThreadSource&) = delete;
  CaptureThreadSource& operator=(const CaptureThreadSource&) = delete;

  const SourceDescriptor& descriptor() const override { return inner_->descriptor(); }
  std::optional<Frame> next_frame(std::uint64_t tick) override;

  std::uint64_t frames_captured() const;

 private:
  void run();

  std::unique_ptr<Source> inner_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::optional<Frame> latest_;
  bool have_first_ = false;
  bool stopping_ = false;
  std::uint64_t captured_ = 0;
  std::thread thread_;
};

// ---- raw clip files ----
// 16-byte header: magic "TCRF", then width, height, fps as little-endian u32,
// followed by width*height*3 bytes per frame.
struct RawClipHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t fps = 0;
};

inline constexpr std::size_t kRawClipHeaderSize = 16;

void write_raw_clip(const std::filesystem::path& path, const RawClipHeader& header,
                    std::span<const Frame> frames);
RawClipHeader read_raw_clip_header(const std::filesystem::path& path);

// ---- timestamp strip ----
// 8x8-pixel black/white cells, 8 per row, anchored at the top-left corner:
// row 0 is the sync byte 0b10101010, rows 1..8 carry the 64-bit timestamp
// most significant byte first, MSB of each byte leftmost.
inline constexpr int kStripCell = 8;
inline constexpr int kStripWidth = 8 * kStripCell;
inline constexpr int kStripHeight = 9 * kStripCell;
inline constexpr std::uint8_t kStripSync = 0xAA;

bool has_strip_room(int width, int height);
void stamp_timestamp(Frame& frame, std::uint64_t ts_us);

/// Reads the strip back by thresholding each cell's mean luma at 128. Throws
/// DecodeError when the frame is too small or the sync row does not match.
std::uint64_t decode_timestamp(const Frame& frame);

}  // namespace tilecast
