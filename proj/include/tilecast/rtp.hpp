#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace tilecast::rtp {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kFragmentHeaderSize = 4;
inline constexpr std::size_t kMaxFragmentData = 1400;
inline constexpr std::uint8_t kPayloadType = 96;
inline constexpr std::uint32_t kClockRate = 90000;

// RTP fixed header (no CSRCs, no extension) plus payload. The payload of a
// media packet is a 4-byte big-endian byte offset into the frame followed by
// at most kMaxFragmentData frame bytes.
struct Packet {
  bool marker = false;
  std::uint8_t payload_type = kPayloadType;
  std::uint16_t sequence = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;
  Bytes payload;

  Bytes serialize() const;
  // Throws DecodeError for short packets, version != 2, CSRCs or extensions.
  static Packet parse(std::span<const std::uint8_t> bytes);

  friend bool operator==(const Packet&, const Packet&) = default;
};

// 90 kHz timestamp of frame `frame_index` at `fps`, offset by `base`; wraps at 2^32.
std::uint32_t frame_timestamp(std::uint32_t base, std::uint64_t frame_index, double fps);

class Packetizer {
 public:
  Packetizer(std::uint32_t ssrc, std::uint16_t first_sequence, std::uint32_t timestamp_base, double fps);

  // Splits one serialized frame into fragments sharing a timestamp; marker on
  // the last fragment only. Sequence numbers continue across calls.
  std::vector<Packet> packetize(std::span<const std::uint8_t> frame, std::uint64_t frame_index);

  std::uint16_t next_sequence() const { return sequence_; }
  std::uint32_t ssrc() const { return ssrc_; }
  std::uint32_t timestamp_base() const { return timestamp_base_; }
  double fps() const { return fps_; }

 private:
  std::uint32_t ssrc_;
  std::uint16_t sequence_;
  std::uint32_t timestamp_base_;
  double fps_;
};

/// Reassembles frames from fragments that may arrive reordered. A frame is
/// emitted once its first fragment (offset 0) and marker fragment are present
/// and every sequence number between them has arrived. Completing a frame
/// discards older incomplete frames, which count as dropped.
class Depacketizer {
 public:
  static constexpr std::size_t kMaxPendingFrames = 32;

  // Returns the reassembled frame bytes when `packet` completes a frame.
  std::optional<Bytes> push(const Packet& packet);
  // Discards every pending frame, counting each as dropped.
  void flush();

  std::uint64_t frames_completed() const { return completed_; }
  std::uint64_t frames_dropped() const { return dropped_; }
  std::uint64_t late_packets() const { return late_; }
  std::size_t pending_frames() const { return pending_.size(); }

 private:
  struct Pending {
    std::map<std::uint16_t, Packet> by_sequence;
    std::optional<std::uint16_t> first_sequence;
    std::optional<std::uint16_t> marker_sequence;
    std::uint32_t arrival = 0;
  };
  std::optional<Bytes> try_complete(std::uint32_t timestamp);

  std::map<std::uint32_t, Pending> pending_;
  std::optional<std::uint32_t> last_completed_;
  std::uint32_t arrivals_ = 0;
  std::uint64_t completed_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t late_ = 0;
};

// ---- RTCP ----

inline constexpr std::uint8_t kSenderReportType = 200;
inline constexpr std::size_t kSenderReportSize = 28;

// Minimal sender report: header, SSRC, NTP timestamp, RTP timestamp, packet
// and octet counts; no report blocks.
struct SenderReport {
  std::uint32_t ssrc = 0;
  std::uint64_t ntp_timestamp = 0;  // 32.32 fixed point seconds since 1900
  std::uint32_t rtp_timestamp = 0;
  std::uint32_t packet_count = 0;
  std::uint32_t octet_count = 0;

  Bytes serialize() const;
  static SenderReport parse(std::span<const std::uint8_t> bytes);

  friend bool operator==(const SenderReport&, const SenderReport&) = default;
};

// Unix microseconds to NTP 32.32.
std::uint64_t unix_us_to_ntp(std::uint64_t unix_us);

}  // namespace tilecast::rtp
