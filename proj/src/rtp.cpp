#include "tilecast/rtp.hpp"

#include <cmath>

#include "tilecast/errors.hpp"

namespace tilecast::rtp {
namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

// True when timestamp a is strictly older than b, modulo 2^32.
bool older(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }

}  // namespace

Bytes Packet::serialize() const {
  Bytes out;
  out.reserve(kHeaderSize + payload.size());
  out.push_back(0x80);  // V=2, P=0, X=0, CC=0
  out.push_back(static_cast<std::uint8_t>((marker ? 0x80 : 0x00) | (payload_type & 0x7F)));
  put_u16(out, sequence);
  put_u32(out, timestamp);
  put_u32(out, ssrc);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Packet Packet::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw DecodeError("RTP packet shorter than its header", bytes.size());
  if ((bytes[0] >> 6) != 2) throw DecodeError("RTP version is not 2", 0);
  if (bytes[0] & 0x3F) throw DecodeError("RTP padding, extension or CSRCs are not supported", 0);
  Packet p;
  p.marker = (bytes[1] & 0x80) != 0;
  p.payload_type = bytes[1] & 0x7F;
  p.sequence = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
  p.timestamp = get_u32(bytes, 4);
  p.ssrc = get_u32(bytes, 8);
  p.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return p;
}

std::uint32_t frame_timestamp(std::uint32_t base, std::uint64_t frame_index, double fps) {
  const auto ticks = static_cast<std::uint64_t>(std::llround(static_cast<double>(frame_index) * kClockRate / fps));
  return base + static_cast<std::uint32_t>(ticks);
}

Packetizer::Packetizer(std::uint32_t ssrc, std::uint16_t first_sequence, std::uint32_t timestamp_base, double fps)
    : ssrc_(ssrc), sequence_(first_sequence), timestamp_base_(timestamp_base), fps_(fps) {
  if (!(fps > 0)) throw ParameterError("packetizer fps must be positive");
}

std::vector<Packet> Packetizer::packetize(std::span<const std::uint8_t> frame, std::uint64_t frame_index) {
  const std::uint32_t ts = frame_timestamp(timestamp_base_, frame_index, fps_);
  const std::size_t count = frame.empty() ? 1 : (frame.size() + kMaxFragmentData - 1) / kMaxFragmentData;
  std::vector<Packet> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Packet& p = out[i];
    const std::size_t offset = i * kMaxFragmentData;
    const std::size_t len = std::min(kMaxFragmentData, frame.size() - offset);
    p.sequence = sequence_++;
    p.timestamp = ts;
    p.ssrc = ssrc_;
    p.marker = i + 1 == count;
    p.payload.reserve(kFragmentHeaderSize + len);
    put_u32(p.payload, static_cast<std::uint32_t>(offset));
    p.payload.insert(p.payload.end(), frame.begin() + offset, frame.begin() + offset + len);
  }
  return out;
}

std::optional<Bytes> Depacketizer::push(const Packet& packet) {
  if (packet.payload.size() < kFragmentHeaderSize) return std::nullopt;
  if (last_completed_ && !older(*last_completed_, packet.timestamp)) {
    ++late_;
    return std::nullopt;
  }
  Pending& frame = pending_[packet.timestamp];
  if (frame.by_sequence.empty()) frame.arrival = arrivals_++;
  if (get_u32(packet.payload, 0) == 0) frame.first_sequence = packet.sequence;
  if (packet.marker) frame.marker_sequence = packet.sequence;
  frame.by_sequence.emplace(packet.sequence, packet);
  if (auto done = try_complete(packet.timestamp)) return done;
  // Bound memory when markers keep getting lost: evict the oldest arrival.
  while (pending_.size() > kMaxPendingFrames) {
    auto oldest = pending_.begin();
    for (auto it = pending_.begin(); it != pending_.end(); ++it)
      if (it->second.arrival < oldest->second.arrival) oldest = it;
    pending_.erase(oldest);
    ++dropped_;
  }
  return std::nullopt;
}

std::optional<Bytes> Depacketizer::try_complete(std::uint32_t timestamp) {
  Pending& frame = pending_.at(timestamp);
  if (!frame.first_sequence || !frame.marker_sequence) return std::nullopt;
  const std::uint16_t span = static_cast<std::uint16_t>(*frame.marker_sequence - *frame.first_sequence);
  if (frame.by_sequence.size() != std::size_t{span} + 1) return std::nullopt;

  Bytes out;
  bool consistent = true;
  for (std::uint16_t k = 0; k <= span && consistent; ++k) {
    const auto it = frame.by_sequence.find(static_cast<std::uint16_t>(*frame.first_sequence + k));
    if (it == frame.by_sequence.end() || get_u32(it->second.payload, 0) != out.size()) {
      consistent = false;
      break;
    }
    out.insert(out.end(), it->second.payload.begin() + kFragmentHeaderSize, it->second.payload.end());
    if (k == span) break;  // span may be 65535; avoid wrapping the loop counter
  }
  if (!consistent) {
    // Duplicates or a foreign fragment sharing the timestamp: give up on it.
    pending_.erase(timestamp);
    ++dropped_;
    return std::nullopt;
  }

  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->first != timestamp && older(it->first, timestamp)) {
      it = pending_.erase(it);
      ++dropped_;
    } else {
      ++it;
    }
  }
  pending_.erase(timestamp);
  last_completed_ = timestamp;
  ++completed_;
  return out;
}

void Depacketizer::flush() {
  dropped_ += pending_.size();
  pending_.clear();
}

Bytes SenderReport::serialize() const {
  Bytes out;
  out.reserve(kSenderReportSize);
  out.push_back(0x80);  // V=2, P=0, RC=0
  out.push_back(kSenderReportType);
  put_u16(out, static_cast<std::uint16_t>(kSenderReportSize / 4 - 1));
  put_u32(out, ssrc);
  put_u32(out, static_cast<std::uint32_t>(ntp_timestamp >> 32));
  put_u32(out, static_cast<std::uint32_t>(ntp_timestamp));
  put_u32(out, rtp_timestamp);
  put_u32(out, packet_count);
  put_u32(out, octet_count);
  return out;
}

SenderReport SenderReport::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSenderReportSize) throw DecodeError("RTCP sender report too short", bytes.size());
  if ((bytes[0] >> 6) != 2 || bytes[1] != kSenderReportType) throw DecodeError("not an RTCP sender report", 0);
  const std::size_t words = (std::size_t{bytes[2]} << 8) | bytes[3];
  if ((words + 1) * 4 > bytes.size()) throw DecodeError("RTCP length exceeds the packet", 2);
  SenderReport sr;
  sr.ssrc = get_u32(bytes, 4);
  sr.ntp_timestamp = (std::uint64_t{get_u32(bytes, 8)} << 32) | get_u32(bytes, 12);
  sr.rtp_timestamp = get_u32(bytes, 16);
  sr.packet_count = get_u32(bytes, 20);
  sr.octet_count = get_u32(bytes, 24);
  return sr;
}

std::uint64_t unix_us_to_ntp(std::uint64_t unix_us) {
  constexpr std::uint64_t kEpochOffset = 2208988800ull;  // 1900-01-01 to 1970-01-01 in seconds
  const std::uint64_t seconds = unix_us / 1000000 + kEpochOffset;
  const std::uint64_t frac = ((unix_us % 1000000) << 32) / 1000000;
  return (seconds << 32) | frac;
}

}  // namespace tilecast::rtp
