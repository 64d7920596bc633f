#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tilecast::legacy {

// Baseline length-prefixed TCP framing: [u32 big-endian length][payload].
// Kept to contrast the queue-based push path with RTP; the stream path never
// uses it.

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kHeaderLength = 4;
inline constexpr std::size_t kDefaultMaxPayload = 16u << 20;

Bytes pack(std::span<const std::uint8_t> payload);

// Stream unpacker. Carries the incomplete tail of each read over to the next.
class ReassemblyBuffer {
 public:
  explicit ReassemblyBuffer(std::size_t max_payload = kDefaultMaxPayload) : max_payload_(max_payload) {}

  // Appends `chunk` and returns every payload completed by it, in order.
  // Throws FramingError when a header announces more than max_payload bytes;
  // the buffer is unusable afterwards.
  std::vector<Bytes> unpack(std::span<const std::uint8_t> chunk);

  std::size_t residue_size() const { return residue_.size(); }

 private:
  std::size_t max_payload_;
  Bytes residue_;
};

struct DepthSample {
  double time_s = 0.0;
  std::size_t depth = 0;
};

/// Discrete-event model of the receive queue: the producer enqueues one frame
/// every 1/producer_fps seconds, the consumer dequeues at most one every
/// 1/consumer_fps. Enqueues at the same instant as a dequeue happen first.
/// Returns the depth after each consumer tick in [0, duration_s).
std::vector<DepthSample> queue_depth_trace(double producer_fps, double consumer_fps, double duration_s);

// Least-squares slope of depth over time, in frames per second.
double depth_slope(std::span<const DepthSample> samples);

}  // namespace tilecast::legacy
