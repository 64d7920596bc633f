#include "tilecast/legacy_framing.hpp"

#include <cmath>
#include <string>

#include "tilecast/errors.hpp"

namespace tilecast::legacy {

Bytes pack(std::span<const std::uint8_t> payload) {
  if (payload.size() >= (std::size_t{1} << 31)) throw FramingError("payload too large to frame");
  const auto len = static_cast<std::uint32_t>(payload.size());
  Bytes out;
  out.reserve(kHeaderLength + payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<Bytes> ReassemblyBuffer::unpack(std::span<const std::uint8_t> chunk) {
  residue_.insert(residue_.end(), chunk.begin(), chunk.end());
  std::vector<Bytes> out;
  std::size_t head = 0;
  while (residue_.size() - head >= kHeaderLength) {
    const std::uint32_t len = (std::uint32_t{residue_[head]} << 24) | (std::uint32_t{residue_[head + 1]} << 16) |
                              (std::uint32_t{residue_[head + 2]} << 8) | std::uint32_t{residue_[head + 3]};
    if (len > max_payload_)
      throw FramingError("frame header announces " + std::to_string(len) + " bytes, limit is " +
                         std::to_string(max_payload_));
    if (residue_.size() - head - kHeaderLength < len) break;
    head += kHeaderLength;
    out.emplace_back(residue_.begin() + static_cast<std::ptrdiff_t>(head),
                     residue_.begin() + static_cast<std::ptrdiff_t>(head + len));
    head += len;
  }
  residue_.erase(residue_.begin(), residue_.begin() + static_cast<std::ptrdiff_t>(head));
  return out;
}

std::vector<DepthSample> queue_depth_trace(double producer_fps, double consumer_fps, double duration_s) {
  if (!(producer_fps > 0) || !(consumer_fps > 0) || !(duration_s >= 0))
    throw ParameterError("rates must be positive and duration non-negative");
  std::vector<DepthSample> trace;
  std::size_t depth = 0;
  std::uint64_t produced = 0;
  for (std::uint64_t tick = 0;; ++tick) {
    const double t = static_cast<double>(tick) / consumer_fps;
    if (t >= duration_s) break;
    // Everything produced up to and including t (tolerant of rounding at ties).
    const auto due = static_cast<std::uint64_t>(std::floor(t * producer_fps + 1e-9)) + 1;
    depth += due - produced;
    produced = due;
    if (depth > 0) --depth;
    trace.push_back({t, depth});
  }
  return trace;
}

double depth_slope(std::span<const DepthSample> samples) {
  if (samples.size() < 2) return 0.0;
  double st = 0, sd = 0, stt = 0, std_ = 0;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    st += s.time_s;
    sd += static_cast<double>(s.depth);
    stt += s.time_s * s.time_s;
    std_ += s.time_s * static_cast<double>(s.depth);
  }
  const double denom = n * stt - st * st;
  return denom == 0 ? 0.0 : (n * std_ - st * sd) / denom;
}

}  // namespace tilecast::legacy
