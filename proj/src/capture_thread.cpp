#include <chrono>

#include "tilecast/media_sources.hpp"

namespace tilecast {

CaptureThreadSource::CaptureThreadSource(std::unique_ptr<Source> inner) : inner_(std::move(inner)) {
  thread_ = std::thread([this] { run(); });
}

CaptureThreadSource::~CaptureThreadSource() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void CaptureThreadSource::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / descriptor().fps));
  const auto start = clock::now();
  for (std::uint64_t k = 0;; ++k) {
    std::optional<Frame> frame = inner_->next_frame(k);
    const bool ended = !frame;
    {
      std::unique_lock lock(mutex_);
      latest_ = std::move(frame);
      have_first_ = true;
      ++captured_;
      cv_.notify_all();
      if (ended) return;
      // A capture that overran its slot resumes on the next free one.
      auto next = start + period * static_cast<long>(k + 1);
      if (const auto now = clock::now(); next < now) {
        k += static_cast<std::uint64_t>((now - next) / period) + 1;
        next = start + period * static_cast<long>(k + 1);
      }
      if (cv_.wait_until(lock, next, [&] { return stopping_; })) return;
    }
  }
}

std::optional<Frame> CaptureThreadSource::next_frame(std::uint64_t) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, std::chrono::seconds(1), [&] { return have_first_; });
  return latest_;
}

std::uint64_t CaptureThreadSource::frames_captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

}  // namespace tilecast
