#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tilecast/compositor.hpp"
#include "tilecast/legacy_framing.hpp"
#include "tilecast/media_sources.hpp"
#include "tilecast/rtsp_client.hpp"

namespace tilecast::harness {

// ---------------------------------------------------------------- config

struct HarnessConfig {
  // [server]
  std::string bind_host = "127.0.0.1";
  std::string public_host = "127.0.0.1";  // host written into the advertised URL
  std::uint16_t rtsp_port = 8554;
  std::uint16_t rtp_port = 0;  // even base of the RTP/RTCP pair; 0 picks one
  std::uint16_t http_port = 8080;
  std::uint16_t ws_port = 8383;
  std::filesystem::path data_dir = "tilecast-data";
  std::string stream_path = "/live";
  // [credentials]
  std::string user = "director";
  std::string password = "tilecast";
  // [canvas]
  CanvasConfig canvas{.width = 640, .height = 352, .fps = 30.0, .rows = 2, .cols = 2, .sample_hidden_pages = false};
  int quant_step = 16;
  std::optional<int> maximize_tile;  // start in the director view on this tile
  // Capture every source on its own thread (see CaptureThreadSource); off
  // means sources are sampled synchronously inside the compose tick.
  bool capture_threads = true;
  // [signaling]
  double call_timeout_s = 15.0;
  double heartbeat_interval_s = 1.0;
  int stale_after_beats = 5;
  // [source:<name>] sections, in file order
  std::vector<DeclaredSource> sources;

  // Throws ConfigError describing the first invalid field.
  void validate() const;
};

// INI text as described in docs/formats.md. Unknown sections or keys are a
// ConfigError so typos do not pass silently.
HarnessConfig parse_config(const std::string& ini_text);
HarnessConfig load_config(const std::filesystem::path& path);

// N identical-size pattern sources named pattern-0..pattern-(N-1).
std::vector<DeclaredSource> pattern_sources(int count, int width = 320, int height = 180, double fps = 30.0);

// ---------------------------------------------------------------- helpers

// Microseconds since the Unix epoch; the clock both ends of a latency
// measurement read on one host.
std::uint64_t wall_clock_us();

// 24-bit bottom-up BMP.
std::vector<std::uint8_t> encode_bmp(const Frame& frame);

std::string layout_json(const LayoutState& layout, const std::vector<std::string>& source_names);

// Fixed-capacity FIFO that discards the oldest element when full.
template <typename T>
class DropOldestQueue {
 public:
  explicit DropOldestQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  // Waits until an element arrives or close() was called and the queue drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

// ---------------------------------------------------------------- serve

struct EngineOptions {
  bool signaling = true;  // WebSocket hub and HTTP API
};

struct EngineStats {
  std::uint64_t ticks = 0;
  std::uint64_t late_ticks = 0;  // ticks skipped because the loop fell behind
  std::uint64_t bytes_encoded = 0;
  std::uint64_t packets_sent = 0;
  double mean_tick_ms = 0;  // compose + pack + encode + publish
};

/// Everything behind `tilecast serve`: sources, compositor, encoder and RTSP
/// server on a paced loop, plus the signaling hub and HTTP API.
class StreamEngine {
 public:
  explicit StreamEngine(HarnessConfig config, EngineOptions options = {});
  ~StreamEngine();
  StreamEngine(const StreamEngine&) = delete;
  StreamEngine& operator=(const StreamEngine&) = delete;

  // Binds every port and starts the loops. Port conflicts raise NetError
  // naming the port.
  void start();
  void stop();

  std::string rtsp_url(bool with_credentials) const;
  std::uint16_t rtsp_port() const;
  std::uint16_t http_port() const;
  std::uint16_t ws_port() const;
  const HarnessConfig& config() const;
  std::size_t source_count() const;
  EngineStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------- pull

struct PullOptions {
  double duration_s = 10.0;
  std::size_t queue_capacity = 4;
  bool with_credentials = true;  // take user:pass from the URL for DESCRIBE
};

struct LatencySample {
  std::uint32_t frame_index = 0;
  std::uint64_t compose_ts_us = 0;
  std::uint64_t arrival_ts_us = 0;
  std::int64_t latency_us() const {
    return static_cast<std::int64_t>(arrival_ts_us) - static_cast<std::int64_t>(compose_ts_us);
  }
};

struct PullReport {
  bool handshake_ok = false;
  std::string error;
  std::vector<rtsp::TranscriptEntry> transcript;
  int width = 0;
  int height = 0;
  int quant_step = 0;
  std::uint64_t packets = 0;
  std::uint64_t sender_reports = 0;
  std::uint64_t frames_reassembled = 0;
  std::uint64_t frames_decoded = 0;
  std::uint64_t frames_expected = 0;  // span of frame indices seen
  std::uint64_t queue_drops = 0;
  std::uint64_t strip_errors = 0;  // decoded frames whose strip could not be read
  std::uint64_t payload_bytes = 0;
  double elapsed_s = 0;
  std::vector<LatencySample> samples;

  double drop_rate() const;
  double median_latency_ms() const;
  double p95_latency_ms() const;
  double bitrate_kbps() const;
  std::string to_json(bool include_samples = false) const;
};

/// OPTIONS, DESCRIBE, SETUP, PLAY; receive and decode for the duration;
/// TEARDOWN. Never throws for network or protocol trouble: the report says
/// what went wrong.
PullReport pull(const std::string& url, const PullOptions& options);

// ---------------------------------------------------------------- bench

struct BenchRow {
  int source_count = 0;
  double fps = 0;
  int width = 0;
  int height = 0;
  int quant_step = 0;
  std::size_t samples = 0;
  double median_latency_ms = 0;
  double p95_latency_ms = 0;
  double drop_rate = 0;
  double bitrate_kbps = 0;
  double mean_tick_ms = 0;
  std::string error;
};

struct InvarianceReport {
  std::vector<BenchRow> rows;
  bool dimensions_constant = false;
  double latency_ratio = 0;    // max/min median latency
  double bitrate_spread = 0;   // (max - min) / min
  std::string to_json() const;
  std::string to_table() const;
};

/// For each N: serve N pattern sources in the director view (tile 0
/// maximized, every source still capturing on its own thread) and pull for
/// `duration_s` in total. The time is split into `rounds` segments that visit
/// the counts in turn; each row pools the samples of its segments.
InvarianceReport bench_invariance(const std::vector<int>& counts, double duration_s, HarnessConfig base = {},
                                  int rounds = 5);

struct BaselineRun {
  double producer_fps = 0;
  double consumer_fps = 0;
  double duration_s = 0;
  std::size_t model_final_depth = 0;
  double model_slope = 0;
  std::size_t measured_final_depth = 0;
  std::size_t measured_max_depth = 0;
  double measured_slope = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_consumed = 0;
  std::vector<legacy::DepthSample> measured_trace;  // one sample per consumer tick
  bool unbounded() const { return measured_slope > 0.5; }
  std::string to_json() const;
};

/// Length-prefixed frames over a real loopback TCP connection: a producer
/// thread writes at producer_fps, a consumer takes one frame per tick at
/// consumer_fps and keeps the rest queued, as the legacy pipeline did.
BaselineRun baseline_demo(double producer_fps, double consumer_fps, double duration_s);

}  // namespace tilecast::harness
