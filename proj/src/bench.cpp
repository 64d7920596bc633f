#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <sstream>

#include "json.hpp"
#include "tilecast/errors.hpp"
#include "tilecast/legacy_framing.hpp"
#include "tilecast/net.hpp"
#include "tilecast/stream_harness.hpp"

namespace tilecast::harness {

namespace {

struct Segment {
  PullReport pull;
  double mean_tick_ms = 0;
};

Segment run_segment(const HarnessConfig& base, int n, double seconds) {
  HarnessConfig cfg = base;
  cfg.sources = pattern_sources(n);
  cfg.capture_threads = true;
  cfg.maximize_tile = 0;
  cfg.rtsp_port = 0;
  cfg.rtp_port = 0;
  StreamEngine engine(cfg, EngineOptions{.signaling = false});
  engine.start();
  PullOptions po;
  po.duration_s = seconds;
  Segment seg;
  seg.pull = pull(engine.rtsp_url(true), po);
  seg.mean_tick_ms = engine.stats().mean_tick_ms;
  engine.stop();
  return seg;
}

// Folds one segment into the pooled report for its source count.
void pool(PullReport& into, const PullReport& seg) {
  if (into.width == 0) {
    into.width = seg.width;
    into.height = seg.height;
    into.quant_step = seg.quant_step;
  } else if (seg.width != into.width || seg.height != into.height) {
    into.width = -1;  // dimension changed between segments; never equal to the others
  }
  into.packets += seg.packets;
  into.frames_decoded += seg.frames_decoded;
  into.frames_expected += seg.frames_expected;
  into.payload_bytes += seg.payload_bytes;
  into.elapsed_s += seg.elapsed_s;
  into.samples.insert(into.samples.end(), seg.samples.begin(), seg.samples.end());
  if (into.error.empty()) into.error = seg.error;
}

}  // namespace

InvarianceReport bench_invariance(const std::vector<int>& counts, double duration_s, HarnessConfig base,
                                  int rounds) {
  if (rounds < 1) throw ParameterError("bench needs at least one round");
  if (!(duration_s > 0)) throw ParameterError("bench duration must be positive");
  const double segment_s = duration_s / rounds;
  std::vector<PullReport> pooled(counts.size());
  std::vector<double> tick_sum(counts.size(), 0.0);
  // Round-robin over the source counts, so slow drift in host speed lands on
  // every configuration instead of whichever happened to run last.
  for (int round = 0; round < rounds; ++round)
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (!pooled[i].error.empty()) continue;
      try {
        const Segment seg = run_segment(base, counts[i], segment_s);
        pool(pooled[i], seg.pull);
        tick_sum[i] += seg.mean_tick_ms;
      } catch (const std::exception& e) {
        pooled[i].error = e.what();
      }
    }

  InvarianceReport report;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const PullReport& pr = pooled[i];
    BenchRow row;
    row.source_count = counts[i];
    row.fps = base.canvas.fps;
    row.quant_step = base.quant_step;
    row.width = pr.width;
    row.height = pr.height;
    row.samples = pr.samples.size();
    row.median_latency_ms = pr.median_latency_ms();
    row.p95_latency_ms = pr.p95_latency_ms();
    row.drop_rate = pr.drop_rate();
    row.bitrate_kbps = pr.bitrate_kbps();
    row.mean_tick_ms = tick_sum[i] / rounds;
    row.error = pr.error;
    report.rows.push_back(row);
  }

  const auto& rows = report.rows;
  const bool all_ok = !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) {
    return r.error.empty() && r.samples > 0;
  });
  report.dimensions_constant = all_ok && std::all_of(rows.begin(), rows.end(), [&](const BenchRow& r) {
    return r.width == rows[0].width && r.height == rows[0].height && r.width > 0;
  });
  if (all_ok) {
    auto [lat_min, lat_max] = std::minmax_element(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
      return a.median_latency_ms < b.median_latency_ms;
    });
    auto [br_min, br_max] = std::minmax_element(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
      return a.bitrate_kbps < b.bitrate_kbps;
    });
    report.latency_ratio = lat_min->median_latency_ms > 0 ? lat_max->median_latency_ms / lat_min->median_latency_ms : 0;
    report.bitrate_spread = br_min->bitrate_kbps > 0 ? (br_max->bitrate_kbps - br_min->bitrate_kbps) / br_min->bitrate_kbps : 0;
  }
  return report;
}

std::string InvarianceReport::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"source_count", r.source_count},
                   {"fps", r.fps},
                   {"width", r.width},
                   {"height", r.height},
                   {"quant_step", r.quant_step},
                   {"samples", r.samples},
                   {"median_latency_ms", r.median_latency_ms},
                   {"p95_latency_ms", r.p95_latency_ms},
                   {"drop_rate", r.drop_rate},
                   {"bitrate_kbps", r.bitrate_kbps},
                   {"mean_tick_ms", r.mean_tick_ms},
                   {"error", r.error}});
  nlohmann::ordered_json j;
  j["rows"] = arr;
  j["dimensions_constant"] = dimensions_constant;
  j["latency_ratio"] = latency_ratio;
  j["bitrate_spread"] = bitrate_spread;
  return j.dump(2);
}

std::string InvarianceReport::to_table() const {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%8s %11s %8s %12s %9s %8s %13s %9s\n", "sources", "dims", "samples", "median_ms",
                "p95_ms", "drops", "bitrate_kbps", "tick_ms");
  out << line;
  for (const auto& r : rows) {
    const std::string dims = std::to_string(r.width) + "x" + std::to_string(r.height);
    std::snprintf(line, sizeof line, "%8d %11s %8zu %12.2f %9.2f %7.2f%% %13.1f %9.2f%s\n", r.source_count, dims.c_str(),
                  r.samples, r.median_latency_ms, r.p95_latency_ms, 100.0 * r.drop_rate, r.bitrate_kbps, r.mean_tick_ms,
                  r.error.empty() ? "" : ("  error: " + r.error).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "dimensions constant: %s  latency max/min: %.3f  bitrate spread: %.2f%%\n",
                dimensions_constant ? "yes" : "no", latency_ratio, 100.0 * bitrate_spread);
  out << line;
  return out.str();
}

BaselineRun baseline_demo(double producer_fps, double consumer_fps, double duration_s) {
  BaselineRun run;
  run.producer_fps = producer_fps;
  run.consumer_fps = consumer_fps;
  run.duration_s = duration_s;
  const auto model = legacy::queue_depth_trace(producer_fps, consumer_fps, duration_s);
  run.model_final_depth = model.empty() ? 0 : model.back().depth;
  run.model_slope = legacy::depth_slope(model);

  const net::Fd listener = net::tcp_listen("127.0.0.1", 0);
  net::Fd producer_fd = net::tcp_connect("127.0.0.1", net::local_port(listener));
  auto accepted = net::tcp_accept(listener, net::Millis(2000));
  if (!accepted) throw NetError("baseline: loopback accept timed out");
  const net::Fd consumer_fd = std::move(*accepted);

  using clock = std::chrono::steady_clock;
  const auto start = clock::now() + std::chrono::milliseconds(20);
  auto at = [&](double seconds) {
    return start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(seconds));
  };

  std::atomic<std::uint64_t> sent{0};
  std::thread producer([&] {
    std::vector<std::uint8_t> payload(4096);
    for (std::uint64_t k = 0;; ++k) {
      const double t = static_cast<double>(k) / producer_fps;
      if (t >= duration_s) break;
      std::this_thread::sleep_until(at(t));
      for (int b = 0; b < 8; ++b) payload[b] = static_cast<std::uint8_t>(k >> (8 * b));
      net::send_all(producer_fd, legacy::pack(payload));
      sent.fetch_add(1);
    }
  });

  legacy::ReassemblyBuffer reassembly;
  std::deque<legacy::Bytes> queue;
  std::vector<std::uint8_t> buf(1 << 16);
  for (std::uint64_t j = 0;; ++j) {
    const double t = static_cast<double>(j) / consumer_fps;
    if (t >= duration_s) break;
    std::this_thread::sleep_until(at(t));
    // Take whatever the socket holds, then display exactly one frame.
    while (const auto n = net::recv_some(consumer_fd, buf, net::Millis(0))) {
      if (*n == 0) break;
      for (auto& f : reassembly.unpack(std::span(buf.data(), *n))) queue.push_back(std::move(f));
    }
    if (!queue.empty()) {
      queue.pop_front();
      ++run.frames_consumed;
    }
    run.measured_trace.push_back({t, queue.size()});
    run.measured_max_depth = std::max(run.measured_max_depth, queue.size());
  }
  producer.join();
  run.frames_sent = sent.load();
  run.measured_final_depth = run.measured_trace.empty() ? 0 : run.measured_trace.back().depth;
  run.measured_slope = legacy::depth_slope(run.measured_trace);
  return run;
}

std::string BaselineRun::to_json() const {
  nlohmann::ordered_json j;
  j["producer_fps"] = producer_fps;
  j["consumer_fps"] = consumer_fps;
  j["duration_s"] = duration_s;
  j["model_final_depth"] = model_final_depth;
  j["model_slope"] = model_slope;
  j["measured_final_depth"] = measured_final_depth;
  j["measured_max_depth"] = measured_max_depth;
  j["measured_slope"] = measured_slope;
  j["frames_sent"] = frames_sent;
  j["frames_consumed"] = frames_consumed;
  j["unbounded_growth"] = unbounded();
  return j.dump(2);
}

}  // namespace tilecast::harness
