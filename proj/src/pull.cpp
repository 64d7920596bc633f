#include <algorithm>
#include <chrono>

#include "json.hpp"
#include "tilecast/block_codec.hpp"
#include "tilecast/color_space.hpp"
#include "tilecast/errors.hpp"
#include "tilecast/net.hpp"
#include "tilecast/rtp.hpp"
#include "tilecast/rtsp_client.hpp"
#include "tilecast/stream_harness.hpp"

namespace tilecast::harness {
namespace {

double percentile_ms(const std::vector<LatencySample>& samples, double q) {
  if (samples.empty()) return 0.0;
  std::vector<std::int64_t> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.latency_us());
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return static_cast<double>(v[k]) / 1000.0;
}

// Top-left corner of an NV12 image, large enough for the timestamp strip.
Nv12Image crop_corner(const Nv12Image& img, int w, int h) {
  Nv12Image out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(&img.y_plane[static_cast<std::size_t>(y) * img.width], w, &out.y_plane[static_cast<std::size_t>(y) * w]);
  for (int y = 0; y < h / 2; ++y)
    std::copy_n(&img.uv_plane[static_cast<std::size_t>(y) * img.width], w, &out.uv_plane[static_cast<std::size_t>(y) * w]);
  return out;
}

struct Received {
  rtp::Bytes bytes;
};

}  // namespace

double PullReport::drop_rate() const {
  if (frames_expected == 0) return 1.0;
  return 1.0 - static_cast<double>(frames_decoded) / static_cast<double>(frames_expected);
}
double PullReport::median_latency_ms() const { return percentile_ms(samples, 0.5); }
double PullReport::p95_latency_ms() const { return percentile_ms(samples, 0.95); }
double PullReport::bitrate_kbps() const {
  return elapsed_s > 0 ? static_cast<double>(payload_bytes) * 8.0 / 1000.0 / elapsed_s : 0.0;
}

std::string PullReport::to_json(bool include_samples) const {
  nlohmann::ordered_json j;
  j["handshake_ok"] = handshake_ok;
  j["error"] = error;
  nlohmann::ordered_json tr = nlohmann::ordered_json::array();
  for (const auto& t : transcript) tr.push_back({{"method", t.method}, {"uri", t.uri}, {"status", t.status}});
  j["transcript"] = tr;
  j["width"] = width;
  j["height"] = height;
  j["quant_step"] = quant_step;
  j["elapsed_s"] = elapsed_s;
  j["packets"] = packets;
  j["sender_reports"] = sender_reports;
  j["frames_reassembled"] = frames_reassembled;
  j["frames_decoded"] = frames_decoded;
  j["frames_expected"] = frames_expected;
  j["queue_drops"] = queue_drops;
  j["strip_errors"] = strip_errors;
  j["drop_rate"] = drop_rate();
  j["sample_count"] = samples.size();
  j["median_latency_ms"] = median_latency_ms();
  j["p95_latency_ms"] = p95_latency_ms();
  j["bitrate_kbps"] = bitrate_kbps();
  if (include_samples) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : samples)
      arr.push_back({{"frame_index", s.frame_index}, {"compose_ts_us", s.compose_ts_us},
                     {"arrival_ts_us", s.arrival_ts_us}, {"latency_us", s.latency_us()}});
    j["samples"] = arr;
  }
  return j.dump(2);
}

PullReport pull(const std::string& url_text, const PullOptions& options) {
  PullReport report;
  std::optional<rtsp::Client> client;
  try {
    client.emplace(rtsp::Url::parse(url_text));
    auto check = [&](const rtsp::Message& resp, const char* stage) {
      if (resp.status != 200)
        throw ProtocolError(std::string(stage) + " answered " + std::to_string(resp.status) + " " + resp.reason);
    };
    check(client->options(), "OPTIONS");
    const rtsp::Message described = client->describe(options.with_credentials);
    check(described, "DESCRIBE");
    const rtsp::Sdp sdp = rtsp::Sdp::parse(described.body);

    auto [rtp_sock, rtcp_sock] = net::udp_bind_pair("0.0.0.0");
    check(client->setup(net::local_port(rtp_sock), sdp.control), "SETUP");
    check(client->play(), "PLAY");
    report.handshake_ok = true;

    DropOldestQueue<Received> queue(options.queue_capacity);
    std::atomic<bool> receiving{true};
    rtp::Depacketizer depack;
    std::uint64_t packets = 0, srs = 0;
    const auto t_start = std::chrono::steady_clock::now();
    const auto deadline = t_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(options.duration_s));

    std::thread receiver([&] {
      std::vector<std::uint8_t> buf(65536);
      while (receiving) {
        if (const auto n = net::recv_from(rtp_sock, buf, net::Millis(20))) {
          try {
            const auto packet = rtp::Packet::parse(std::span(buf.data(), *n));
            ++packets;
            if (auto frame = depack.push(packet)) queue.push(Received{std::move(*frame)});
          } catch (const std::exception&) {
            // Not RTP; ignore.
          }
        }
        while (net::recv_from(rtcp_sock, buf, net::Millis(0))) ++srs;
      }
      queue.close();
    });

    std::optional<std::uint32_t> first_index, last_index;
    std::thread stopper([&] {
      std::this_thread::sleep_until(deadline);
      receiving = false;
    });
    while (auto item = queue.pop()) {
      try {
        const EncodedFrame ef = EncodedFrame::parse(item->bytes);
        report.payload_bytes += ef.byte_size();
        const Nv12Image img = decode_frame(ef);
        report.width = ef.width;
        report.height = ef.height;
        report.quant_step = ef.step;
        ++report.frames_decoded;
        if (!first_index || ef.frame_index < *first_index) first_index = ef.frame_index;
        if (!last_index || ef.frame_index > *last_index) last_index = ef.frame_index;
        if (!has_strip_room(img.width, img.height)) {
          ++report.strip_errors;
          continue;
        }
        const std::uint64_t compose_ts = decode_timestamp(unpack_nv12(crop_corner(img, kStripWidth, kStripHeight)));
        report.samples.push_back({ef.frame_index, compose_ts, wall_clock_us()});
      } catch (const DecodeError&) {
        ++report.strip_errors;
      }
    }
    stopper.join();
    receiver.join();
    report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report.packets = packets;
    report.sender_reports = srs;
    report.frames_reassembled = depack.frames_completed();
    report.queue_drops = queue.dropped();
    if (first_index) report.frames_expected = *last_index - *first_index + 1;
    check(client->teardown(), "TEARDOWN");
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  if (client) report.transcript = client->transcript();
  return report;
}

}  // namespace tilecast::harness
