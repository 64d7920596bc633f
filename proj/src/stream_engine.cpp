#include <spdlog/spdlog.h>

#include <chrono>
#include <condition_variable>

#include "json.hpp"
#include "tilecast/block_codec.hpp"
#include "tilecast/color_space.hpp"
#include "tilecast/errors.hpp"
#include "tilecast/http_api.hpp"
#include "tilecast/rtsp_server.hpp"
#include "tilecast/signaling_hub.hpp"
#include "tilecast/stream_harness.hpp"
#include "tilecast/websocket.hpp"

namespace tilecast::harness {

std::uint64_t wall_clock_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

std::vector<std::uint8_t> encode_bmp(const Frame& frame) {
  const std::size_t row = (static_cast<std::size_t>(frame.width) * 3 + 3) & ~std::size_t{3};
  const std::size_t image = row * static_cast<std::size_t>(frame.height);
  std::vector<std::uint8_t> out(54 + image, 0);
  auto le32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  out[0] = 'B';
  out[1] = 'M';
  le32(2, static_cast<std::uint32_t>(out.size()));
  le32(10, 54);
  le32(14, 40);
  le32(18, static_cast<std::uint32_t>(frame.width));
  le32(22, static_cast<std::uint32_t>(frame.height));
  out[26] = 1;   // planes
  out[28] = 24;  // bits per pixel
  le32(34, static_cast<std::uint32_t>(image));
  le32(38, 2835);  // 72 dpi
  le32(42, 2835);
  for (int y = 0; y < frame.height; ++y) {
    std::uint8_t* dst = &out[54 + row * static_cast<std::size_t>(frame.height - 1 - y)];
    for (int x = 0; x < frame.width; ++x) {
      const RgbPixel p = frame.at(x, y);
      dst[3 * x] = p.b;
      dst[3 * x + 1] = p.g;
      dst[3 * x + 2] = p.r;
    }
  }
  return out;
}

std::string layout_json(const LayoutState& layout, const std::vector<std::string>& source_names) {
  nlohmann::ordered_json tiles = nlohmann::ordered_json::array();
  for (int t = 0; t < static_cast<int>(layout.tiles.size()); ++t) {
    const Tile& tile = layout.tiles[t];
    nlohmann::ordered_json j{{"id", t}, {"page", layout.page_of(t)}};
    if (tile.source_id) {
      j["source_id"] = *tile.source_id;
      j["source_name"] = source_names.at(static_cast<std::size_t>(*tile.source_id));
    } else {
      j["source_id"] = nullptr;
      j["source_name"] = nullptr;
    }
    j["x"] = tile.geometry.x;
    j["y"] = tile.geometry.y;
    j["width"] = tile.geometry.width;
    j["height"] = tile.geometry.height;
    j["visible"] = tile.visible;
    j["maximized"] = layout.maximized == t;
    tiles.push_back(std::move(j));
  }
  nlohmann::ordered_json j{{"page_index", layout.page_index},
                           {"page_count", layout.page_count()},
                           {"tiles_per_page", layout.tiles_per_page}};
  j["maximized"] = layout.maximized ? nlohmann::ordered_json(*layout.maximized) : nlohmann::ordered_json(nullptr);
  j["tiles"] = std::move(tiles);
  return j.dump();
}

struct StreamEngine::Impl {
  HarnessConfig config;
  EngineOptions options;
  std::vector<std::string> source_names;
  std::unique_ptr<Compositor> compositor;
  DirectorChannel channel;
  std::unique_ptr<rtsp::Server> rtsp;

  std::unique_ptr<signaling::Store> store;
  std::unique_ptr<signaling::KvCache> cache;
  std::unique_ptr<signaling::Hub> hub;
  std::unique_ptr<ws::Server> ws;
  std::unique_ptr<signaling::HttpApi> http;

  std::atomic<bool> running{false};
  std::thread loop;

  mutable std::mutex state_mutex;
  LayoutState layout;
  EngineStats stats;
  double tick_ms_sum = 0;

  // Preview requests are served by the compose loop, which owns the frame.
  std::mutex preview_mutex;
  std::condition_variable preview_cv;
  bool preview_wanted = false;
  std::uint64_t preview_generation = 0;
  Frame preview;

  void run();
  std::vector<std::uint8_t> preview_bmp();
  std::string control(const std::string& action, const std::string& body);
};

StreamEngine::StreamEngine(HarnessConfig config, EngineOptions options) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = std::move(config);
  impl_->options = options;
  const auto descriptors = enumerate_sources(impl_->config.sources);
  std::vector<std::unique_ptr<Source>> sources;
  for (const auto& d : descriptors) {
    impl_->source_names.push_back(d.name);
    auto source = open_source(d);
    if (impl_->config.capture_threads) source = std::make_unique<CaptureThreadSource>(std::move(source));
    sources.push_back(std::move(source));
  }
  impl_->compositor = std::make_unique<Compositor>(impl_->config.canvas, std::move(sources));
  if (impl_->config.maximize_tile) impl_->compositor->maximize(*impl_->config.maximize_tile);
  impl_->layout = impl_->compositor->layout();
}

StreamEngine::~StreamEngine() { stop(); }

void StreamEngine::start() {
  Impl& m = *impl_;
  if (m.running) return;
  const HarnessConfig& c = m.config;
  auto bind = [](const char* what, std::uint16_t port, auto&& make) {
    try {
      return make();
    } catch (const NetError& e) {
      throw NetError(std::string(what) + " " + std::to_string(port) + " unavailable: " + e.what());
    }
  };

  rtsp::ServiceConfig sc;
  sc.user = c.user;
  sc.password = c.password;
  sc.stream_path = c.stream_path;
  sc.origin_host = c.public_host;
  sc.fps = c.canvas.fps;
  sc.width = c.canvas.width;
  sc.height = c.canvas.height;
  m.rtsp = bind("rtsp_port", c.rtsp_port,
                [&] { return std::make_unique<rtsp::Server>(sc, c.bind_host, c.rtsp_port, c.rtp_port); });

  if (m.options.signaling) {
    std::filesystem::create_directories(c.data_dir);
    m.store = std::make_unique<signaling::Store>(c.data_dir / "db");
    m.cache = std::make_unique<signaling::KvCache>(c.data_dir / "cache.aof");
    signaling::HubConfig hc;
    hc.call_timeout = std::chrono::milliseconds(static_cast<long>(c.call_timeout_s * 1000));
    hc.heartbeat_interval = std::chrono::milliseconds(static_cast<long>(c.heartbeat_interval_s * 1000));
    hc.stale_after_beats = c.stale_after_beats;
    m.hub = std::make_unique<signaling::Hub>(hc, *m.store, *m.cache);
    m.ws = bind("ws_port", c.ws_port, [&] { return std::make_unique<ws::Server>(c.bind_host, c.ws_port, *m.hub); });

    signaling::DirectorHooks hooks;
    hooks.layout_json = [&m] {
      std::lock_guard lock(m.state_mutex);
      return layout_json(m.layout, m.source_names);
    };
    hooks.preview_bmp = [&m] { return m.preview_bmp(); };
    hooks.control = [&m](const std::string& action, const std::string& body) { return m.control(action, body); };
    m.http = std::make_unique<signaling::HttpApi>(
        signaling::HttpApiConfig{c.bind_host, c.http_port, c.data_dir / "static"}, *m.store, *m.cache, std::move(hooks));
    bind("http_port", c.http_port, [&] {
      m.http->start();
      return 0;
    });
    m.ws->start();
  }

  m.rtsp->start();
  m.running = true;
  m.loop = std::thread([&m] { m.run(); });
}

void StreamEngine::stop() {
  Impl& m = *impl_;
  if (!m.running.exchange(false)) return;
  m.preview_cv.notify_all();
  if (m.loop.joinable()) m.loop.join();
  m.channel.cancel_all("engine stopped");
  if (m.http) m.http->stop();
  if (m.ws) m.ws->stop();
  m.rtsp->stop();
}

void StreamEngine::Impl::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / config.canvas.fps));
  const auto start = clock::now();
  std::uint64_t tick = 0;
  std::uint32_t frame_index = 0;
  while (running) {
    std::this_thread::sleep_until(start + period * static_cast<long>(tick));
    if (!running) break;
    const auto t0 = clock::now();

    channel.drain(*compositor);
    const std::uint64_t now_us = wall_clock_us();
    const Frame& frame = compositor->compose_tick(tick, now_us);
    {
      std::lock_guard lock(preview_mutex);
      if (preview_wanted) {
        preview = frame;
        preview_wanted = false;
        ++preview_generation;
        preview_cv.notify_all();
      }
    }
    const EncodedFrame encoded = encode_frame(pack_nv12(frame), config.quant_step, frame_index++, now_us);
    rtsp->publish(encoded);

    const auto t1 = clock::now();
    {
      std::lock_guard lock(state_mutex);
      layout = compositor->layout();
      ++stats.ticks;
      stats.bytes_encoded += encoded.byte_size();
      tick_ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count();
      stats.mean_tick_ms = tick_ms_sum / static_cast<double>(stats.ticks);
    }

    // Fell behind by more than a period: skip the missed ticks rather than
    // bursting to catch up.
    ++tick;
    const auto behind = t1 - (start + period * static_cast<long>(tick));
    if (behind > period) {
      const auto skip = static_cast<std::uint64_t>(behind / period);
      tick += skip;
      std::lock_guard lock(state_mutex);
      stats.late_ticks += skip;
    }
  }
}

std::vector<std::uint8_t> StreamEngine::Impl::preview_bmp() {
  std::unique_lock lock(preview_mutex);
  const auto generation = preview_generation;
  preview_wanted = true;
  if (!preview_cv.wait_for(lock, std::chrono::seconds(2), [&] { return preview_generation != generation || !running; }) ||
      preview_generation == generation)
    throw StateError("compositor did not produce a frame");
  return encode_bmp(preview);
}

std::string StreamEngine::Impl::control(const std::string& action, const std::string& body) {
  DirectorCommand cmd;
  if (action == "maximize") {
    nlohmann::json j = nlohmann::json::parse(body.empty() ? "{}" : body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("tile") || !j["tile"].is_number_integer())
      throw ParameterError("body must be {\"tile\": <id>}");
    cmd = MaximizeCmd{j["tile"].get<int>()};
  } else if (action == "restore") {
    cmd = RestoreCmd{};
  } else if (action == "page/next") {
    cmd = PageNextCmd{};
  } else if (action == "page/prev") {
    cmd = PagePrevCmd{};
  } else {
    throw ParameterError("unknown control action " + action);
  }
  auto future = channel.submit(cmd);
  if (future.wait_for(std::chrono::seconds(2)) != std::future_status::ready)
    throw StateError("compositor did not apply the command");
  const CommandOutcome outcome = future.get();
  if (!outcome.ok) throw StateError(outcome.error);
  {
    // The loop refreshes its snapshot only after the tick; make the change
    // visible to GET /layout as soon as this call returns.
    std::lock_guard lock(state_mutex);
    layout = outcome.layout;
  }
  return layout_json(outcome.layout, source_names);
}

std::string StreamEngine::rtsp_url(bool with_credentials) const { return impl_->rtsp->url(with_credentials); }
std::uint16_t StreamEngine::rtsp_port() const { return impl_->rtsp->port(); }
std::uint16_t StreamEngine::http_port() const { return impl_->http ? impl_->http->port() : 0; }
std::uint16_t StreamEngine::ws_port() const { return impl_->ws ? impl_->ws->port() : 0; }
const HarnessConfig& StreamEngine::config() const { return impl_->config; }
std::size_t StreamEngine::source_count() const { return impl_->source_names.size(); }

EngineStats StreamEngine::stats() const {
  std::lock_guard lock(impl_->state_mutex);
  EngineStats s = impl_->stats;
  if (impl_->rtsp) s.packets_sent = impl_->rtsp->packets_sent();
  return s;
}

}  // namespace tilecast::harness
