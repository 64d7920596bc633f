#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "tilecast/kv_cache.hpp"
#include "tilecast/store.hpp"

namespace httplib {
class Server;
}

namespace tilecast::signaling {

// Plumbing for the director console. Each hook may be empty, in which case
// the matching route answers 503. Control hooks receive the action name
// ("maximize", "restore", "page/next", "page/prev") and the request body and
// return the new layout as JSON, throwing StateError or ParameterError on a
// rejected command.
struct DirectorHooks {
  std::function<std::string()> layout_json;
  std::function<std::vector<std::uint8_t>()> preview_bmp;
  std::function<std::string(const std::string& action, const std::string& body)> control;
};

struct HttpApiConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir = "static";
};

/// JSON API over the store and the cache, plus uploads and the director
/// routes. Runs cpp-httplib's thread pool on a background thread.
class HttpApi {
 public:
  HttpApi(HttpApiConfig config, Store& store, KvCache& cache, DirectorHooks hooks = {});
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Throws NetError naming the port when it cannot bind.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void install_routes();

  HttpApiConfig config_;
  Store& store_;
  KvCache& cache_;
  DirectorHooks hooks_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::uint16_t port_ = 0;
};

// "<adjective>-<animal>-<4 digits>"; exposed for tests.
std::string random_nickname(std::uint64_t seed);
std::string sha256_hex(std::string_view bytes);
// JSON array of {nickname, uuid, stream_address, state} for every cached
// state other than Offline, sorted by uuid.
std::string online_json(const KvCache& cache);
std::string published_json(const Store& store);

}  // namespace tilecast::signaling
