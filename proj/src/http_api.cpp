#include "tilecast/http_api.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <array>
#include <boost/uuid/random_generator.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include "httplib.h"
#include "json.hpp"
#include "tilecast/errors.hpp"
#include "tilecast/signaling_hub.hpp"

namespace tilecast::signaling {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<const char*, 16> kAdjectives{"amber", "brisk", "calm",  "dusky", "eager", "fuzzy", "gentle", "hazy",
                                                  "icy",   "jolly", "keen",  "lucky", "mellow", "nimble", "quiet", "rusty"};
constexpr std::array<const char*, 16> kAnimals{"otter", "heron", "lynx",  "panda", "gecko", "moose", "finch", "koala",
                                               "bison", "crane", "egret", "ibex",  "lemur", "newt",  "okapi", "viper"};

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& reason) {
  send_json(res, status, ordered_json{{"error", reason}});
}

// Parses a JSON object body and pulls the named string fields out of it.
// Numbers are accepted for fields that are numeric in the tables.
std::map<std::string, std::string> body_fields(const httplib::Request& req, std::initializer_list<const char*> names) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::parse_error&) {
    throw ParameterError("body must be a JSON object");
  }
  if (!j.is_object()) throw ParameterError("body must be a JSON object");
  std::map<std::string, std::string> out;
  for (const char* name : names) {
    const auto it = j.find(name);
    if (it == j.end()) throw ParameterError(std::string("missing field '") + name + "'");
    if (it->is_string())
      out[name] = it->get<std::string>();
    else if (it->is_number_integer())
      out[name] = std::to_string(it->get<long long>());
    else
      throw ParameterError(std::string("field '") + name + "' must be a string");
  }
  return out;
}

std::string decode_base64(std::string_view text) {
  std::string clean;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw ParameterError("base64 payload has a bad length");
  std::string out(clean.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw ParameterError("payload is not valid base64");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock counts padding bytes as output.
  if (!clean.empty() && clean.back() == '=') --len;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string safe_extension(const std::string& filename, const std::string& fallback) {
  const auto dot = filename.rfind('.');
  if (dot == std::string::npos) return fallback;
  std::string ext = filename.substr(dot);
  if (ext.size() > 8) return fallback;
  for (std::size_t i = 1; i < ext.size(); ++i)
    if (!std::isalnum(static_cast<unsigned char>(ext[i]))) return fallback;
  return ext;
}

ordered_json entry_json(const PublishedEntry& e) {
  return ordered_json{{"id", e.id},       {"time", e.time}, {"name", e.name}, {"title", e.title},
                      {"img_url", e.img_url}, {"ip", e.ip},     {"port", e.port}, {"is_online", e.is_online}};
}

}  // namespace

std::string random_nickname(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  char digits[8];
  std::snprintf(digits, sizeof digits, "%04u", static_cast<unsigned>(rng() % 10000));
  return std::string(kAdjectives[rng() % kAdjectives.size()]) + "-" + kAnimals[rng() % kAnimals.size()] + "-" + digits;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) throw StoreError("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string online_json(const KvCache& cache) {
  ordered_json arr = ordered_json::array();
  for (const auto& u : online_users(cache))
    arr.push_back({{"nickname", u.nickname}, {"uuid", u.uuid}, {"stream_address", u.stream_address}, {"state", u.state}});
  return arr.dump();
}

std::string published_json(const Store& store) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : store.published_online()) arr.push_back(entry_json(e));
  return arr.dump();
}

HttpApi::HttpApi(HttpApiConfig config, Store& store, KvCache& cache, DirectorHooks hooks)
    : config_(std::move(config)), store_(store), cache_(cache), hooks_(std::move(hooks)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpApi::~HttpApi() { stop(); }

void HttpApi::start() {
  if (thread_.joinable()) return;
  if (config_.port == 0) {
    const int p = server_->bind_to_any_port(config_.host);
    if (p <= 0) throw NetError("HTTP API cannot bind " + config_.host + " on any port");
    port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!server_->bind_to_port(config_.host, config_.port))
      throw NetError("HTTP API cannot bind port " + std::to_string(config_.port));
    port_ = config_.port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("http: listening on {}:{}", config_.host, port_);
}

void HttpApi::stop() {
  if (!thread_.joinable()) return;
  server_->stop();
  thread_.join();
}

void HttpApi::install_routes() {
  auto& s = *server_;
  std::filesystem::create_directories(config_.static_dir);
  s.set_mount_point("/static", config_.static_dir.string());

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const ParameterError& e) {
      send_error(res, 400, e.what());
    } catch (const StateError& e) {
      send_error(res, 409, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  s.Get("/home", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("Welcome to home page.", "text/html; charset=utf-8");
  });

  // Named in the original route table without a described payload.
  for (const char* path : {"/index", "/test_user"})
    s.Get(path, [](const httplib::Request&, httplib::Response& res) { send_error(res, 404, "route not implemented"); });

  s.Get("/random_name", [this](const httplib::Request&, httplib::Response& res) {
    static std::mutex gen_mutex;
    static boost::uuids::random_generator gen;
    static std::random_device rd;
    std::string uuid, name;
    {
      std::lock_guard lock(gen_mutex);
      uuid = boost::uuids::to_string(gen());
      // Nicknames are best-effort unique among names handed out so far.
      std::set<std::string> taken;
      for (const auto& [key, value] : cache_.scan("name:")) taken.insert(value);
      for (int attempt = 0; attempt < 64; ++attempt) {
        name = random_nickname((std::uint64_t{rd()} << 32) | rd());
        if (!taken.contains(name)) break;
      }
      if (taken.contains(name)) name += "-" + uuid.substr(0, 8);
      cache_.set(name_key(uuid), name);
    }
    send_json(res, 200, ordered_json{{"name", name}, {"uuid", uuid}});
  });

  s.Get("/get_online", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(online_json(cache_), "application/json");
  });

  s.Post("/register", [this](const httplib::Request& req, httplib::Response& res) {
    const auto f = body_fields(req, {"name", "password", "email"});
    try {
      const UserRecord u = store_.add_user(f.at("name"), f.at("password"), f.at("email"));
      send_json(res, 200, ordered_json{{"ok", true}, {"id", u.id}, {"name", u.name}});
    } catch (const DuplicateKeyError& e) {
      send_json(res, 409, ordered_json{{"ok", false}, {"error", "duplicate " + e.column()}, {"field", e.column()}});
    } catch (const StoreError& e) {
      send_error(res, 400, e.what());
    }
  });

  s.Post("/login", [this](const httplib::Request& req, httplib::Response& res) {
    const auto f = body_fields(req, {"name", "password"});
    const auto u = store_.find_user(f.at("name"));
    if (!u || u->password != f.at("password")) {
      send_json(res, 401, ordered_json{{"ok", false}, {"error", "incorrect username or password"}});
      return;
    }
    send_json(res, 200, ordered_json{{"ok", true}, {"id", u->id}, {"name", u->name}, {"email", u->email}});
  });

  s.Get("/published_list", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(published_json(store_), "application/json");
  });

  s.Post("/publish", [this](const httplib::Request& req, httplib::Response& res) {
    const auto f = body_fields(req, {"name", "title", "img_url", "ip", "port"});
    int port = 0;
    try {
      std::size_t used = 0;
      port = std::stoi(f.at("port"), &used);
      if (used != f.at("port").size() || port < 0 || port > 65535) throw std::out_of_range("port");
    } catch (const std::exception&) {
      throw ParameterError("port must be an integer in 0..65535");
    }
    try {
      send_json(res, 200, entry_json(store_.publish(f.at("name"), f.at("title"), f.at("img_url"), f.at("ip"), port)));
    } catch (const StoreError& e) {
      send_error(res, 400, e.what());
    }
  });

  // Uploads: a multipart file part, or the raw body. /img_base additionally
  // accepts a base64 data URL. Files are named by their SHA-256.
  auto store_upload = [this](const httplib::Request& req, httplib::Response& res, const std::string& fallback_ext,
                             bool allow_data_url) {
    std::string bytes;
    std::string ext = fallback_ext;
    if (req.is_multipart_form_data()) {
      if (req.files.empty()) throw ParameterError("multipart upload carries no file part");
      const auto& part = req.files.begin()->second;
      bytes = part.content;
      ext = safe_extension(part.filename, fallback_ext);
    } else {
      bytes = req.body;
      if (allow_data_url && bytes.rfind("data:", 0) == 0) {
        const auto comma = bytes.find(',');
        const auto meta = bytes.substr(0, comma == std::string::npos ? 0 : comma);
        if (comma == std::string::npos || meta.find(";base64") == std::string::npos)
          throw ParameterError("data URL must be base64 encoded");
        if (const auto slash = meta.find('/'); slash != std::string::npos)
          ext = safe_extension("." + meta.substr(slash + 1, meta.find(';') - slash - 1), fallback_ext);
        bytes = decode_base64(std::string_view(bytes).substr(comma + 1));
      }
    }
    if (bytes.empty()) throw ParameterError("upload is empty");
    const std::string digest = sha256_hex(bytes);
    const std::string file = digest + ext;
    const auto path = config_.static_dir / file;
    if (!std::filesystem::exists(path)) {
      const auto tmp = config_.static_dir / (file + ".part");
      {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw StoreError("cannot write " + tmp.string());
      }
      std::filesystem::rename(tmp, path);
    }
    send_json(res, 200, ordered_json{{"sha256", digest}, {"size", bytes.size()}, {"url", "/static/" + file}});
  };
  s.Post("/client_log", [store_upload](const httplib::Request& req, httplib::Response& res) {
    store_upload(req, res, ".log", false);
  });
  s.Post("/img_base", [store_upload](const httplib::Request& req, httplib::Response& res) {
    store_upload(req, res, ".bin", true);
  });

  // Director console plumbing.
  s.Get("/layout", [this](const httplib::Request&, httplib::Response& res) {
    if (!hooks_.layout_json) return send_error(res, 503, "no compositor attached");
    res.set_content(hooks_.layout_json(), "application/json");
  });
  s.Get("/preview.bmp", [this](const httplib::Request&, httplib::Response& res) {
    if (!hooks_.preview_bmp) return send_error(res, 503, "no compositor attached");
    const auto bmp = hooks_.preview_bmp();
    res.set_header("Cache-Control", "no-store");
    res.set_content(std::string(bmp.begin(), bmp.end()), "image/bmp");
  });
  for (const char* action : {"maximize", "restore", "page/next", "page/prev"}) {
    s.Post(std::string("/control/") + action, [this, action](const httplib::Request& req, httplib::Response& res) {
      if (!hooks_.control) return send_error(res, 503, "no compositor attached");
      res.set_content(hooks_.control(action, req.body), "application/json");
    });
  }
}

}  // namespace tilecast::signaling
