#include "tilecast/store.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "json.hpp"
#include "tilecast/signal_message.hpp"

namespace tilecast::signaling {
namespace {

using nlohmann::json;

// Exact key set with the expected JSON types; anything else is a schema error.
void check_schema(const json& j, const std::map<std::string, json::value_t>& schema) {
  if (!j.is_object() || j.size() != schema.size()) throw StoreError("row does not have the table's columns");
  for (const auto& [key, type] : schema) {
    const auto it = j.find(key);
    if (it == j.end()) throw StoreError("row is missing column " + key);
    const bool ok = type == json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw StoreError("column " + key + " has the wrong type");
  }
}

const std::map<std::string, json::value_t> kUserSchema{{"id", json::value_t::number_integer},
                                                       {"name", json::value_t::string},
                                                       {"password", json::value_t::string},
                                                       {"email", json::value_t::string}};
const std::map<std::string, json::value_t> kNetSchema{{"id", json::value_t::number_integer}, {"uuid", json::value_t::string},
                                                      {"name", json::value_t::string},       {"ip", json::value_t::string},
                                                      {"port", json::value_t::number_integer}, {"state", json::value_t::string}};
const std::map<std::string, json::value_t> kPublishedSchema{
    {"id", json::value_t::number_integer}, {"time", json::value_t::string}, {"name", json::value_t::string},
    {"title", json::value_t::string},      {"img_url", json::value_t::string}, {"ip", json::value_t::string},
    {"port", json::value_t::number_integer}, {"is_online", json::value_t::boolean}};

json to_json(const UserRecord& r) { return {{"id", r.id}, {"name", r.name}, {"password", r.password}, {"email", r.email}}; }
json to_json(const UserNetInfo& r) {
  return {{"id", r.id}, {"uuid", r.uuid}, {"name", r.name}, {"ip", r.ip}, {"port", r.port}, {"state", r.state}};
}
json to_json(const PublishedEntry& r) {
  return {{"id", r.id}, {"time", r.time}, {"name", r.name}, {"title", r.title}, {"img_url", r.img_url}, {"ip", r.ip},
          {"port", r.port}, {"is_online", r.is_online}};
}

void validate_port(long port) {
  if (port < 0 || port > 65535) throw StoreError("port out of range");
}

template <typename F>
void replay(const std::filesystem::path& path, F&& on_row) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      on_row(j);
    } catch (const std::exception& e) {
      throw StoreError(path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  users_log_.path = dir_ / "user.jsonl";
  net_log_.path = dir_ / "user_net_info.jsonl";
  published_log_.path = dir_ / "published_list.jsonl";

  replay(users_log_.path, [&](const json& j) {
    check_schema(j, kUserSchema);
    UserRecord r{j["id"].get<long>(), j["name"].get<std::string>(), j["password"].get<std::string>(),
                 j["email"].get<std::string>()};
    if (user_by_name_.contains(r.name)) throw DuplicateKeyError("name");
    if (user_by_email_.contains(r.email)) throw DuplicateKeyError("email");
    user_by_name_[r.name] = users_.size();
    user_by_email_[r.email] = users_.size();
    users_.push_back(std::move(r));
  });
  replay(net_log_.path, [&](const json& j) {
    check_schema(j, kNetSchema);
    UserNetInfo r{j["id"].get<long>(), j["uuid"].get<std::string>(), j["name"].get<std::string>(),
                  j["ip"].get<std::string>(), j["port"].get<int>(), j["state"].get<std::string>()};
    if (!parse_user_state(r.state)) throw StoreError("invalid state " + r.state);
    current_net_[r.uuid] = net_rows_.size();
    net_rows_.push_back(std::move(r));
  });
  replay(published_log_.path, [&](const json& j) {
    check_schema(j, kPublishedSchema);
    published_.push_back({j["id"].get<long>(), j["time"].get<std::string>(), j["name"].get<std::string>(),
                          j["title"].get<std::string>(), j["img_url"].get<std::string>(), j["ip"].get<std::string>(),
                          j["port"].get<int>(), j["is_online"].get<bool>()});
  });

  for (Log* log : {&users_log_, &net_log_, &published_log_}) {
    log->out.open(log->path, std::ios::app);
    if (!log->out) throw StoreError("cannot open " + log->path.string() + " for appending");
  }
}

void Store::append(Log& log, const std::string& line) {
  log.out << line << '\n';
  log.out.flush();
  if (!log.out) throw StoreError("write to " + log.path.string() + " failed");
}

UserRecord Store::add_user(const std::string& name, const std::string& password, const std::string& email) {
  if (name.empty() || password.empty() || email.empty()) throw StoreError("name, password and email are required");
  if (email.find('@') == std::string::npos) throw StoreError("email address is malformed");
  std::lock_guard lock(mutex_);
  if (user_by_email_.contains(email)) throw DuplicateKeyError("email");
  if (user_by_name_.contains(name)) throw DuplicateKeyError("name");
  UserRecord r{static_cast<long>(users_.size()) + 1, name, password, email};
  append(users_log_, to_json(r).dump());
  user_by_name_[name] = users_.size();
  user_by_email_[email] = users_.size();
  users_.push_back(r);
  return r;
}

std::optional<UserRecord> Store::find_user(const std::string& name) const {
  std::lock_guard lock(mutex_);
  const auto it = user_by_name_.find(name);
  if (it == user_by_name_.end()) return std::nullopt;
  return users_[it->second];
}

UserNetInfo Store::append_net_info(const std::string& uuid, const std::string& name, const std::string& ip, int port,
                                   const std::string& state) {
  if (uuid.empty()) throw StoreError("uuid is required");
  if (!parse_user_state(state)) throw StoreError("invalid state " + state);
  validate_port(port);
  std::lock_guard lock(mutex_);
  UserNetInfo r{static_cast<long>(net_rows_.size()) + 1, uuid, name, ip, port, state};
  append(net_log_, to_json(r).dump());
  current_net_[uuid] = net_rows_.size();
  net_rows_.push_back(r);
  return r;
}

std::optional<UserNetInfo> Store::current_net_info(const std::string& uuid) const {
  std::lock_guard lock(mutex_);
  const auto it = current_net_.find(uuid);
  if (it == current_net_.end()) return std::nullopt;
  return net_rows_[it->second];
}

std::vector<UserNetInfo> Store::net_info_rows() const {
  std::lock_guard lock(mutex_);
  return net_rows_;
}

PublishedEntry Store::publish(const std::string& name, const std::string& title, const std::string& img_url,
                              const std::string& ip, int port) {
  if (name.empty() || title.empty()) throw StoreError("name and title are required");
  validate_port(port);
  std::lock_guard lock(mutex_);
  PublishedEntry r{static_cast<long>(published_.size()) + 1, utc_timestamp_now(), name, title, img_url, ip, port, true};
  append(published_log_, to_json(r).dump());
  published_.push_back(r);
  return r;
}

std::vector<PublishedEntry> Store::published_online() const {
  std::lock_guard lock(mutex_);
  std::vector<PublishedEntry> out;
  for (const auto& e : published_)
    if (e.is_online) out.push_back(e);
  return out;
}

}  // namespace tilecast::signaling
