#include "tilecast/kv_cache.hpp"

#include "json.hpp"
#include "tilecast/errors.hpp"

namespace tilecast::signaling {

KvCache::KvCache(std::filesystem::path aof) {
  if (aof.has_parent_path()) std::filesystem::create_directories(aof.parent_path());
  if (std::ifstream in{aof}) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      const bool last = in.peek() == std::char_traits<char>::eof();
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("op") || !j.contains("k")) {
        if (last) break;  // torn tail from an interrupted append
        throw StoreError(aof.string() + ": unreadable cache log line " + std::to_string(number));
      }
      const std::string op = j["op"].get<std::string>();
      if (op == "set" && j.contains("v"))
        map_[j["k"].get<std::string>()] = j["v"].get<std::string>();
      else if (op == "del")
        map_.erase(j["k"].get<std::string>());
      else
        throw StoreError(aof.string() + ": unknown cache operation on line " + std::to_string(number));
    }
  }
  aof_.emplace(aof, std::ios::app);
  if (!*aof_) throw StoreError("cannot open cache log " + aof.string());
}

void KvCache::log(const char* op, const std::string& key, const std::string* value) {
  if (!aof_) return;
  nlohmann::json j{{"op", op}, {"k", key}};
  if (value) j["v"] = *value;
  *aof_ << j.dump() << '\n';
  aof_->flush();
}

void KvCache::set(const std::string& key, const std::string& value) {
  std::unique_lock lock(mutex_);
  auto [it, inserted] = map_.try_emplace(key, value);
  if (!inserted) {
    if (it->second == value) return;
    it->second = value;
  }
  log("set", key, &value);
}

std::optional<std::string> KvCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void KvCache::erase(const std::string& key) {
  std::unique_lock lock(mutex_);
  if (map_.erase(key) == 0) return;
  log("del", key, nullptr);
}

std::vector<std::pair<std::string, std::string>> KvCache::scan(const std::string& prefix) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = map_.lower_bound(prefix); it != map_.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it)
    out.emplace_back(it->first, it->second);
  return out;
}

std::size_t KvCache::size() const {
  std::shared_lock lock(mutex_);
  return map_.size();
}

}  // namespace tilecast::signaling
