#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace tilecast::signaling {

/// Last-write-wins string map shared by the signaling hub and the HTTP API.
/// With an append-only file configured, every effective write is logged as a
/// JSON line and the file is replayed on construction, so cached user state
/// survives a restart. A truncated final line (crash mid-write) is ignored;
/// any other bad line is a StoreError.
class KvCache {
 public:
  KvCache() = default;
  explicit KvCache(std::filesystem::path aof);

  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  void erase(const std::string& key);
  // Sorted (key, value) pairs whose key starts with `prefix`.
  std::vector<std::pair<std::string, std::string>> scan(const std::string& prefix) const;
  std::size_t size() const;

 private:
  void log(const char* op, const std::string& key, const std::string* value);

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string> map_;
  std::optional<std::ofstream> aof_;
};

}  // namespace tilecast::signaling
