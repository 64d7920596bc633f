#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tilecast/errors.hpp"

namespace tilecast::signaling {

struct UserRecord {
  long id = 0;
  std::string name;
  std::string password;
  std::string email;
  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct UserNetInfo {
  long id = 0;
  std::string uuid;
  std::string name;
  std::string ip;
  int port = 0;
  std::string state;
  friend bool operator==(const UserNetInfo&, const UserNetInfo&) = default;
};

struct PublishedEntry {
  long id = 0;
  std::string time;  // ISO-8601 UTC, millisecond precision
  std::string name;
  std::string title;
  std::string img_url;
  std::string ip;
  int port = 0;
  bool is_online = true;
  friend bool operator==(const PublishedEntry&, const PublishedEntry&) = default;
};

// Uniqueness violation; `column()` is "name" or "email".
class DuplicateKeyError : public StoreError {
 public:
  explicit DuplicateKeyError(std::string column)
      : StoreError("duplicate " + column), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// Three append-only JSON-lines tables (user.jsonl, user_net_info.jsonl,
/// published_list.jsonl) under one directory, each mirrored by an in-memory
/// index rebuilt by replaying the files in order.
class Store {
 public:
  // Throws StoreError naming file and line for a row that fails the schema.
  explicit Store(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  // Throws DuplicateKeyError on a taken name or email, StoreError on empty fields.
  UserRecord add_user(const std::string& name, const std::string& password, const std::string& email);
  std::optional<UserRecord> find_user(const std::string& name) const;

  UserNetInfo append_net_info(const std::string& uuid, const std::string& name, const std::string& ip, int port,
                              const std::string& state);
  // Last appended row for `uuid`.
  std::optional<UserNetInfo> current_net_info(const std::string& uuid) const;
  std::vector<UserNetInfo> net_info_rows() const;

  PublishedEntry publish(const std::string& name, const std::string& title, const std::string& img_url,
                         const std::string& ip, int port);
  std::vector<PublishedEntry> published_online() const;

 private:
  struct Log {
    std::filesystem::path path;
    std::ofstream out;
  };
  void append(Log& log, const std::string& line);

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  Log users_log_, net_log_, published_log_;
  std::vector<UserRecord> users_;
  std::map<std::string, std::size_t> user_by_name_;
  std::map<std::string, std::size_t> user_by_email_;
  std::vector<UserNetInfo> net_rows_;
  std::map<std::string, std::size_t> current_net_;
  std::vector<PublishedEntry> published_;
};

std::string utc_timestamp_now();

}  // namespace tilecast::signaling
