#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tilecast/kv_cache.hpp"
#include "tilecast/signal_message.hpp"
#include "tilecast/store.hpp"

namespace tilecast::signaling {

using Clock = std::chrono::steady_clock;

// Transport seen by the hub. send_text and close must be thread safe.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send_text(const std::string& text) = 0;
  virtual void close() = 0;
  virtual std::string peer_ip() const = 0;
  virtual int peer_port() const = 0;
};

struct HubConfig {
  std::chrono::milliseconds call_timeout{15000};
  std::chrono::milliseconds heartbeat_interval{1000};
  int stale_after_beats = 5;
};

struct OnlineUser {
  std::string nickname;
  std::string uuid;
  std::string stream_address;
  std::string state;
  friend bool operator==(const OnlineUser&, const OnlineUser&) = default;
};

// Cache key helpers; the HTTP API writes name:<uuid> from /random_name.
std::string state_key(const std::string& uuid);
std::string stream_key(const std::string& uuid);
std::string name_key(const std::string& uuid);

// Users whose cached state is anything but Offline, sorted by uuid.
std::vector<OnlineUser> online_users(const KvCache& cache);

/// Registry of live connections keyed by uuid, call routing and the
/// per-call timers. Every entry point runs under one lock; frames are sent
/// after the lock is released.
class Hub {
 public:
  using ConnId = std::uint64_t;

  Hub(HubConfig config, Store& store, KvCache& cache, Clock::time_point now = Clock::now());

  ConnId on_connect(std::shared_ptr<Connection> conn, Clock::time_point now);
  void on_text(ConnId id, const std::string& text, Clock::time_point now);
  // Idempotent.
  void on_disconnect(ConnId id, Clock::time_point now);
  // Fires call timeouts and evicts stale connections.
  void tick(Clock::time_point now);

  // Users whose cached state is anything but Offline, sorted by uuid.
  std::vector<OnlineUser> online() const;
  std::optional<UserState> state_of(const std::string& uuid) const;
  bool registered(const std::string& uuid) const;
  std::size_t pending_calls() const;
  const HubConfig& config() const { return config_; }

 private:
  struct Peer {
    std::shared_ptr<Connection> conn;
    std::string uuid;  // empty until the first frame
    Clock::time_point last_seen;
  };
  struct PendingCall {
    SignalMessage request;  // as forwarded to the callee
    Clock::time_point deadline;
  };
  struct Outgoing {
    std::shared_ptr<Connection> conn;
    std::string text;
    bool close_after = false;
  };
  using Outbox = std::vector<Outgoing>;

  void register_peer(ConnId id, Peer& peer, const std::string& text, Outbox& out);
  void handle_call(Peer& peer, SignalMessage msg, Outbox& out, Clock::time_point now);
  void handle_call_response(Peer& peer, SignalMessage msg, Outbox& out);
  void drop_peer(ConnId id, Outbox& out);
  void send_to_uuid(const std::string& uuid, const std::string& text, Outbox& out);
  void set_state(const std::string& uuid, UserState s);
  static void flush(Outbox& out);

  HubConfig config_;
  Store& store_;
  KvCache& cache_;
  mutable std::mutex mutex_;
  ConnId next_id_ = 1;
  std::map<ConnId, Peer> peers_;
  std::map<std::string, ConnId> by_uuid_;
  std::map<std::pair<std::string, std::string>, PendingCall> calls_;  // (caller, callee)
  std::map<std::string, std::string> chatting_with_;
  // Users restored from the cache at startup as not Offline, with the time by
  // which they must reconnect.
  std::map<std::string, Clock::time_point> restored_;
};

}  // namespace tilecast::signaling
