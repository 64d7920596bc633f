#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tilecast/block_codec.hpp"
#include "tilecast/net.hpp"
#include "tilecast/rtp.hpp"
#include "tilecast/rtsp_message.hpp"

namespace tilecast::rtsp {

using Clock = std::chrono::steady_clock;

struct ServiceConfig {
  std::string user;
  std::string password;
  std::string stream_path = "/live";
  std::string origin_host = "127.0.0.1";
  double fps = 30.0;
  int width = 0;
  int height = 0;
  std::uint16_t server_rtp_port = 0;
  std::uint16_t server_rtcp_port = 0;
  std::chrono::seconds session_timeout{60};
  std::chrono::seconds report_interval{5};
};

struct Session {
  std::string id;
  SessionState state = SessionState::init;
  int connection = 0;
  std::string client_host;
  std::uint16_t client_rtp_port = 0;
  std::uint16_t client_rtcp_port = 0;
  std::uint32_t ssrc = 0;
  rtp::Packetizer packetizer{0, 0, 0, 30.0};
  std::uint32_t last_rtp_timestamp = 0;
  std::uint32_t packet_count = 0;
  std::uint32_t octet_count = 0;
  Clock::time_point last_activity{};
  Clock::time_point last_report{};
};

// Minimal SR for a session; nullopt unless it is PLAYING.
std::optional<rtp::SenderReport> sender_report(const Session& session, std::uint64_t wall_us);

struct Datagram {
  bool rtcp = false;
  std::string host;
  std::uint16_t port = 0;
  rtp::Bytes bytes;
};

/// Socket-free RTSP request handling and per-session RTP emission. Thread
/// safe: every member takes the session-table lock.
class Service {
 public:
  explicit Service(ServiceConfig config, std::uint64_t seed = std::random_device{}());

  const ServiceConfig& config() const { return config_; }
  void set_server_ports(std::uint16_t rtp, std::uint16_t rtcp);

  Message handle(const Message& request, const std::string& peer_host, Clock::time_point now, int connection = 0);
  // Parses then handles; malformed text gets a 400 that still echoes any CSeq found.
  Message handle_text(std::string_view text, const std::string& peer_host, Clock::time_point now,
                      int connection = 0);

  // RTP packets (and due sender reports) for every PLAYING session.
  std::vector<Datagram> on_frame(const EncodedFrame& frame, Clock::time_point now, std::uint64_t wall_us);

  // Drops sessions idle for longer than the timeout; returns their ids.
  std::vector<std::string> expire(Clock::time_point now);
  // Drops sessions created over `connection`.
  void close_connection(int connection);

  std::optional<Session> session(const std::string& id) const;
  std::size_t session_count() const;

 private:
  Message handle_locked(const Message& request, const std::string& peer_host, Clock::time_point now, int connection);
  std::string new_session_id();

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::mt19937_64 rng_;
};

/// TCP control listener (one thread per connection) plus a shared UDP socket
/// pair for RTP and RTCP. publish() is called from the compose loop.
class Server {
 public:
  // rtp_port_base = 0 picks an ephemeral even/odd pair.
  Server(ServiceConfig config, std::string bind_host, std::uint16_t rtsp_port, std::uint16_t rtp_port_base);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();

  std::uint16_t port() const { return port_; }
  std::uint16_t rtp_port() const { return service_.config().server_rtp_port; }
  // rtsp://[user:pass@]host:port/path
  std::string url(bool with_credentials) const;

  void publish(const EncodedFrame& frame);
  Service& service() { return service_; }

  std::uint64_t packets_sent() const { return packets_sent_.load(); }

 private:
  void accept_loop();
  void connection_loop(const net::Fd& fd, const std::string& peer, int id);

  Service service_;
  std::string bind_host_;
  net::Fd listener_;
  net::Fd rtp_socket_;
  net::Fd rtcp_socket_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex connections_mutex_;
  struct Connection {
    std::thread thread;
    std::shared_ptr<net::Fd> fd;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Connection> connections_;
  int next_connection_ = 1;
  std::atomic<std::uint64_t> packets_sent_{0};
};

}  // namespace tilecast::rtsp
