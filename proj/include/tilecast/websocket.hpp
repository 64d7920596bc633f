#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tilecast/net.hpp"
#include "tilecast/signaling_hub.hpp"

namespace tilecast::ws {

using Bytes = std::vector<std::uint8_t>;

enum class Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

// base64(SHA-1(key + RFC 6455 GUID)).
std::string accept_key(std::string_view client_key);

struct Frame {
  bool fin = true;
  Opcode opcode = Opcode::text;
  bool masked = false;
  Bytes payload;  // unmasked
};

// Client frames must be masked (mask != nullopt); server frames must not.
Bytes encode_frame(Opcode op, std::span<const std::uint8_t> payload, std::optional<std::array<std::uint8_t, 4>> mask,
                   bool fin = true);

// Incremental frame decoder. Throws ProtocolError on reserved bits, unknown
// opcodes, oversized or fragmented control frames and payloads above the limit.
class FrameParser {
 public:
  explicit FrameParser(std::size_t max_payload = 1 << 20) : max_payload_(max_payload) {}
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Frame> next();

 private:
  std::size_t max_payload_;
  Bytes buffer_;
};

/// Signaling socket server: HTTP upgrade, then one reader thread per
/// connection feeding complete text messages to the hub. A ticker thread
/// drives call timeouts and staleness.
class Server {
 public:
  Server(std::string host, std::uint16_t port, signaling::Hub& hub);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve(std::shared_ptr<net::Fd> fd, std::string peer, std::uint16_t peer_port);

  std::string host_;
  signaling::Hub& hub_;
  net::Fd listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread tick_thread_;
  std::mutex mutex_;
  struct Worker {
    std::thread thread;
    std::shared_ptr<net::Fd> fd;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Worker> workers_;
};

// Minimal blocking client used by tests and the command line tool.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port, const std::string& path = "/");
  ~Client();

  void send_text(const std::string& text);
  // Next text message; nullopt on timeout. Throws NetError once the server closed.
  std::optional<std::string> recv_text(net::Millis timeout);
  void close();
  bool closed() const { return closed_; }

 private:
  net::Fd fd_;
  FrameParser parser_;
  std::string partial_;
  bool closed_ = false;
  std::mt19937 rng_{std::random_device{}()};
};

}  // namespace tilecast::ws
