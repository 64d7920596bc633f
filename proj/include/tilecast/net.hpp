#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace tilecast::net {

// Owning POSIX file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(other.release()) {}
  Fd& operator=(Fd&& other) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset();
  // shutdown(2) both directions; wakes a thread blocked in accept/recv.
  void shutdown();

 private:
  int fd_ = -1;
};

using Millis = std::chrono::milliseconds;

Fd tcp_listen(const std::string& host, std::uint16_t port, int backlog = 16);
Fd tcp_connect(const std::string& host, std::uint16_t port, Millis timeout = Millis(3000));
// Returns nullopt on timeout.
std::optional<Fd> tcp_accept(const Fd& listener, Millis timeout, std::string* peer_host = nullptr,
                           std::uint16_t* peer_port = nullptr);

Fd udp_bind(const std::string& host, std::uint16_t port);
// RTP/RTCP style pair on (even, even + 1); port 0 picks a free pair.
std::pair<Fd, Fd> udp_bind_pair(const std::string& host, std::uint16_t even_port = 0);
std::uint16_t local_port(const Fd& fd);

void send_all(const Fd& fd, std::span<const std::uint8_t> bytes);
void send_all(const Fd& fd, std::string_view text);

// nullopt on timeout, 0 on orderly close.
std::optional<std::size_t> recv_some(const Fd& fd, std::span<std::uint8_t> buffer, Millis timeout);

void send_to(const Fd& fd, const std::string& host, std::uint16_t port, std::span<const std::uint8_t> bytes);
// nullopt on timeout; otherwise the datagram length.
std::optional<std::size_t> recv_from(const Fd& fd, std::span<std::uint8_t> buffer, Millis timeout);

}  // namespace tilecast::net
