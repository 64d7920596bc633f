#include "tilecast/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "tilecast/errors.hpp"

namespace tilecast::net {
namespace {

[[noreturn]] void fail(const std::string& what) { throw NetError(what + ": " + std::strerror(errno)); }

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw NetError("cannot resolve host '" + host + "'");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

// Returns true when `fd` became ready for `events` before the timeout.
bool wait_for(int fd, short events, Millis timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) fail("poll");
  }
}

}  // namespace

Fd& Fd::operator=(Fd&& other) noexcept {
  if (this != &other) {
    reset();
    fd_ = other.release();
  }
  return *this;
}

void Fd::reset() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Fd::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Fd tcp_listen(const std::string& host, std::uint16_t port, int backlog) {
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd.valid()) fail("socket");
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const sockaddr_in addr = resolve(host, port);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    fail("bind tcp " + host + ":" + std::to_string(port));
  if (::listen(fd.get(), backlog) != 0) fail("listen");
  return fd;
}

Fd tcp_connect(const std::string& host, std::uint16_t port, Millis timeout) {
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd.valid()) fail("socket");
  const sockaddr_in addr = resolve(host, port);
  if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) fail("connect " + host + ":" + std::to_string(port));
    if (!wait_for(fd.get(), POLLOUT, timeout)) throw NetError("connect timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      fail("connect " + host + ":" + std::to_string(port));
    }
  }
  const int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  // Back to blocking mode; timeouts are handled with poll.
  const int fl = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, fl & ~O_NONBLOCK);
  return fd;
}

std::optional<Fd> tcp_accept(const Fd& listener, Millis timeout, std::string* peer_host, std::uint16_t* peer_port) {
  if (!wait_for(listener.get(), POLLIN, timeout)) return std::nullopt;
  sockaddr_in peer{};
  socklen_t len = sizeof peer;
  Fd fd(::accept4(listener.get(), reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC));
  if (!fd.valid()) {
    if (errno == EAGAIN || errno == EINTR || errno == ECONNABORTED) return std::nullopt;
    fail("accept");
  }
  const int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  if (peer_host) {
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &peer.sin_addr, buf, sizeof buf);
    *peer_host = buf;
  }
  if (peer_port) *peer_port = ntohs(peer.sin_port);
  return fd;
}

Fd udp_bind(const std::string& host, std::uint16_t port) {
  Fd fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!fd.valid()) fail("socket");
  const int bufsize = 4 << 20;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_RCVBUF, &bufsize, sizeof bufsize);
  const sockaddr_in addr = resolve(host, port);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    fail("bind udp " + host + ":" + std::to_string(port));
  return fd;
}

std::pair<Fd, Fd> udp_bind_pair(const std::string& host, std::uint16_t even_port) {
  if (even_port % 2 != 0) throw ConfigError("UDP port pair must start on an even port");
  if (even_port != 0) return {udp_bind(host, even_port), udp_bind(host, static_cast<std::uint16_t>(even_port + 1))};
  for (int attempt = 0; attempt < 64; ++attempt) {
    Fd probe = udp_bind(host, 0);
    const std::uint16_t p = local_port(probe);
    if (p % 2 != 0 || p == 65534) continue;
    try {
      Fd odd = udp_bind(host, static_cast<std::uint16_t>(p + 1));
      return {std::move(probe), std::move(odd)};
    } catch (const NetError&) {
    }
  }
  throw NetError("could not allocate an even/odd UDP port pair");
}

std::uint16_t local_port(const Fd& fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
  return ntohs(addr.sin_port);
}

void send_all(const Fd& fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd.get(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void send_all(const Fd& fd, std::string_view text) {
  send_all(fd, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::optional<std::size_t> recv_some(const Fd& fd, std::span<std::uint8_t> buffer, Millis timeout) {
  if (!wait_for(fd.get(), POLLIN, timeout)) return std::nullopt;
  for (;;) {
    const ssize_t n = ::recv(fd.get(), buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    fail("recv");
  }
}

void send_to(const Fd& fd, const std::string& host, std::uint16_t port, std::span<const std::uint8_t> bytes) {
  const sockaddr_in addr = resolve(host, port);
  // Loss is tolerated on UDP; ECONNREFUSED from an earlier ICMP is not fatal.
  ::sendto(fd.get(), bytes.data(), bytes.size(), MSG_NOSIGNAL, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
}

std::optional<std::size_t> recv_from(const Fd& fd, std::span<std::uint8_t> buffer, Millis timeout) {
  if (!wait_for(fd.get(), POLLIN, timeout)) return std::nullopt;
  for (;;) {
    const ssize_t n = ::recvfrom(fd.get(), buffer.data(), buffer.size(), 0, nullptr, nullptr);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNREFUSED) return std::nullopt;
    fail("recvfrom");
  }
}

}  // namespace tilecast::net
