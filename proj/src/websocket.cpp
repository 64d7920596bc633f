#include "tilecast/websocket.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <map>

#include "tilecast/errors.hpp"

namespace tilecast::ws {
namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string base64(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

struct HttpHead {
  std::string start_line;
  std::map<std::string, std::string> headers;  // lower-cased names
};

HttpHead parse_head(std::string_view text) {
  HttpHead head;
  std::size_t pos = text.find("\r\n");
  head.start_line = std::string(text.substr(0, pos));
  while (pos != std::string_view::npos && pos + 2 < text.size()) {
    const std::size_t start = pos + 2;
    pos = text.find("\r\n", start);
    const std::string_view line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (line.empty()) break;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ProtocolError("malformed HTTP header line");
    head.headers[lower(std::string(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return head;
}

bool header_has_token(const HttpHead& h, const std::string& name, const std::string& token) {
  const auto it = h.headers.find(name);
  if (it == h.headers.end()) return false;
  const std::string v = lower(it->second);
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    if (trim(std::string_view(v).substr(start, comma - start)) == token) return true;
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return false;
}

// Reads bytes until the blank line ending an HTTP head; leftover bytes go to `rest`.
std::string read_head(const net::Fd& fd, net::Millis timeout, Bytes& rest) {
  std::string buf;
  std::vector<std::uint8_t> chunk(2048);
  for (;;) {
    const auto end = buf.find("\r\n\r\n");
    if (end != std::string::npos) {
      rest.assign(buf.begin() + static_cast<std::ptrdiff_t>(end + 4), buf.end());
      return buf.substr(0, end + 4);
    }
    if (buf.size() > 16384) throw ProtocolError("HTTP head too large");
    const auto n = net::recv_some(fd, chunk, timeout);
    if (!n) throw NetError("timed out during the WebSocket handshake");
    if (*n == 0) throw NetError("peer closed during the WebSocket handshake");
    buf.append(reinterpret_cast<const char*>(chunk.data()), *n);
  }
}

class WsConnection final : public signaling::Connection {
 public:
  WsConnection(std::shared_ptr<net::Fd> fd, std::string ip, int port) : fd_(std::move(fd)), ip_(std::move(ip)), port_(port) {}

  void send_text(const std::string& text) override { send(Opcode::text, text); }
  void send(Opcode op, std::string_view payload) {
    std::lock_guard lock(write_mutex_);
    if (closed_) return;
    net::send_all(*fd_, encode_frame(op, std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()), std::nullopt));
  }
  void close() override {
    std::lock_guard lock(write_mutex_);
    if (closed_) return;
    closed_ = true;
    try {
      const std::uint8_t normal[2] = {0x03, 0xE8};  // 1000
      net::send_all(*fd_, encode_frame(Opcode::close, normal, std::nullopt));
    } catch (const NetError&) {
    }
    fd_->shutdown();
  }
  std::string peer_ip() const override { return ip_; }
  int peer_port() const override { return port_; }

 private:
  std::shared_ptr<net::Fd> fd_;
  std::string ip_;
  int port_;
  std::mutex write_mutex_;
  bool closed_ = false;
};

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string input = std::string(client_key) + std::string(kGuid);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr) != 1) throw NetError("SHA-1 failed");
  return base64(std::span(digest, len));
}

Bytes encode_frame(Opcode op, std::span<const std::uint8_t> payload, std::optional<std::array<std::uint8_t, 4>> mask, bool fin) {
  Bytes out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<std::uint8_t>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  if (payload.size() < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | payload.size()));
  } else if (payload.size() <= 0xFFFF) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(payload.size()));
  } else {
    out.push_back(mask_bit | 127);
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(payload.size()) >> s));
  }
  if (mask) {
    out.insert(out.end(), mask->begin(), mask->end());
    for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ (*mask)[i % 4]);
  } else {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

void FrameParser::feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<Frame> FrameParser::next() {
  if (buffer_.size() < 2) return std::nullopt;
  const std::uint8_t b0 = buffer_[0], b1 = buffer_[1];
  if (b0 & 0x70) throw ProtocolError("reserved WebSocket bits set");
  const auto op = static_cast<Opcode>(b0 & 0x0F);
  const bool control = (b0 & 0x08) != 0;
  switch (op) {
    case Opcode::continuation:
    case Opcode::text:
    case Opcode::binary:
    case Opcode::close:
    case Opcode::ping:
    case Opcode::pong:
      break;
    default:
      throw ProtocolError("unknown WebSocket opcode");
  }
  const bool fin = (b0 & 0x80) != 0;
  const bool masked = (b1 & 0x80) != 0;
  std::uint64_t len = b1 & 0x7F;
  std::size_t at = 2;
  if (len == 126) {
    if (buffer_.size() < 4) return std::nullopt;
    len = (std::uint64_t{buffer_[2]} << 8) | buffer_[3];
    at = 4;
  } else if (len == 127) {
    if (buffer_.size() < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | buffer_[2 + i];
    at = 10;
  }
  if (control && (len > 125 || !fin)) throw ProtocolError("invalid WebSocket control frame");
  if (len > max_payload_) throw ProtocolError("WebSocket payload too large");
  std::array<std::uint8_t, 4> key{};
  if (masked) {
    if (buffer_.size() < at + 4) return std::nullopt;
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(at), 4, key.begin());
    at += 4;
  }
  if (buffer_.size() < at + len) return std::nullopt;
  Frame f;
  f.fin = fin;
  f.opcode = op;
  f.masked = masked;
  f.payload.assign(buffer_.begin() + static_cast<std::ptrdiff_t>(at), buffer_.begin() + static_cast<std::ptrdiff_t>(at + len));
  if (masked)
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= key[i % 4];
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(at + len));
  return f;
}

// ---- server ----

Server::Server(std::string host, std::uint16_t port, signaling::Hub& hub)
    : host_(std::move(host)), hub_(hub), listener_(net::tcp_listen(host_, port)), port_(net::local_port(listener_)) {}

Server::~Server() { stop(); }

void Server::start() {
  if (running_.exchange(true)) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
  tick_thread_ = std::thread([this] {
    while (running_) {
      hub_.tick(signaling::Clock::now());
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  spdlog::info("signaling: websocket on {}:{}", host_, port_);
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  if (tick_thread_.joinable()) tick_thread_.join();
  std::list<Worker> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.fd->shutdown();
  for (auto& w : workers)
    if (w.thread.joinable()) w.thread.join();
}

void Server::accept_loop() {
  while (running_) {
    std::string peer;
    std::uint16_t peer_port = 0;
    std::optional<net::Fd> fd;
    try {
      fd = net::tcp_accept(listener_, net::Millis(100), &peer, &peer_port);
    } catch (const NetError& e) {
      spdlog::warn("signaling: accept failed: {}", e.what());
      continue;
    }
    std::lock_guard lock(mutex_);
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
    if (!fd) continue;
    Worker w;
    w.fd = std::make_shared<net::Fd>(std::move(*fd));
    w.done = std::make_shared<std::atomic<bool>>(false);
    w.thread = std::thread([this, fd = w.fd, done = w.done, peer, peer_port] {
      try {
        serve(fd, peer, peer_port);
      } catch (const std::exception& e) {
        spdlog::debug("signaling: connection from {} ended: {}", peer, e.what());
      }
      done->store(true);
    });
    workers_.push_back(std::move(w));
  }
}

void Server::serve(std::shared_ptr<net::Fd> fd, std::string peer, std::uint16_t peer_port) {
  Bytes rest;
  const HttpHead head = parse_head(read_head(*fd, net::Millis(5000), rest));
  const auto key = head.headers.find("sec-websocket-key");
  if (head.start_line.rfind("GET ", 0) != 0 || !header_has_token(head, "upgrade", "websocket") ||
      !header_has_token(head, "connection", "upgrade") || key == head.headers.end() ||
      head.headers.count("sec-websocket-version") == 0 || head.headers.at("sec-websocket-version") != "13") {
    net::send_all(*fd, std::string_view("HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"));
    return;
  }
  net::send_all(*fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
                         accept_key(key->second) + "\r\n\r\n");

  auto conn = std::make_shared<WsConnection>(fd, peer, peer_port);
  const auto id = hub_.on_connect(conn, signaling::Clock::now());
  FrameParser parser;
  parser.feed(rest);
  std::string message;
  bool in_message = false;
  std::vector<std::uint8_t> chunk(8192);
  try {
    while (running_) {
      while (auto f = parser.next()) {
        if (!f->masked) throw ProtocolError("client frames must be masked");
        switch (f->opcode) {
          case Opcode::ping:
            conn->send(Opcode::pong, std::string_view(reinterpret_cast<const char*>(f->payload.data()), f->payload.size()));
            break;
          case Opcode::pong:
            break;
          case Opcode::close:
            conn->close();
            hub_.on_disconnect(id, signaling::Clock::now());
            return;
          case Opcode::text:
          case Opcode::binary:
            if (in_message) throw ProtocolError("new message before the previous one finished");
            message.assign(f->payload.begin(), f->payload.end());
            in_message = !f->fin;
            if (f->fin) hub_.on_text(id, message, signaling::Clock::now());
            break;
          case Opcode::continuation:
            if (!in_message) throw ProtocolError("continuation without a message");
            message.append(f->payload.begin(), f->payload.end());
            if (message.size() > (1u << 20)) throw ProtocolError("message too large");
            if (f->fin) {
              in_message = false;
              hub_.on_text(id, message, signaling::Clock::now());
            }
            break;
        }
      }
      const auto n = net::recv_some(*fd, chunk, net::Millis(200));
      if (!n) continue;
      if (*n == 0) break;
      parser.feed(std::span(chunk.data(), *n));
    }
  } catch (const std::exception& e) {
    spdlog::debug("signaling: dropping {}: {}", peer, e.what());
  }
  conn->close();
  hub_.on_disconnect(id, signaling::Clock::now());
}

// ---- client ----

Client::Client(const std::string& host, std::uint16_t port, const std::string& path) : fd_(net::tcp_connect(host, port)) {
  std::array<std::uint8_t, 16> nonce{};
  for (auto& b : nonce) b = static_cast<std::uint8_t>(rng_());
  const std::string key = base64(nonce);
  net::send_all(fd_, "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                         "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                         "\r\nSec-WebSocket-Version: 13\r\n\r\n");
  Bytes rest;
  const HttpHead head = parse_head(read_head(fd_, net::Millis(5000), rest));
  if (head.start_line.find(" 101 ") == std::string::npos) throw NetError("WebSocket upgrade refused: " + head.start_line);
  const auto accept = head.headers.find("sec-websocket-accept");
  if (accept == head.headers.end() || accept->second != accept_key(key)) throw NetError("bad Sec-WebSocket-Accept");
  parser_.feed(rest);
}

Client::~Client() {
  try {
    close();
  } catch (...) {
  }
}

void Client::send_text(const std::string& text) {
  std::array<std::uint8_t, 4> mask{};
  for (auto& b : mask) b = static_cast<std::uint8_t>(rng_());
  net::send_all(fd_, encode_frame(Opcode::text, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), mask));
}

std::optional<std::string> Client::recv_text(net::Millis timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::vector<std::uint8_t> chunk(8192);
  for (;;) {
    while (auto f = parser_.next()) {
      if (f->opcode == Opcode::close) {
        closed_ = true;
        throw NetError("server closed the WebSocket");
      }
      if (f->opcode == Opcode::ping || f->opcode == Opcode::pong) continue;
      partial_.append(f->payload.begin(), f->payload.end());
      if (f->fin) {
        std::string out;
        out.swap(partial_);
        return out;
      }
    }
    if (closed_) throw NetError("WebSocket is closed");
    const auto left = std::chrono::duration_cast<net::Millis>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    const auto n = net::recv_some(fd_, chunk, left);
    if (!n) return std::nullopt;
    if (*n == 0) {
      closed_ = true;
      throw NetError("server closed the connection");
    }
    parser_.feed(std::span(chunk.data(), *n));
  }
}

void Client::close() {
  if (closed_ || !fd_.valid()) return;
  closed_ = true;
  std::array<std::uint8_t, 4> mask{1, 2, 3, 4};
  const std::uint8_t normal[2] = {0x03, 0xE8};
  try {
    net::send_all(fd_, encode_frame(Opcode::close, normal, mask));
  } catch (const NetError&) {
  }
  fd_.shutdown();
}

}  // namespace tilecast::ws
