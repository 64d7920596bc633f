#include "tilecast/rtsp_server.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <regex>
#include <tuple>

#include "tilecast/errors.hpp"

namespace tilecast::rtsp {
namespace {

constexpr std::string_view kPublic = "OPTIONS, DESCRIBE, SETUP, PLAY, PAUSE, TEARDOWN, GET_PARAMETER";

bool path_matches(const std::string& path, const std::string& stream) {
  return path == stream || path.rfind(stream + "/", 0) == 0;
}

// Session header value without parameters such as ";timeout=60".
std::string session_token(const std::string& value) { return value.substr(0, value.find(';')); }

std::uint64_t unix_now_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

}  // namespace

std::optional<rtp::SenderReport> sender_report(const Session& session, std::uint64_t wall_us) {
  if (session.state != SessionState::playing) return std::nullopt;
  rtp::SenderReport sr;
  sr.ssrc = session.ssrc;
  sr.ntp_timestamp = rtp::unix_us_to_ntp(wall_us);
  sr.rtp_timestamp = session.last_rtp_timestamp;
  sr.packet_count = session.packet_count;
  sr.octet_count = session.octet_count;
  return sr;
}

Service::Service(ServiceConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
  if (!(config_.fps > 0)) throw ConfigError("stream fps must be positive");
}

void Service::set_server_ports(std::uint16_t rtp, std::uint16_t rtcp) {
  std::lock_guard lock(mutex_);
  config_.server_rtp_port = rtp;
  config_.server_rtcp_port = rtcp;
}

std::string Service::new_session_id() {
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llX", static_cast<unsigned long long>(rng_()));
    if (!sessions_.contains(buf)) return buf;
  }
}

Message Service::handle(const Message& request, const std::string& peer_host, Clock::time_point now, int connection) {
  std::lock_guard lock(mutex_);
  return handle_locked(request, peer_host, now, connection);
}

Message Service::handle_text(std::string_view text, const std::string& peer_host, Clock::time_point now,
                             int connection) {
  try {
    return handle(parse_request(text), peer_host, now, connection);
  } catch (const ProtocolError& e) {
    static const std::regex cseq_re(R"((?:^|\r\n)[Cc][Ss][Ee][Qq]\s*:\s*(\d+))");
    std::match_results<std::string_view::const_iterator> m;
    Message resp = Message::response(400, 0);
    if (std::regex_search(text.begin(), text.end(), m, cseq_re))
      resp.set_header("CSeq", m[1].str());
    else
      resp.headers.clear();
    resp.body.clear();
    return resp;
  }
}

Message Service::handle_locked(const Message& req, const std::string& peer_host, Clock::time_point now,
                               int connection) {
  const long cseq = req.cseq().value_or(0);
  auto reply = [&](int status) {
    Message r = Message::response(status, cseq);
    r.set_header("Server", "tilecast");
    return r;
  };

  if (req.version != kVersion) return reply(401);

  std::optional<Url> url;
  if (req.uri != "*") {
    try {
      url = Url::parse(req.uri);
    } catch (const ProtocolError&) {
      return reply(400);
    }
    if (!path_matches(url->path, config_.stream_path)) return reply(404);
  }

  Session* session = nullptr;
  if (const auto h = req.header("Session")) {
    const auto it = sessions_.find(session_token(*h));
    if (it == sessions_.end()) return reply(454);
    session = &it->second;
    session->last_activity = now;
  }
  auto session_header = [&](Message& r, const Session& s) {
    r.set_header("Session", s.id + ";timeout=" + std::to_string(config_.session_timeout.count()));
  };
  auto move_to = [&](Session& s, SessionState to) {
    if (!transition_allowed(s.state, to)) return false;
    s.state = to;
    return true;
  };

  const std::string& m = req.method;
  if (m == "OPTIONS") {
    Message r = reply(200);
    r.set_header("Public", std::string(kPublic));
    return r;
  }
  if (m == "DESCRIBE") {
    if (!url) return reply(400);
    if (!config_.user.empty() && (url->user != config_.user || url->password != config_.password)) {
      Message r = reply(401);
      r.set_header("WWW-Authenticate", "Basic realm=\"tilecast\"");
      return r;
    }
    Sdp sdp;
    sdp.session_id = 1;
    sdp.origin_host = config_.origin_host;
    sdp.framerate = config_.fps;
    sdp.width = config_.width;
    sdp.height = config_.height;
    Message r = reply(200);
    r.set_header("Content-Base", url->str(false) + "/");
    r.set_header("Content-Type", "application/sdp");
    r.body = sdp.str();
    return r;
  }
  if (m == "SETUP") {
    if (!url) return reply(400);
    if (session) return reply(455);  // one track per session
    const auto th = req.header("Transport");
    if (!th) return reply(400);
    Transport t;
    try {
      t = Transport::parse(*th);
    } catch (const ProtocolError&) {
      return reply(400);
    }
    if (t.profile != "RTP/AVP" && t.profile != "RTP/AVP/UDP") return reply(400);
    if (!t.unicast || t.client_rtp == 0 || t.client_rtp % 2 != 0 || t.client_rtcp != t.client_rtp + 1)
      return reply(400);

    Session s;
    s.id = new_session_id();
    s.connection = connection;
    s.client_host = peer_host;
    s.client_rtp_port = t.client_rtp;
    s.client_rtcp_port = t.client_rtcp;
    s.ssrc = static_cast<std::uint32_t>(rng_());
    s.packetizer = rtp::Packetizer(s.ssrc, static_cast<std::uint16_t>(rng_()), static_cast<std::uint32_t>(rng_()), config_.fps);
    s.last_rtp_timestamp = s.packetizer.timestamp_base();
    s.last_activity = now;
    move_to(s, SessionState::ready);

    Transport out = t;
    out.profile = "RTP/AVP";
    out.server_rtp = config_.server_rtp_port;
    out.server_rtcp = config_.server_rtcp_port;
    out.ssrc = s.ssrc;
    Message r = reply(200);
    r.set_header("Transport", out.str());
    session_header(r, s);
    sessions_.emplace(s.id, std::move(s));
    return r;
  }
  if (m == "PLAY" || m == "PAUSE" || m == "TEARDOWN") {
    if (!session) return reply(454);
    const SessionState to = m == "PLAY" ? SessionState::playing : m == "PAUSE" ? SessionState::paused : SessionState::torn_down;
    if (!move_to(*session, to)) return reply(455);
    Message r = reply(200);
    session_header(r, *session);
    if (m == "PLAY") {
      session->last_report = now;
      r.set_header("Range", "npt=0.000-");
      r.set_header("RTP-Info", "url=" + (url ? url->str(false) : std::string("*")) +
                                   ";seq=" + std::to_string(session->packetizer.next_sequence()) +
                                   ";rtptime=" + std::to_string(session->last_rtp_timestamp));
    }
    if (m == "TEARDOWN") sessions_.erase(session->id);
    return r;
  }
  if (m == "GET_PARAMETER") {
    Message r = reply(200);
    if (session) session_header(r, *session);
    return r;
  }
  Message r = reply(405);
  r.set_header("Allow", std::string(kPublic));
  return r;
}

std::vector<Datagram> Service::on_frame(const EncodedFrame& frame, Clock::time_point now, std::uint64_t wall_us) {
  std::lock_guard lock(mutex_);
  std::vector<Datagram> out;
  std::optional<rtp::Bytes> bytes;
  for (auto& [id, s] : sessions_) {
    if (s.state != SessionState::playing) continue;
    if (!bytes) bytes = frame.serialize();
    for (const auto& p : s.packetizer.packetize(*bytes, frame.frame_index)) {
      s.last_rtp_timestamp = p.timestamp;
      ++s.packet_count;
      s.octet_count += static_cast<std::uint32_t>(p.payload.size());
      out.push_back({false, s.client_host, s.client_rtp_port, p.serialize()});
    }
    if (now - s.last_report >= config_.report_interval) {
      s.last_report = now;
      if (const auto sr = sender_report(s, wall_us)) out.push_back({true, s.client_host, s.client_rtcp_port, sr->serialize()});
    }
  }
  return out;
}

std::vector<std::string> Service::expire(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::vector<std::string> gone;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second.last_activity > config_.session_timeout) {
      gone.push_back(it->first);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
  return gone;
}

void Service::close_connection(int connection) {
  std::lock_guard lock(mutex_);
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.connection == connection; });
}

std::optional<Session> Service::session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::size_t Service::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

// ---- socket wrapper ----

Server::Server(ServiceConfig config, std::string bind_host, std::uint16_t rtsp_port, std::uint16_t rtp_port_base)
    : service_(std::move(config)), bind_host_(std::move(bind_host)) {
  if (rtp_port_base % 2 != 0) throw ConfigError("rtp_port_base must be even");
  listener_ = net::tcp_listen(bind_host_, rtsp_port);
  port_ = net::local_port(listener_);
  std::tie(rtp_socket_, rtcp_socket_) = net::udp_bind_pair(bind_host_, rtp_port_base);
  service_.set_server_ports(net::local_port(rtp_socket_), net::local_port(rtcp_socket_));
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_.exchange(true)) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
  spdlog::info("rtsp: listening on {}:{} (rtp {}-{})", bind_host_, port_, service_.config().server_rtp_port,
               service_.config().server_rtcp_port);
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<Connection> conns;
  {
    std::lock_guard lock(connections_mutex_);
    conns.swap(connections_);
  }
  for (auto& c : conns) c.fd->shutdown();
  for (auto& c : conns)
    if (c.thread.joinable()) c.thread.join();
}

std::string Server::url(bool with_credentials) const {
  Url u;
  u.host = !service_.config().origin_host.empty() ? service_.config().origin_host
           : bind_host_ == "0.0.0.0"                 ? "127.0.0.1"
                                                     : bind_host_;
  u.port = port_;
  u.path = service_.config().stream_path;
  if (with_credentials) {
    u.user = service_.config().user;
    u.password = service_.config().password;
  }
  return u.str(with_credentials);
}

void Server::accept_loop() {
  while (running_) {
    std::string peer;
    std::optional<net::Fd> fd;
    try {
      fd = net::tcp_accept(listener_, net::Millis(100), &peer);
    } catch (const NetError& e) {
      spdlog::warn("rtsp: accept failed: {}", e.what());
      continue;
    }
    std::lock_guard lock(connections_mutex_);
    // Reap finished connection threads.
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
    if (!fd) continue;
    const int id = next_connection_++;
    Connection c;
    c.fd = std::make_shared<net::Fd>(std::move(*fd));
    c.done = std::make_shared<std::atomic<bool>>(false);
    c.thread = std::thread([this, fd = c.fd, done = c.done, peer, id] {
      try {
        connection_loop(*fd, peer, id);
      } catch (const std::exception& e) {
        spdlog::warn("rtsp: connection {} ended: {}", id, e.what());
      }
      service_.close_connection(id);
      done->store(true);
    });
    connections_.push_back(std::move(c));
  }
}

void Server::connection_loop(const net::Fd& fd, const std::string& peer, int id) {
  std::string buffer;
  std::vector<std::uint8_t> chunk(4096);
  while (running_) {
    const auto n = net::recv_some(fd, chunk, net::Millis(200));
    if (!n) continue;
    if (*n == 0) break;
    buffer.append(reinterpret_cast<const char*>(chunk.data()), *n);
    for (;;) {
      std::optional<std::size_t> len;
      try {
        len = complete_length(buffer);
      } catch (const ProtocolError&) {
        net::send_all(fd, Message::response(400, 0).serialize());
        return;
      }
      if (!len) break;
      const Message resp = service_.handle_text(std::string_view(buffer).substr(0, *len), peer, Clock::now(), id);
      buffer.erase(0, *len);
      net::send_all(fd, resp.serialize());
    }
  }
}

void Server::publish(const EncodedFrame& frame) {
  const auto now = Clock::now();
  for (const auto& id : service_.expire(now)) spdlog::info("rtsp: session {} timed out", id);
  for (const auto& d : service_.on_frame(frame, now, unix_now_us())) {
    net::send_to(d.rtcp ? rtcp_socket_ : rtp_socket_, d.host, d.port, d.bytes);
    if (!d.rtcp) packets_sent_.fetch_add(1);
  }
}

}  // namespace tilecast::rtsp
