#include "tilecast/rtsp_message.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "tilecast/errors.hpp"

namespace tilecast::rtsp {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> to_number(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (eol == std::string_view::npos) break;
    text.remove_prefix(eol + 1);
  }
  return lines;
}

// Splits header block and body; parses headers into `msg`, returns the first line.
std::string_view parse_common(std::string_view text, Message& msg) {
  const auto end = text.find("\r\n\r\n");
  if (end == std::string_view::npos) throw ProtocolError("header block not terminated by an empty line");
  const auto lines = split_lines(text.substr(0, end));
  if (lines.empty() || lines[0].empty()) throw ProtocolError("empty start line");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto colon = lines[i].find(':');
    if (colon == std::string_view::npos || colon == 0) throw ProtocolError("malformed header line");
    msg.headers.emplace_back(std::string(trim(lines[i].substr(0, colon))), std::string(trim(lines[i].substr(colon + 1))));
  }
  msg.body = std::string(text.substr(end + 4));
  if (const auto cl = msg.header("Content-Length")) {
    const auto n = to_number<std::size_t>(*cl);
    if (!n || *n > msg.body.size()) throw ProtocolError("Content-Length does not match the body");
    msg.body.resize(*n);
  }
  return lines[0];
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  for (;;) {
    const auto pos = s.find(sep);
    parts.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) return parts;
    s.remove_prefix(pos + 1);
  }
}

}  // namespace

std::optional<std::string> Message::header(std::string_view name) const {
  for (const auto& [k, v] : headers)
    if (iequals(k, name)) return v;
  return std::nullopt;
}

void Message::set_header(std::string name, std::string value) {
  for (auto& [k, v] : headers)
    if (iequals(k, name)) {
      v = std::move(value);
      return;
    }
  headers.emplace_back(std::move(name), std::move(value));
}

std::optional<long> Message::cseq() const {
  const auto v = header("CSeq");
  if (!v) return std::nullopt;
  return to_number<long>(*v);
}

std::string Message::serialize() const {
  std::string out;
  if (kind == Kind::request)
    out = method + " " + uri + " " + version + "\r\n";
  else
    out = version + " " + std::to_string(status) + " " + reason + "\r\n";
  bool has_length = false;
  for (const auto& [k, v] : headers) {
    if (iequals(k, "Content-Length")) {
      has_length = true;
      out += k + ": " + std::to_string(body.size()) + "\r\n";
    } else {
      out += k + ": " + v + "\r\n";
    }
  }
  if (!body.empty() && !has_length) out += "Content-Length: " + std::to_string(body.size()) + "\r\n";
  out += "\r\n";
  out += body;
  return out;
}

Message Message::request(std::string method, std::string uri, long cseq) {
  Message m;
  m.kind = Kind::request;
  m.method = std::move(method);
  m.uri = std::move(uri);
  m.headers.emplace_back("CSeq", std::to_string(cseq));
  return m;
}

Message Message::response(int status, long cseq) {
  Message m;
  m.kind = Kind::response;
  m.status = status;
  m.reason = std::string(reason_phrase(status));
  m.headers.emplace_back("CSeq", std::to_string(cseq));
  return m;
}

std::string_view reason_phrase(int status) {
  switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 401: return "Unauthorized";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 454: return "Session Not Found";
    case 455: return "Method Not Valid in This State";
    case 500: return "Internal Server Error";
    default: return "Unknown";
  }
}

std::optional<std::size_t> complete_length(std::string_view buffer, std::size_t max_header) {
  const auto end = buffer.find("\r\n\r\n");
  if (end == std::string_view::npos) {
    if (buffer.size() > max_header) throw ProtocolError("header block too large");
    return std::nullopt;
  }
  std::size_t body = 0;
  for (auto line : split_lines(buffer.substr(0, end))) {
    const auto colon = line.find(':');
    if (colon != std::string_view::npos && iequals(trim(line.substr(0, colon)), "Content-Length")) {
      const auto n = to_number<std::size_t>(trim(line.substr(colon + 1)));
      if (!n) throw ProtocolError("bad Content-Length");
      body = *n;
    }
  }
  const std::size_t total = end + 4 + body;
  if (buffer.size() < total) return std::nullopt;
  return total;
}

Message parse_request(std::string_view text) {
  Message msg;
  msg.kind = Message::Kind::request;
  const std::string_view first = parse_common(text, msg);
  const auto parts = split(first, ' ');
  if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty())
    throw ProtocolError("malformed request line");
  if (!std::all_of(parts[0].begin(), parts[0].end(), [](char c) { return std::isupper(static_cast<unsigned char>(c)) || c == '_'; }))
    throw ProtocolError("malformed method token");
  if (parts[2].substr(0, 5) != "RTSP/") throw ProtocolError("malformed protocol version");
  msg.method = std::string(parts[0]);
  msg.uri = std::string(parts[1]);
  msg.version = std::string(parts[2]);
  if (!msg.cseq()) throw ProtocolError("missing or invalid CSeq");
  return msg;
}

Message parse_response(std::string_view text) {
  Message msg;
  msg.kind = Message::Kind::response;
  const std::string_view first = parse_common(text, msg);
  const auto sp1 = first.find(' ');
  if (sp1 == std::string_view::npos) throw ProtocolError("malformed status line");
  const auto sp2 = first.find(' ', sp1 + 1);
  msg.version = std::string(first.substr(0, sp1));
  const auto code = to_number<int>(first.substr(sp1 + 1, sp2 == std::string_view::npos ? std::string_view::npos : sp2 - sp1 - 1));
  if (!code || msg.version.substr(0, 5) != "RTSP/") throw ProtocolError("malformed status line");
  msg.status = *code;
  msg.reason = sp2 == std::string_view::npos ? "" : std::string(first.substr(sp2 + 1));
  return msg;
}

std::string Url::str(bool with_credentials) const {
  std::string out = "rtsp://";
  if (with_credentials && has_credentials()) out += user + ":" + password + "@";
  out += host + ":" + std::to_string(port) + path;
  return out;
}

Url Url::parse(std::string_view text) {
  constexpr std::string_view scheme = "rtsp://";
  if (text.substr(0, scheme.size()) != scheme) throw ProtocolError("URL must start with rtsp://");
  text.remove_prefix(scheme.size());
  Url url;
  const auto slash = text.find('/');
  std::string_view authority = text.substr(0, slash);
  url.path = slash == std::string_view::npos ? "/" : std::string(text.substr(slash));
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    const std::string_view userinfo = authority.substr(0, at);
    authority.remove_prefix(at + 1);
    const auto colon = userinfo.find(':');
    url.user = std::string(userinfo.substr(0, colon));
    if (colon != std::string_view::npos) url.password = std::string(userinfo.substr(colon + 1));
  }
  if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    const auto port = to_number<std::uint16_t>(authority.substr(colon + 1));
    if (!port) throw ProtocolError("bad port in URL");
    url.port = *port;
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw ProtocolError("URL has no host");
  url.host = std::string(authority);
  return url;
}

std::string Transport::str() const {
  std::string out = profile + (unicast ? ";unicast" : ";multicast");
  if (client_rtp) out += ";client_port=" + std::to_string(client_rtp) + "-" + std::to_string(client_rtcp);
  if (server_rtp) out += ";server_port=" + std::to_string(server_rtp) + "-" + std::to_string(server_rtcp);
  if (ssrc) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08X", *ssrc);
    out += ";ssrc=";
    out += buf;
  }
  return out;
}

Transport Transport::parse(std::string_view text) {
  Transport t;
  bool have_client = false;
  const auto params = split(text, ';');
  t.profile = std::string(trim(params[0]));
  auto parse_pair = [](std::string_view v, std::uint16_t& a, std::uint16_t& b) {
    const auto dash = v.find('-');
    const auto first = to_number<std::uint16_t>(v.substr(0, dash));
    if (!first) throw ProtocolError("bad port pair in Transport");
    a = *first;
    if (dash == std::string_view::npos) {
      b = static_cast<std::uint16_t>(a + 1);
    } else {
      const auto second = to_number<std::uint16_t>(v.substr(dash + 1));
      if (!second) throw ProtocolError("bad port pair in Transport");
      b = *second;
    }
  };
  for (std::size_t i = 1; i < params.size(); ++i) {
    const std::string_view p = trim(params[i]);
    const auto eq = p.find('=');
    const std::string_view key = p.substr(0, eq);
    const std::string_view value = eq == std::string_view::npos ? std::string_view{} : p.substr(eq + 1);
    if (key == "unicast") t.unicast = true;
    else if (key == "multicast") t.unicast = false;
    else if (key == "client_port") {
      parse_pair(value, t.client_rtp, t.client_rtcp);
      have_client = true;
    } else if (key == "server_port") {
      parse_pair(value, t.server_rtp, t.server_rtcp);
    } else if (key == "ssrc") {
      std::uint32_t v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v, 16);
      if (ec != std::errc{} || ptr != value.data() + value.size()) throw ProtocolError("bad ssrc in Transport");
      t.ssrc = v;
    }
  }
  if (!have_client && t.server_rtp == 0) throw ProtocolError("Transport lacks client_port");
  return t;
}

std::string Sdp::str() const {
  std::ostringstream out;
  out << "v=0\r\n"
      << "o=- " << session_id << " 1 IN IP4 " << origin_host << "\r\n"
      << "s=" << session_name << "\r\n"
      << "c=IN IP4 0.0.0.0\r\n"
      << "t=0 0\r\n"
      << "a=control:*\r\n"
      << "m=video 0 RTP/AVP " << payload_type << "\r\n"
      << "a=rtpmap:" << payload_type << " " << codec << "/" << clock_rate << "\r\n"
      << "a=framerate:" << framerate << "\r\n";
  if (width > 0 && height > 0) out << "a=x-dimensions:" << width << "," << height << "\r\n";
  out << "a=control:" << control << "\r\n";
  return out.str();
}

Sdp Sdp::parse(std::string_view text) {
  Sdp sdp;
  bool v = false, o = false, s = false, t = false, m = false, rtpmap = false;
  for (auto line : split_lines(text)) {
    if (line.empty()) continue;
    if (line.size() < 2 || line[1] != '=' || !std::islower(static_cast<unsigned char>(line[0])))
      throw ProtocolError("malformed SDP line");
    const char type = line[0];
    const std::string_view value = line.substr(2);
    switch (type) {
      case 'v':
        if (value != "0") throw ProtocolError("unsupported SDP version");
        v = true;
        break;
      case 'o': {
        const auto f = split(value, ' ');
        if (f.size() != 6) throw ProtocolError("malformed SDP origin");
        const auto id = to_number<std::uint64_t>(f[1]);
        if (!id) throw ProtocolError("malformed SDP session id");
        sdp.session_id = *id;
        sdp.origin_host = std::string(f[5]);
        o = true;
        break;
      }
      case 's':
        sdp.session_name = std::string(value);
        s = true;
        break;
      case 't':
        t = true;
        break;
      case 'm': {
        const auto f = split(value, ' ');
        if (f.size() < 4 || f[0] != "video") throw ProtocolError("expected a video media line");
        const auto pt = to_number<int>(f[3]);
        if (!pt) throw ProtocolError("bad payload type in media line");
        sdp.payload_type = *pt;
        m = true;
        break;
      }
      case 'a': {
        const auto colon = value.find(':');
        const std::string_view name = value.substr(0, colon);
        const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : value.substr(colon + 1);
        if (name == "rtpmap" && m) {
          const auto sp = arg.find(' ');
          const auto slash = arg.find('/', sp);
          if (sp == std::string_view::npos || slash == std::string_view::npos) throw ProtocolError("malformed rtpmap");
          const auto pt = to_number<int>(arg.substr(0, sp));
          const auto clock = to_number<int>(arg.substr(slash + 1));
          if (!pt || !clock) throw ProtocolError("malformed rtpmap");
          if (*pt == sdp.payload_type) {
            sdp.codec = std::string(arg.substr(sp + 1, slash - sp - 1));
            sdp.clock_rate = *clock;
            rtpmap = true;
          }
        } else if (name == "framerate" && m) {
          sdp.framerate = std::stod(std::string(arg));
        } else if (name == "x-dimensions" && m) {
          const auto comma = arg.find(',');
          sdp.width = to_number<int>(arg.substr(0, comma)).value_or(0);
          sdp.height = comma == std::string_view::npos ? 0 : to_number<int>(arg.substr(comma + 1)).value_or(0);
        } else if (name == "control" && m) {
          sdp.control = std::string(arg);
        }
        break;
      }
      default:
        break;
    }
  }
  if (!(v && o && s && t && m && rtpmap)) throw ProtocolError("SDP is missing a required line");
  return sdp;
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::init: return "INIT";
    case SessionState::ready: return "READY";
    case SessionState::playing: return "PLAYING";
    case SessionState::paused: return "PAUSED";
    case SessionState::torn_down: return "TORN_DOWN";
  }
  return "?";
}

bool transition_allowed(SessionState from, SessionState to) {
  using S = SessionState;
  switch (from) {
    case S::init: return to == S::ready;
    case S::ready: return to == S::playing || to == S::torn_down;
    case S::playing: return to == S::paused || to == S::torn_down;
    case S::paused: return to == S::playing || to == S::torn_down;
    case S::torn_down: return false;
  }
  return false;
}

}  // namespace tilecast::rtsp
