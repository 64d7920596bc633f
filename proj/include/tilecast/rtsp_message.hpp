#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tilecast::rtsp {

inline constexpr std::string_view kVersion = "RTSP/1.0";

struct Message {
  enum class Kind { request, response };

  Kind kind = Kind::request;
  std::string method;  // requests
  std::string uri;     // requests
  std::string version{kVersion};
  int status = 0;      // responses
  std::string reason;  // responses
  std::vector<std::pair<std::string, std::string>> headers;  // in wire order
  std::string body;

  // Case-insensitive lookup of the first header called `name`.
  std::optional<std::string> header(std::string_view name) const;
  // Replaces an existing header (case-insensitive) or appends a new one.
  void set_header(std::string name, std::string value);
  // Parsed CSeq header; nullopt when absent or not a number.
  std::optional<long> cseq() const;

  // CRLF-terminated wire form. Adds Content-Length when the body is non-empty.
  std::string serialize() const;

  static Message request(std::string method, std::string uri, long cseq);
  static Message response(int status, long cseq);
};

std::string_view reason_phrase(int status);

// Length of the first complete message in `buffer` (header block plus
// Content-Length body), or nullopt if more bytes are needed. Throws
// ProtocolError when the header block exceeds `max_header` bytes.
std::optional<std::size_t> complete_length(std::string_view buffer, std::size_t max_header = 16384);

// Throws ProtocolError on a malformed first line, a malformed header line or a
// missing CSeq. Unknown methods and versions are preserved for the handler.
Message parse_request(std::string_view text);
Message parse_response(std::string_view text);

// rtsp://[user:pass@]host[:port][/path]
struct Url {
  std::string user;
  std::string password;
  std::string host;
  std::uint16_t port = 554;
  std::string path = "/";

  bool has_credentials() const { return !user.empty() || !password.empty(); }
  std::string str(bool with_credentials = true) const;
  // Throws ProtocolError.
  static Url parse(std::string_view text);
};

// ---- Transport header ----
struct Transport {
  std::string profile = "RTP/AVP";  // RTP/AVP or RTP/AVP/UDP
  bool unicast = true;
  std::uint16_t client_rtp = 0;
  std::uint16_t client_rtcp = 0;
  std::uint16_t server_rtp = 0;
  std::uint16_t server_rtcp = 0;
  std::optional<std::uint32_t> ssrc;

  std::string str() const;
  // Throws ProtocolError when client_port is missing or not a pair of numbers.
  static Transport parse(std::string_view text);
};

// ---- SDP (RFC 4566 line grammar) ----
struct Sdp {
  std::uint64_t session_id = 0;
  std::string origin_host = "127.0.0.1";
  std::string session_name = "tilecast";
  int payload_type = 96;
  std::string codec = "TCDCT";
  int clock_rate = 90000;
  double framerate = 30.0;
  int width = 0;
  int height = 0;
  std::string control = "trackID=1";

  std::string str() const;
  // Requires v=, o=, s=, t= and one m=video line with an rtpmap for its
  // payload type. Throws ProtocolError.
  static Sdp parse(std::string_view text);
};

// ---- session state machine ----
enum class SessionState { init, ready, playing, paused, torn_down };

std::string_view to_string(SessionState s);
// INIT->READY, READY->PLAYING, PLAYING<->PAUSED, and READY/PLAYING/PAUSED->TORN_DOWN.
bool transition_allowed(SessionState from, SessionState to);

}  // namespace tilecast::rtsp
