#include "tilecast/rtsp_client.hpp"

#include "tilecast/errors.hpp"

namespace tilecast::rtsp {

Client::Client(Url url, net::Millis timeout)
    : url_(std::move(url)), timeout_(timeout), fd_(net::tcp_connect(url_.host, url_.port, timeout)) {}

Message Client::send(Message request) {
  const long cseq = next_cseq_++;
  request.set_header("CSeq", std::to_string(cseq));
  request.set_header("User-Agent", "tilecast-pull");
  if (session_ && !request.header("Session")) request.set_header("Session", *session_);
  net::send_all(fd_, request.serialize());

  std::vector<std::uint8_t> chunk(4096);
  for (;;) {
    if (const auto len = complete_length(buffer_)) {
      Message resp = parse_response(std::string_view(buffer_).substr(0, *len));
      buffer_.erase(0, *len);
      if (resp.cseq() != cseq) continue;  // stale reply to an earlier request
      transcript_.push_back({request.method, request.uri, resp.status});
      return resp;
    }
    const auto n = net::recv_some(fd_, chunk, timeout_);
    if (!n) throw NetError("timed out waiting for a " + request.method + " response");
    if (*n == 0) throw NetError("server closed the control connection");
    buffer_.append(reinterpret_cast<const char*>(chunk.data()), *n);
  }
}

Message Client::options() { return send(Message::request("OPTIONS", url_.str(false), 0)); }

Message Client::describe(bool with_credentials) {
  Message req = Message::request("DESCRIBE", url_.str(with_credentials), 0);
  req.set_header("Accept", "application/sdp");
  return send(std::move(req));
}

Message Client::setup(std::uint16_t client_rtp_port, std::string track) {
  Message req = Message::request("SETUP", url_.str(false) + "/" + track, 0);
  Transport t;
  t.client_rtp = client_rtp_port;
  t.client_rtcp = static_cast<std::uint16_t>(client_rtp_port + 1);
  req.set_header("Transport", t.str());
  Message resp = send(std::move(req));
  if (resp.status == 200) {
    if (const auto s = resp.header("Session")) session_ = s->substr(0, s->find(';'));
    if (const auto th = resp.header("Transport")) transport_ = Transport::parse(*th);
  }
  return resp;
}

Message Client::play() {
  Message req = Message::request("PLAY", url_.str(false), 0);
  req.set_header("Range", "npt=0.000-");
  return send(std::move(req));
}

Message Client::pause() { return send(Message::request("PAUSE", url_.str(false), 0)); }

Message Client::get_parameter() { return send(Message::request("GET_PARAMETER", url_.str(false), 0)); }

Message Client::teardown() {
  Message resp = send(Message::request("TEARDOWN", url_.str(false), 0));
  if (resp.status == 200) session_.reset();
  return resp;
}

}  // namespace tilecast::rtsp
