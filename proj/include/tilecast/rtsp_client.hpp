#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tilecast/net.hpp"
#include "tilecast/rtsp_message.hpp"

namespace tilecast::rtsp {

struct TranscriptEntry {
  std::string method;
  std::string uri;
  int status = 0;
};

// Blocking control-channel client. Each call sends one request and waits for
// the response whose CSeq matches.
class Client {
 public:
  explicit Client(Url url, net::Millis timeout = net::Millis(3000));

  Message send(Message request);

  Message options();
  // The URI carries credentials only when `with_credentials` is set.
  Message describe(bool with_credentials);
  Message setup(std::uint16_t client_rtp_port, std::string track = "trackID=1");
  Message play();
  Message pause();
  Message get_parameter();
  Message teardown();

  const Url& url() const { return url_; }
  const std::optional<std::string>& session_id() const { return session_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  // Server side of the Transport negotiated by setup().
  const std::optional<Transport>& transport() const { return transport_; }

 private:
  Url url_;
  net::Millis timeout_;
  net::Fd fd_;
  long next_cseq_ = 1;
  std::string buffer_;
  std::optional<std::string> session_;
  std::optional<Transport> transport_;
  std::vector<TranscriptEntry> transcript_;
};

}  // namespace tilecast::rtsp
