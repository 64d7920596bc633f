#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace tilecast::signaling {

enum class UserState { online, chatting, offline, pushing };
enum class CallResult { accepted, rejected, standstill };

std::string_view to_string(UserState s);
std::string_view to_string(CallResult r);
std::optional<UserState> parse_user_state(std::string_view text);
std::optional<CallResult> parse_call_result(std::string_view text);

// The nine-key JSON message exchanged over the signaling socket. Every value
// travels as a string; unset optionals serialize as "".
struct SignalMessage {
  bool heartbeat = false;
  std::optional<int> response_code;
  std::optional<UserState> user_state;
  bool calling = false;
  bool called = false;
  std::optional<CallResult> call_result;
  std::string caller_uuid;
  std::string callee_uuid;
  std::string stream_address;

  // All nine keys, in the canonical order.
  std::string to_json() const;

  // Accepts string or native JSON values and the legacy "StateCheck" key as an
  // alias of "ResponseCode". Missing keys take their defaults. Throws
  // SignalError on malformed JSON, unknown keys or out-of-range values.
  static SignalMessage parse(std::string_view text);

  friend bool operator==(const SignalMessage&, const SignalMessage&) = default;
};

// {"ResponseCode":"<code>","Error":"<reason>"}
std::string error_frame(int code, std::string_view reason);

}  // namespace tilecast::signaling
