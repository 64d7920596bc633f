#include "tilecast/signal_message.hpp"

#include "json.hpp"

#include <array>
#include <charconv>

#include "tilecast/errors.hpp"

namespace tilecast::signaling {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kStates{"Online", "Chatting", "Offline", "Pushing"};
constexpr std::array<std::string_view, 3> kResults{"Accepted", "Rejected", "StandStill"};

std::string as_text(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_null()) return "";
  throw SignalError("value of " + key + " must be a string, boolean or integer");
}

bool as_bool(const std::string& text, const std::string& key) {
  if (text == "true") return true;
  if (text == "false" || text.empty()) return false;
  throw SignalError(key + " must be true or false");
}

}  // namespace

std::string_view to_string(UserState s) { return kStates[static_cast<std::size_t>(s)]; }
std::string_view to_string(CallResult r) { return kResults[static_cast<std::size_t>(r)]; }

std::optional<UserState> parse_user_state(std::string_view text) {
  for (std::size_t i = 0; i < kStates.size(); ++i)
    if (kStates[i] == text) return static_cast<UserState>(i);
  return std::nullopt;
}

std::optional<CallResult> parse_call_result(std::string_view text) {
  for (std::size_t i = 0; i < kResults.size(); ++i)
    if (kResults[i] == text) return static_cast<CallResult>(i);
  return std::nullopt;
}

std::string SignalMessage::to_json() const {
  // ordered_json keeps the wire order stable and readable.
  nlohmann::ordered_json j;
  j["HeartBeat"] = heartbeat ? "true" : "false";
  j["ResponseCode"] = response_code ? std::to_string(*response_code) : "";
  j["UserState"] = user_state ? std::string(to_string(*user_state)) : "";
  j["Calling"] = calling ? "true" : "false";
  j["Called"] = called ? "true" : "false";
  j["CallResult"] = call_result ? std::string(to_string(*call_result)) : "";
  j["CallerUUID"] = caller_uuid;
  j["CalleeUUID"] = callee_uuid;
  j["StreamAddress"] = stream_address;
  return j.dump();
}

SignalMessage SignalMessage::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SignalError(std::string("message is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SignalError("message must be a JSON object");
  SignalMessage m;
  bool saw_code = false;
  for (const auto& [key, value] : j.items()) {
    const std::string v = as_text(value, key);
    if (key == "HeartBeat") {
      m.heartbeat = as_bool(v, key);
    } else if (key == "ResponseCode" || key == "StateCheck") {
      if (saw_code) throw SignalError("ResponseCode given twice (StateCheck is an alias)");
      saw_code = true;
      if (!v.empty()) {
        int code = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), code);
        if (ec != std::errc{} || p != v.data() + v.size()) throw SignalError("ResponseCode must be an integer");
        m.response_code = code;
      }
    } else if (key == "UserState") {
      if (!v.empty()) {
        m.user_state = parse_user_state(v);
        if (!m.user_state) throw SignalError("UserState must be Online, Chatting, Offline or Pushing");
      }
    } else if (key == "Calling") {
      m.calling = as_bool(v, key);
    } else if (key == "Called") {
      m.called = as_bool(v, key);
    } else if (key == "CallResult") {
      if (!v.empty()) {
        m.call_result = parse_call_result(v);
        if (!m.call_result) throw SignalError("CallResult must be Accepted, Rejected or StandStill");
      }
    } else if (key == "CallerUUID") {
      m.caller_uuid = v;
    } else if (key == "CalleeUUID") {
      m.callee_uuid = v;
    } else if (key == "StreamAddress") {
      m.stream_address = v;
    } else {
      throw SignalError("unknown key '" + key + "'");
    }
  }
  return m;
}

std::string error_frame(int code, std::string_view reason) {
  nlohmann::ordered_json j;
  j["ResponseCode"] = std::to_string(code);
  j["Error"] = std::string(reason);
  return j.dump();
}

}  // namespace tilecast::signaling
