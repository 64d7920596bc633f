#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tilecast {

// Shape or size precondition violated (odd NV12 dimensions, non-square block, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or truncated encoded data. `offset()` is the byte offset where
// decoding failed.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class FramingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Command not valid in the current state (maximize while maximized, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Socket-level failure (bind, connect, unexpected close).
class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed RTSP text. The server answers these with 400.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid signaling message (bad JSON, unknown key, out-of-range enum).
class SignalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Schema violation on append, uniqueness conflict, or an unreadable log line.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tilecast
