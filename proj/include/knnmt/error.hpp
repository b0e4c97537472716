#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace knnmt {

using TokenId = std::uint32_t;

/// Precondition violated by a caller (bad dimensions, out-of-range ids, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed binary or text artifact. Carries the byte offset (or line
/// number for text formats) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  enum Unit { byte, line };

  FormatError(const std::string& what, std::uint64_t offset, Unit unit = byte)
      : std::runtime_error(what + (unit == line ? " (at line " : " (at offset ") + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Configuration problem; `key_path` names the offending entry, e.g.
/// "decode.beam_size".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal invariant broken at runtime (maps to CLI exit code 4).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace knnmt
