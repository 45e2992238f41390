#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deepconf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration value (out-of-range knob, inconsistent options).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input that could not be decoded. Carries the 1-based line
/// number when the source is line-oriented.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::uint64_t line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  std::uint64_t line() const { return line_; }

private:
  std::uint64_t line_ = 0;
};

/// Structurally decodable input that violates a data invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Index or size outside the valid range.
class BoundsError : public Error {
public:
  using Error::Error;
};

/// Operation applied to a value outside its domain (e.g. empty trace).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Operation not legal in the object's current state.
class StateError : public Error {
public:
  using Error::Error;
};

/// A vote was requested but no answerable ballot exists.
class EmptyVoteError : public Error {
public:
  using Error::Error;
};

/// Accuracy scoring impossible (e.g. missing ground-truth label).
class ScoringError : public Error {
public:
  using Error::Error;
};

/// Remote endpoint replied with something outside the expected schema.
class ProtocolError : public Error {
public:
  using Error::Error;
};

/// Network-level failure after retries were exhausted.
class TransportError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure, annotated with the offending path.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace deepconf
