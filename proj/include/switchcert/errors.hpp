#pragma once

#include <stdexcept>
#include <string>

namespace switchcert {

/// Malformed or incomplete configuration input (missing key, unparsable value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constructed object violates one of its invariants.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// External dynamics process answered with something that is not a state.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// External dynamics process died, timed out, or could not be spawned.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced by dynamics, a network, or a loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested work exceeds a configured cap.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t required)
      : std::runtime_error(what), required_(required) {}
  std::size_t required() const { return required_; }

 private:
  std::size_t required_;
};

}  // namespace switchcert
