#pragma once

#include <stdexcept>
#include <string>

namespace kaon {

// Malformed configuration or event documents.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration parsed but violates a physical invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Negative proper times and similar out-of-domain arguments.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DegenerateStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A partial width needed by a ratio is zero for the configured branching.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Event or scan file does not match the documented schema.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require_nonnegative_time(double tau, const char* name) {
  if (!(tau >= 0.0)) {
    throw DomainError(std::string(name) + " must be a non-negative proper time, got " +
                      std::to_string(tau));
  }
}

}  // namespace kaon
