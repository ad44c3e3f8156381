#pragma once

#include <stdexcept>
#include <string>

namespace spotune {

// Invalid configuration: bad bounds, unknown ids, malformed config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A raw point could not be decoded into a natural assignment.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string param, const std::string& what)
      : std::runtime_error(param + ": " + what), param_(std::move(param)) {}

  const std::string& param() const noexcept { return param_; }

 private:
  std::string param_;
};

// Kriging fit failed even at the largest admissible nugget.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request outside what an algorithm supports (e.g. exhaustive Kemeny for k > 8).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data ingestion and preprocessing failures.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spotune

namespace spotune {

// Cooperative cancellation observed by a learner (timeout reached).
class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("evaluation cancelled") {}
};

}  // namespace spotune
