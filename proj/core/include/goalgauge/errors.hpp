#pragma once

#include <stdexcept>
#include <string>

namespace goalgauge {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Invalid run configuration or malformed input rejected before any work runs.
// Messages start with the offending field path when one exists.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem trouble: missing files, malformed records, unwritable outputs.
class IoError : public Error {
 public:
  using Error::Error;
};

// Retryable backend failure: transport errors, HTTP 429 and 5xx.
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& message, int status = 0)
      : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Non-retryable backend failure: other 4xx statuses, malformed responses,
// context overflow, missing scripted replies.
class ApiError : public Error {
 public:
  explicit ApiError(const std::string& message, int status = 0)
      : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

}  // namespace goalgauge
