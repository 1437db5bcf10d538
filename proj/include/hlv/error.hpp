#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hlv {

enum class ErrorKind {
  Usage,
  Data,
  Backend,
  Config,
};

/// Base exception for every failure raised by the library. The kind drives
/// the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable, int attempts = 0)
      : Error(ErrorKind::Backend, what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

/// Raised when an option letter cannot be found among the first-token
/// candidates and no fallback applies. Carries the raw candidate list.
class MissingOptionTokenError : public BackendError {
 public:
  MissingOptionTokenError(const std::string& what, std::vector<std::string> candidates)
      : BackendError(what, false), candidates_(std::move(candidates)) {}

  const std::vector<std::string>& candidates() const noexcept { return candidates_; }

 private:
  std::vector<std::string> candidates_;
};

}  // namespace hlv
