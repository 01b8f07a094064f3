#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace diffid {

// Precondition violations use std::invalid_argument directly.

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExhaustionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownLabelError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised by an external adapter (captioner or generation backend). Carries
/// the adapter name so a ledger can say which backend failed.
class BackendError : public std::runtime_error {
 public:
  BackendError(std::string backend, const std::string& what)
      : std::runtime_error(backend + ": " + what), backend_(std::move(backend)) {}
  const std::string& backend() const noexcept { return backend_; }

 private:
  std::string backend_;
};

/// Collects every offending key instead of stopping at the first one.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace diffid
