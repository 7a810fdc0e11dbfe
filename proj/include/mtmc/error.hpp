#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtmc {

/// Base of every error raised by the library. Callers that only need a
/// message can catch this; the service layer maps subclasses to HTTP codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file does not follow its declared layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A feature vector's length disagrees with the dataset dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An index falls outside the bounds declared by its metadata.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Arguments violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Internal contract between two stages was broken (e.g. a key-frame gap
/// reaching interpolation).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Optimistic-concurrency failure. Carries the version the caller should
/// have supplied.
class VersionConflict : public Error {
 public:
  VersionConflict(const std::string& what, std::int64_t current_version)
      : Error(what), current_version_(current_version) {}

  std::int64_t current_version() const noexcept { return current_version_; }

 private:
  std::int64_t current_version_;
};

}  // namespace mtmc
