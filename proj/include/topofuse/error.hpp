#pragma once

#include <stdexcept>
#include <string>

namespace topofuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, missing or inconsistent files and documents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Arguments that violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid pipeline configuration (bad ranges, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; the message carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace topofuse
