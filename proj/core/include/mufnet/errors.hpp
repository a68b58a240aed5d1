#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mufnet {

// Base for every error the library throws. Callers that only need a message
// can catch this; the CLI maps each subclass to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (backward twice, invalid label...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of range or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A lookup by id or name failed.
class LookupError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf showed up where it must not (gradients, training loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure: missing or unreadable file, failed write.
class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// The named input file does not exist (or is not a regular file).
class MissingFileError : public IoError {
 public:
  explicit MissingFileError(std::string path) : IoError(std::move(path), "no such file") {}
};

// Structured rejection of a binary container (feature store, checkpoint).
class FormatError : public Error {
 public:
  enum class Kind {
    bad_magic,
    bad_version,
    truncated,
    duplicate_id,
    trailing_bytes,
    invalid_value,
    missing_parameter,
    unexpected_parameter,
  };

  FormatError(Kind kind, std::uint64_t offset, const std::string& detail);

  Kind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

  static std::string_view kind_name(Kind kind) noexcept;

 private:
  Kind kind_;
  std::uint64_t offset_;
};

// Line-oriented text input (manifests, config files) that failed to parse.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail)
      : Error("line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mufnet
