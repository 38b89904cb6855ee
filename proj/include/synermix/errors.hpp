#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace synermix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A function argument violates its precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An object is used in a state that does not permit the call (e.g. a stale
/// forward cache).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Dataset contents are inconsistent with what an operation needs.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was broken; indicates a bug upstream.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based; 0 means a byte offset was used.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset = 0)
      : Error(what), line_(line), offset_(offset) {}
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// Bad configuration value. `key` is the fully qualified key
/// (`section.name`); `line` is 0 when the key was absent from the text.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what, std::size_t line = 0)
      : Error(format(key, what, line)), key_(key), line_(line) {}
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& key, const std::string& what,
                            std::size_t line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    out += "`" + key + "`: " + what;
    return out;
  }

  std::string key_;
  std::size_t line_;
};

}  // namespace synermix
