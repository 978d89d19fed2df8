#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uvcloth {

/// Base class for every error raised by the library. Callers that only care
/// about "something went wrong with user input" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Sizes, shapes or counts that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A request is well-formed but the data cannot support it (empty mask,
/// non-encodable garment, diverged training, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A garment cannot be encoded through the body atlas (use cylindrical
/// coordinates instead).
class NotEncodableError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace uvcloth
