#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace curriculab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input text. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A variant id or factor assignment that does not belong to a design.
class InvalidVariant : public Error {
 public:
  using Error::Error;
};

/// Numerical preconditions violated (rank deficiency, zero variance, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace curriculab
