#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cobras {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` and `column` are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    std::string out = what + " (line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

/// A caller broke a documented precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// A named resource (dataset, session) does not exist.
class NotFound : public Error {
public:
  using Error::Error;
};

}  // namespace cobras
