#pragma once

#include <stdexcept>
#include <string>

namespace ala {

// Root of every error the library throws. The CLI maps InputError (and its
// subclasses) to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable files, malformed inputs, bad arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public InputError {
 public:
  SchemaError(const std::string& column, const std::string& what)
      : InputError(what), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class RowError : public InputError {
 public:
  RowError(std::size_t line, const std::string& what)
      : InputError(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

// Payload version or feature-schema mismatch.
class VersionError : public InputError {
 public:
  using InputError::InputError;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace ala
