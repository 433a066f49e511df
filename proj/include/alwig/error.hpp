#pragma once

#include <stdexcept>
#include <string>

namespace alwig {

// Every library failure derives from Error. The CLI maps the subclass to an
// exit code: UsageError -> 1, DataError/InputError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A token or row index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Bad argument to an API call (out-of-range epoch, unknown variant, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Model input violates its contract (empty video, non-finite feature, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. Carries a 1-based line number when one applies.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Non-finite gradient or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Command-line or config misuse.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace alwig
