#pragma once

#include <stdexcept>
#include <string>

namespace a3 {

// Bad caller input: shapes, ranges, malformed files or configs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FileError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : InputError(what), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

// An internal invariant of the numeric pipeline did not hold.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace a3
