#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ecdiff {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition on argument values was violated
// (unnormalized rows, non-scalar loss, empty mask, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Scalar argument outside the domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the offending file and 1-based line.
class FormatError : public Error {
 public:
  FormatError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace ecdiff
