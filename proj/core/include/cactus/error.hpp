#pragma once

#include <stdexcept>
#include <string>

namespace cactus {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

class InvalidPositionError : public Error {
 public:
  using Error::Error;
};

class InvalidInstanceError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (stale tape, step after terminal, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class AllocationError : public Error {
 public:
  using Error::Error;
};

class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace cactus
