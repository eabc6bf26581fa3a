#pragma once

#include <stdexcept>
#include <string>

namespace nsf {

// All library failures derive from Error so callers (notably the CLI) can
// map them to a single "domain error" exit path.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  explicit ParseError(const std::string& what) : ParseError(what, 0) {}

  int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnsupportedPrimitive : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace nsf
