#pragma once

#include <stdexcept>
#include <string>

namespace h2tf {

// Root of every exception the library throws. Callers that only care about
// "something went wrong in h2tf" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad magic, version, dtype, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// File payload shorter or longer than its header promises.
class LengthError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace h2tf
