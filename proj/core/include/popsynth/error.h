#ifndef POPSYNTH_ERROR_H_
#define POPSYNTH_ERROR_H_

#include <stdexcept>
#include <string>

namespace popsynth {

// Base for every error raised by the library. The CLI maps the three
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, arguments or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that is missing, malformed or inconsistent with a schema.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or numeric evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace popsynth

#endif  // POPSYNTH_ERROR_H_
