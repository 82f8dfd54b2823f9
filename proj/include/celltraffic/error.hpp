#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace celltraffic {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor, frame or cube geometry does not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation applied to data in the wrong state (e.g. normalized vs raw).
class StateError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

/// A scale statistic collapsed to zero (constant data).
class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what, const std::string& source = "")
      : Error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + what),
        line_(line),
        detail_(what) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or truncated binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// A statistic has no defined value (zero denominators, constant series).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

/// A lag specification produces non-positive or colliding lags.
class DegenerateSpecError : public Error {
 public:
  using Error::Error;
};

class HistoryUnderflowError : public Error {
 public:
  using Error::Error;
};

class BatchSizeError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf showed up in activations, gradients or the loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace celltraffic
