#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace monoidal {

// Bad shapes, non-finite inputs, out-of-range indices.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Two elements whose extents disagree on an axis other than the one being composed.
class CompositionError : public std::runtime_error {
 public:
  CompositionError(std::size_t axis, const std::string& what)
      : std::runtime_error(what), axis_(axis) {}

  std::size_t axis() const noexcept { return axis_; }

 private:
  std::size_t axis_;
};

// Data ingestion failures. The CLI maps every DataError to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class ConsistencyError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace monoidal
