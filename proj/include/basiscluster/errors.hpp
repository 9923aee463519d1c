#pragma once

#include <stdexcept>
#include <string>

namespace basiscluster {

// Structural problems: mismatched shapes, missing parameters, invalid configs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data problems: unreadable files, malformed CSV cells, file/model dim mismatch.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values in a place that promises finiteness.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace basiscluster
