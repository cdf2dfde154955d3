#pragma once

#include <stdexcept>
#include <string>

namespace ewps {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Parallel-system characterization requested for a family that has none.
class UnsupportedCharacterization : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure: non-finite intermediate, singular matrix, overflow.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nested-model assumption violated by a likelihood-ratio request.
class NestingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed user input: unreadable file, missing column, non-numeric cell.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ewps
