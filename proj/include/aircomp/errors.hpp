#pragma once

#include <stdexcept>
#include <string>

namespace aircomp {

// Invalid or mutually inconsistent problem data (dimensions, signs, ranges).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite input data (CSV ingestion, sample tables).
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too few samples to estimate the requested statistic.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A class pair is indistinguishable (all per-element gains below floor).
class DegenerateInstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aircomp
