#pragma once

#include <stdexcept>
#include <string>

namespace funsearch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad coordinates, non-increasing tuples, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Requested size exceeds what an exhaustive routine can enumerate.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Specification file or guest source that cannot be interpreted.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A priority function or candidate failed while being evaluated.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// LLM provider failure that survived the retry policy.
class GatewayError : public Error {
 public:
  using Error::Error;
};

/// Invalid run, model, or policy configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace funsearch
