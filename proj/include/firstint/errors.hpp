#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace firstint {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position` is a byte offset into the input.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& message)
      : Error("syntax error at " + std::to_string(position) + ": " + message),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnknownVariable : public Error {
 public:
  explicit UnknownVariable(const std::string& name)
      : Error("unknown variable '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Evaluation left the domain of the function (pole, log/sqrt of a bad argument, overflow).
class NonFinite : public Error {
 public:
  using Error::Error;
};

/// Input failed validation (lengths, parameter constraints, config values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public ValidationError {
 public:
  explicit UnknownScenario(const std::string& name)
      : ValidationError("unknown scenario '" + name + "'") {}
};

class ParameterViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The point lies outside the hypotheses of the construction.
class SingularLocus : public Error {
 public:
  using Error::Error;
};

/// The canonical drift has a component outside the range of df/dy, so no
/// correction can cancel it.
class InconsistentDrift : public Error {
 public:
  using Error::Error;
};

class DegenerateKernel : public Error {
 public:
  using Error::Error;
};

/// A numerical run could not deliver the requested quantity.
class IntegrationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace firstint
