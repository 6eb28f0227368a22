#pragma once

#include <stdexcept>
#include <string>

namespace sigprop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (|rho| > 1, q <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature failed its doubling convergence check.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// Input lies in a regime the theory deliberately does not cover (p0 < 0).
class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

/// g(c) has no sign change on the fixed-point bracket.
class NoInteriorRoot : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during a simulation or a long recurrence.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int layer)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// Invalid experiment configuration; names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sigprop
