#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zopmc {

/// Caller passed arguments that violate an operation's preconditions
/// (dimension mismatch, m > d, empty grids, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies outside the mathematical domain (non-finite coordinates).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The target does not expose the requested capability.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid sampler or experiment configuration (singular preconditioner,
/// non-positive scales, malformed spec file).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A potential evaluation at a perturbed point returned a non-finite value.
class NonFinitePotential : public NumericError {
 public:
  NonFinitePotential(std::size_t direction, double value)
      : NumericError("non-finite potential (" + std::to_string(value) +
                     ") at perturbation along direction " +
                     std::to_string(direction)),
        direction_(direction) {}

  std::size_t direction() const noexcept { return direction_; }

 private:
  std::size_t direction_;
};

/// Iterates escaped the divergence radius.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t step, double norm)
      : NumericError("iterate diverged at step " + std::to_string(step) +
                     " (norm " + std::to_string(norm) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace zopmc
