#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace duo {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the documented range (bad T, K, bounds, horizons, ...).
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation contract (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (sequence CSV, skeleton file).
class IngestionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite function value during gradient checking.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Checkpoint does not match the expected format or model.
class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

} // namespace duo
