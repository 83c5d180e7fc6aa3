#pragma once

#include <stdexcept>
#include <string>

namespace cvqkd {

/// Violated input contract (bad dimensions, invalid configuration values).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical routine failed to deliver its contract (eigensolver, quadrature, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration field failed validation; `field()` names the offending key.
class ConfigError : public PreconditionError {
 public:
  ConfigError(std::string field, const std::string& what)
      : PreconditionError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Failure inside one stage of the key-rate pipeline.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace cvqkd
