#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace adfl {

/// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration. `field` is the dotted path
/// (`section.key`) of the offending entry when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Energy or latency budgets cannot support the requested work.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& message,
                           std::optional<int> device = std::nullopt)
      : Error(message), device_(device) {}

  /// 0-based device index, if a single device is responsible.
  std::optional<int> device() const noexcept { return device_; }

 private:
  std::optional<int> device_;
};

/// Non-finite loss or parameters during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A ledger entry would exceed an energy or latency budget. Reaching this is a
/// bug in the orchestrator, never an expected outcome.
class BudgetViolation : public Error {
 public:
  using Error::Error;
};

/// Exhaustive search would exceed its configured budget.
class SearchBudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace adfl
