#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beliefpi {

/// Invalid configuration or argument shapes. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (loss of definiteness, singular solves). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::optional<int> step = std::nullopt)
      : std::runtime_error(step ? what + " (step " + std::to_string(*step) + ")" : what),
        step_(step) {}

  std::optional<int> step() const noexcept { return step_; }

 private:
  std::optional<int> step_;
};

/// The scheduled diffusion cannot be matched to the control channel.
class InfeasibleMatching : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Rank tolerance relative to the largest eigenvalue / singular value. Shared by
// the PSD factorization and the range tests.
inline constexpr double kRankTolerance = 1e-9;

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink; returns the previous one.
WarningHandler setWarningHandler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace beliefpi
