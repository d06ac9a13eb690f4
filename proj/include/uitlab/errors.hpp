#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace uitlab {

class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A trajectory produced a non-finite state. Carries the step index at which
/// it happened and, when known, the trajectory index.
class NumericalBlowup : public std::runtime_error {
  public:
    static constexpr std::size_t kUnknown = static_cast<std::size_t>(-1);

    explicit NumericalBlowup(std::size_t step_index, std::size_t trajectory = kUnknown);

    std::size_t step_index() const noexcept { return step_index_; }
    std::size_t trajectory() const noexcept { return trajectory_; }

    NumericalBlowup with_trajectory(std::size_t trajectory) const {
        return NumericalBlowup(step_index_, trajectory);
    }

  private:
    std::size_t step_index_;
    std::size_t trajectory_;
};

class FitFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Aggregated configuration problems; what() joins all violations.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

  private:
    std::vector<std::string> violations_;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace uitlab
