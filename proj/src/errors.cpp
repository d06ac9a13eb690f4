#include "uitlab/errors.hpp"

namespace uitlab {
namespace {

std::string blowup_message(std::size_t step, std::size_t trajectory) {
    std::string msg = "numerical blowup at step " + std::to_string(step);
    if (trajectory != NumericalBlowup::kUnknown) {
        msg += " in trajectory " + std::to_string(trajectory);
    }
    return msg;
}

std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) {
        out += "\n  - " + item;
    }
    return out;
}

}  // namespace

NumericalBlowup::NumericalBlowup(std::size_t step_index, std::size_t trajectory)
    : std::runtime_error(blowup_message(step_index, trajectory)),
      step_index_(step_index),
      trajectory_(trajectory) {}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

}  // namespace uitlab
