#include <cmath>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/nets.hpp"

namespace orthovae::nets {

std::string_view optimizer_name(OptimizerKind k) noexcept {
  return k == OptimizerKind::adam ? "adam" : "adagrad";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adagrad") return OptimizerKind::adagrad;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

OptimizerState::OptimizerState(OptimizerConfig config, std::size_t param_count)
    : config_(config), first_(config.kind == OptimizerKind::adam ? param_count : 0, 0.0),
      second_(param_count, 0.0) {
  if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

void OptimizerState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != second_.size() || grads.size() != second_.size()) {
    throw ShapeError("optimizer step: parameter/gradient size does not match state");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("optimizer step " + std::to_string(steps_ + 1) +
                           ": non-finite gradient at parameter " + std::to_string(i));
    }
  }
  ++steps_;
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  if (config_.kind == OptimizerKind::adam) {
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      first_[i] = b1 * first_[i] + (1.0 - b1) * g;
      second_[i] = b2 * second_[i] + (1.0 - b2) * g * g;
      const double mhat = first_[i] / c1;
      const double vhat = second_[i] / c2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      second_[i] += g * g;
      params[i] -= lr * g / std::sqrt(second_[i] + eps);
    }
  }
}

}  // namespace orthovae::nets
