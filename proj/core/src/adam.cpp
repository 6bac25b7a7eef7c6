// SPDX-License-Identifier: Apache-2.0
#include "normlab/adam.hpp"

#include <cmath>

#include "normlab/errors.hpp"

namespace normlab {

void adam_step(Parameter& param, AdamState& state, const AdamConfig& config) {
  if (!param.trainable) return;
  Tensor& value = param.node->value;
  const Tensor& grad = param.node->grad_buffer();
  if (!grad.all_finite()) {
    throw DivergenceError("adam_step: non-finite gradient for parameter '" + param.name + "'");
  }
  if (state.m.empty()) {
    state.m = Tensor(value.shape());
    state.v = Tensor(value.shape());
  }
  require_same_shape(state.m, value, "adam_step");
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    value[i] -= config.lr * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(ParameterSet& params, AdamConfig config)
    : params_(params), config_(config), states_(params.items().size()) {}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.items().size(); ++i) {
    adam_step(params_.items()[i], states_[i], config_);
  }
}

}  // namespace normlab
