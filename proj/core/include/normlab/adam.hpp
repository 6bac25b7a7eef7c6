// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "normlab/graph.hpp"

namespace normlab {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter moment estimates. step counts completed updates and drives
// the bias correction.
struct AdamState {
  Tensor m;
  Tensor v;
  long step = 0;
};

// One bias-corrected update in place:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
// A non-finite gradient rejects the step and names the parameter.
void adam_step(Parameter& param, AdamState& state, const AdamConfig& config);

// Convenience wrapper joining a parameter set with its states.
class AdamOptimizer {
public:
  AdamOptimizer(ParameterSet& params, AdamConfig config);
  void step();
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<AdamState>& states() const noexcept { return states_; }

private:
  ParameterSet& params_;
  AdamConfig config_;
  std::vector<AdamState> states_;
};

}  // namespace normlab
