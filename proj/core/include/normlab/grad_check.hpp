// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "normlab/graph.hpp"

namespace normlab {

// Central-difference comparison against the reverse-mode gradients. The loss
// builder must rebuild the graph from the current parameter values on every
// call; the checker perturbs one coordinate at a time with step h and
// restores it afterwards.
//
// Relative error per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|).

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

GradCheckReport finite_diff_check(const std::function<NodePtr()>& build_loss,
                                  std::vector<Parameter>& params, double h = 1e-5);

}  // namespace normlab
