// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "normlab/glm.hpp"
#include "normlab/random.hpp"
#include "normlab/tensor.hpp"

namespace normlab::testing {

// Monte Carlo estimate of the per-unit Fisher matrix, independent of the
// analytic assembly path: the sensitivity of each unit's natural parameter to
// its own coordinates comes from reverse-mode differentiation of a graph-built
// forward pass (no closed-form chi vectors), and the predictive second moments
// come from sampled observations,
//   F[(i,p),(j,q)] = E_x E_y[c_i c_j] d_i,p d_j,q,  c_i = (y_i - f(z_i)) / phi
// with d_i the gradient of z_i restricted to unit i's block. Cases act as
// strata: y is resampled per case, so the standard error covers only the
// y-sampling noise.
struct ScoreOracle {
  Tensor matrix;     // [dim x dim]
  Tensor std_error;  // entrywise standard error of `matrix`
  // Largest |dz_i / dw_j| seen for j != i. Zero up to rounding for the
  // per-unit and standard schemes; genuinely nonzero under layer statistics,
  // where the per-unit reading discards it by construction.
  double max_cross_unit_weight_grad = 0.0;
};

ScoreOracle score_fisher_oracle(const GlmModel& model, const Tensor& x_cases,
                                std::size_t draws_per_case, Rng& rng);

}  // namespace normlab::testing
