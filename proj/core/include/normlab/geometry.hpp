// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "normlab/glm.hpp"

namespace normlab {

struct FisherMatrix {
  Tensor matrix;          // [dim x dim], symmetrized as (F + F^T) / 2
  double asymmetry = 0.0; // max |F - F^T| entry before symmetrization
  std::size_t sample_count = 0;
};

// Fisher information of the plain GLM in the unit-major (w_i, b_i) layout,
// averaged over the given cases. Requires model.norm == None.
FisherMatrix fisher_standard(const GlmModel& model, const Tensor& x_cases);

// Fisher information of a normalized GLM in the unit-major (w_i, b_i, g_i)
// layout, built from per-unit direction vectors
//   u_i = [gain_i chi_i / sigma_i, 1, t_i],  t_i = (a_i - mu_i) / sigma_i
// with each (i, j) block E[cov_ij u_i u_j^T] / phi^2. Requires a normalized
// model (norm != None).
FisherMatrix fisher_normalized(const GlmModel& model, const Tensor& x_cases);

// The weight-derivative direction of unit i at one case; the closed forms per
// norm kind are cross-checked against reverse-mode gradients in the tests.
Tensor chi_vector(const GlmModel& model, const GlmContext& context, const Tensor& x,
                  std::size_t i);

// 0.5 * delta^T F delta
double kl_quadratic(const FisherMatrix& fisher, const Tensor& delta);

// Mean over cases of the closed-form KL between the model's predictive
// distribution and the one at theta + delta. Batch statistics are recomputed
// at the shifted parameters.
double kl_exact(const GlmModel& model, const Tensor& x_cases, const Tensor& delta);

struct DirectionMetric {
  double value = 0.0;       // 0.5 * mean over cases of the quadratic form
  double std_error = 0.0;   // standard error of that mean
};

// Gain-direction quadratic form of the normalized Fisher: restricted to the
// gain coordinates it needs no chi vectors, only the standardized activations
// t_i, so it can be assembled directly and compared against the full matrix.
DirectionMetric gain_direction_metric(const GlmModel& model, const Tensor& x_cases,
                                      const Tensor& delta_g);

// The same direction measured in the plain GLM's geometry: the gain step is
// projected onto the weights as delta w_i = delta_g_i w_i / ||w_i||, giving
// per-case factors a_i / ||w_i||. Requires model.norm == None.
DirectionMetric projected_weight_metric(const GlmModel& model, const Tensor& x_cases,
                                        const Tensor& delta_g);

// Smallest eigenvalue of a symmetrized Fisher matrix (PSD check).
double min_eigenvalue(const FisherMatrix& fisher);

}  // namespace normlab
