// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "normlab/normalizers.hpp"
#include "normlab/random.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

// Exponential family observation model with log density
//   log P(y | z) = (z y - eta(z)) / phi + c(y, phi)
// so the transfer f = eta' gives the predictive mean and phi * f' the
// predictive variance.
enum class FamilyKind { BernoulliLogistic, GaussianIdentity };

const char* family_kind_name(FamilyKind kind);
std::optional<FamilyKind> parse_family_kind(const std::string& name);

struct ExponentialFamily {
  FamilyKind kind = FamilyKind::BernoulliLogistic;
  double dispersion = 1.0;  // phi

  static ExponentialFamily bernoulli();
  static ExponentialFamily gaussian(double dispersion = 1.0);

  double transfer(double z) const;             // f(z)
  double transfer_derivative(double z) const;  // f'(z)
  double log_partition(double z) const;        // eta(z)
  double log_base(double y) const;             // c(y, phi)
  double log_likelihood(double z, double y) const;
  double sample(double z, Rng& rng) const;
  // KL(P(. | z_from) || P(. | z_to)); closed form per family.
  double kl_divergence(double z_from, double z_to) const;
};

// Predictive covariance between output units i and j at natural parameters z.
// Both supported families are conditionally independent across units, so the
// off-diagonal is zero; the Fisher assemblies route every (i, j) pair through
// this hook so a correlated family only has to change this one function.
double predictive_covariance(const ExponentialFamily& family, const Tensor& z, std::size_t i,
                             std::size_t j);

// Multi-output GLM whose summed inputs optionally pass through a normalizer:
//   z_i = gain_i * (a_i - mu_i) / sigma_i + b_i,   a = W x
// with (mu_i, sigma_i) supplied by the norm kind (and fixed to (0, 1) with
// unit gain when norm is None, in which case gain is not a coordinate).
struct GlmModel {
  ExponentialFamily family;
  NormKind norm = NormKind::None;
  Tensor w;  // [H x D]
  Tensor b;  // [H]
  Tensor g;  // [H]

  std::size_t units() const { return w.rows(); }
  std::size_t features() const { return w.cols(); }
};

GlmModel make_glm(ExponentialFamily family, NormKind norm, std::size_t units,
                  std::size_t features, Rng& rng);

// Coordinate layout, unit-major: standard [w_1, b_1, w_2, b_2, ...] with
// D + 1 slots per unit; normalized [w_1, b_1, g_1, ...] with D + 2 slots.
std::size_t theta_dim(const GlmModel& model);
Tensor pack_theta(const GlmModel& model);
GlmModel apply_delta(const GlmModel& model, const Tensor& delta);

// Dataset-level quantities the normalized forward pass and its derivatives
// need: batch statistics of the summed inputs and, for the batch kind, the
// response of sigma to the weights. Rebuilt whenever model or data change.
struct GlmContext {
  Tensor xbar;       // [D] (batch)
  Tensor mu;         // [H] (batch)
  Tensor sigma;      // [H] (batch: batch sigma; weight: row norms)
  Tensor sigma_w;    // [H x D] (batch: rows are Cov(x) w_i / sigma_i)
};

GlmContext make_context(const GlmModel& model, const Tensor& x_cases);

// Natural parameters for one case. For the layer kind the per-case statistics
// are computed here; degenerate statistics (sigma below 1e-8 with a nonzero
// residual) are rejected.
Tensor glm_z(const GlmModel& model, const GlmContext& context, const Tensor& x);

// Mean log-likelihood of labeled cases (y stored row-wise, one row per case).
double glm_mean_log_likelihood(const GlmModel& model, const GlmContext& context,
                               const Tensor& x_cases, const Tensor& y_cases);

}  // namespace normlab
