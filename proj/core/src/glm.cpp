// SPDX-License-Identifier: Apache-2.0
#include "normlab/glm.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

namespace {

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// log sigmoid(z) = -softplus(-z)
double log_sigmoid(double z) { return -softplus(-z); }

constexpr double kSigmaFloor = 1e-8;

}  // namespace

const char* family_kind_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: return "bernoulli-logistic";
    case FamilyKind::GaussianIdentity: return "gaussian-identity";
  }
  return "?";
}

std::optional<FamilyKind> parse_family_kind(const std::string& name) {
  if (name == "bernoulli-logistic" || name == "bernoulli") return FamilyKind::BernoulliLogistic;
  if (name == "gaussian-identity" || name == "gaussian") return FamilyKind::GaussianIdentity;
  return std::nullopt;
}

ExponentialFamily ExponentialFamily::bernoulli() {
  return ExponentialFamily{FamilyKind::BernoulliLogistic, 1.0};
}

ExponentialFamily ExponentialFamily::gaussian(double dispersion) {
  if (dispersion <= 0.0) {
    throw std::invalid_argument("ExponentialFamily::gaussian: dispersion must be positive");
  }
  return ExponentialFamily{FamilyKind::GaussianIdentity, dispersion};
}

double ExponentialFamily::transfer(double z) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: return 1.0 / (1.0 + std::exp(-z));
    case FamilyKind::GaussianIdentity: return z;
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double ExponentialFamily::transfer_derivative(double z) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: {
      const double s = transfer(z);
      return s * (1.0 - s);
    }
    case FamilyKind::GaussianIdentity: return 1.0;
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double ExponentialFamily::log_partition(double z) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: return softplus(z);
    case FamilyKind::GaussianIdentity: return 0.5 * z * z;
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double ExponentialFamily::log_base(double y) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: return 0.0;
    case FamilyKind::GaussianIdentity:
      return -y * y / (2.0 * dispersion) - 0.5 * std::log(2.0 * M_PI * dispersion);
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double ExponentialFamily::log_likelihood(double z, double y) const {
  if (kind == FamilyKind::BernoulliLogistic && y != 0.0 && y != 1.0) {
    throw std::domain_error("ExponentialFamily: bernoulli outcome must be 0 or 1, got " +
                            std::to_string(y));
  }
  return (z * y - log_partition(z)) / dispersion + log_base(y);
}

double ExponentialFamily::sample(double z, Rng& rng) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic:
      return rng.uniform(0.0, 1.0) < transfer(z) ? 1.0 : 0.0;
    case FamilyKind::GaussianIdentity:
      return rng.normal(z, std::sqrt(dispersion));
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double ExponentialFamily::kl_divergence(double z_from, double z_to) const {
  switch (kind) {
    case FamilyKind::BernoulliLogistic: {
      // p (log p - log q) + (1-p)(log(1-p) - log(1-q)) via log-sigmoids,
      // stable for any finite z
      const double p = transfer(z_from);
      return p * (log_sigmoid(z_from) - log_sigmoid(z_to)) +
             (1.0 - p) * (log_sigmoid(-z_from) - log_sigmoid(-z_to));
    }
    case FamilyKind::GaussianIdentity: {
      const double d = z_from - z_to;
      return d * d / (2.0 * dispersion);
    }
  }
  throw std::invalid_argument("ExponentialFamily: unknown kind");
}

double predictive_covariance(const ExponentialFamily& family, const Tensor& z, std::size_t i,
                             std::size_t j) {
  if (i != j) return 0.0;
  return family.dispersion * family.transfer_derivative(z[i]);
}

GlmModel make_glm(ExponentialFamily family, NormKind norm, std::size_t units,
                  std::size_t features, Rng& rng) {
  if (units == 0 || features == 0) {
    throw std::invalid_argument("make_glm: units and features must be positive");
  }
  GlmModel model;
  model.family = family;
  model.norm = norm;
  model.w = Tensor(Shape{units, features});
  const double bound = 1.0 / std::sqrt(static_cast<double>(features));
  rng.fill_uniform(model.w, -bound, bound);
  model.b = Tensor(Shape{units});
  rng.fill_uniform(model.b, -0.1, 0.1);
  model.g = Tensor::full({units}, 1.0);
  return model;
}

std::size_t theta_dim(const GlmModel& model) {
  const std::size_t per_unit = model.norm == NormKind::None ? model.features() + 1
                                                            : model.features() + 2;
  return model.units() * per_unit;
}

Tensor pack_theta(const GlmModel& model) {
  Tensor theta(Shape{theta_dim(model)});
  const std::size_t d = model.features();
  std::size_t k = 0;
  for (std::size_t i = 0; i < model.units(); ++i) {
    for (std::size_t j = 0; j < d; ++j) theta[k++] = model.w.at(i, j);
    theta[k++] = model.b[i];
    if (model.norm != NormKind::None) theta[k++] = model.g[i];
  }
  return theta;
}

GlmModel apply_delta(const GlmModel& model, const Tensor& delta) {
  if (delta.rank() != 1 || delta.size() != theta_dim(model)) {
    throw std::invalid_argument("apply_delta: expected " + std::to_string(theta_dim(model)) +
                                " coordinates, got " + shape_string(delta.shape()));
  }
  GlmModel out = model;
  const std::size_t d = model.features();
  std::size_t k = 0;
  for (std::size_t i = 0; i < model.units(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.w.at(i, j) += delta[k++];
    out.b[i] += delta[k++];
    if (model.norm != NormKind::None) out.g[i] += delta[k++];
  }
  return out;
}

GlmContext make_context(const GlmModel& model, const Tensor& x_cases) {
  if (x_cases.rank() != 2 || x_cases.cols() != model.features()) {
    throw std::invalid_argument("make_context: cases must be [N x " +
                                std::to_string(model.features()) + "], got " +
                                shape_string(x_cases.shape()));
  }
  GlmContext ctx;
  const std::size_t n = x_cases.rows();
  const std::size_t d = model.features();
  const std::size_t h = model.units();
  if (model.norm == NormKind::Weight) {
    ctx.sigma = Tensor(Shape{h});
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += model.w.at(i, j) * model.w.at(i, j);
      ctx.sigma[i] = std::sqrt(s);
      if (ctx.sigma[i] < kSigmaFloor) {
        throw std::domain_error("make_context: weight row " + std::to_string(i) +
                                " has norm below 1e-8, the normalized model is degenerate");
      }
    }
    return ctx;
  }
  if (model.norm != NormKind::Batch) return ctx;

  // Plug-in batch statistics of a = W x over the case set, plus the
  // derivative of sigma_i with respect to w_i: Cov(x) w_i / sigma_i.
  ctx.xbar = reduce_mean(x_cases, 0);
  Tensor a = matmul(x_cases, model.w, false, true);  // [N x H]
  ctx.mu = reduce_mean(a, 0);
  Tensor var = reduce_variance(a, 0, VarianceEstimator::Biased);
  ctx.sigma = Tensor(Shape{h});
  for (std::size_t i = 0; i < h; ++i) {
    ctx.sigma[i] = std::sqrt(var[i]);
    if (ctx.sigma[i] < kSigmaFloor) {
      throw std::domain_error("make_context: unit " + std::to_string(i) +
                              " has batch sigma below 1e-8, the normalized model is degenerate");
    }
  }
  Tensor centered = bcast_sub(x_cases, ctx.xbar, 0);
  Tensor cov(Shape{d, d});
  gemm_into(cov, centered, true, centered, false, 1.0 / static_cast<double>(n));
  ctx.sigma_w = matmul(model.w, cov);  // Cov symmetric, so W Cov = (Cov W^T)^T
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < d; ++j) ctx.sigma_w.at(i, j) /= ctx.sigma[i];
  }
  return ctx;
}

Tensor glm_z(const GlmModel& model, const GlmContext& context, const Tensor& x) {
  if (x.rank() != 1 || x.size() != model.features()) {
    throw std::invalid_argument("glm_z: case must have " + std::to_string(model.features()) +
                                " features, got " + shape_string(x.shape()));
  }
  const std::size_t h = model.units();
  Tensor a = matvec(model.w, x);
  Tensor z(Shape{h});
  switch (model.norm) {
    case NormKind::None:
      for (std::size_t i = 0; i < h; ++i) z[i] = a[i] + model.b[i];
      break;
    case NormKind::Batch:
      for (std::size_t i = 0; i < h; ++i) {
        z[i] = model.g[i] * (a[i] - context.mu[i]) / context.sigma[i] + model.b[i];
      }
      break;
    case NormKind::Weight:
      for (std::size_t i = 0; i < h; ++i) {
        z[i] = model.g[i] * a[i] / context.sigma[i] + model.b[i];
      }
      break;
    case NormKind::Layer: {
      const NormStats stats = layer_norm_stats(a);
      const double sigma = stats.sigma[0];
      for (std::size_t i = 0; i < h; ++i) {
        const double centered = a[i] - stats.mu[0];
        if (centered == 0.0) {
          z[i] = model.b[i];
        } else if (sigma < kSigmaFloor) {
          throw std::domain_error("glm_z: per-case sigma below 1e-8 with nonzero residual, "
                                  "the layer-normalized model is degenerate");
        } else {
          z[i] = model.g[i] * centered / sigma + model.b[i];
        }
      }
      break;
    }
  }
  return z;
}

double glm_mean_log_likelihood(const GlmModel& model, const GlmContext& context,
                               const Tensor& x_cases, const Tensor& y_cases) {
  if (y_cases.rank() != 2 || y_cases.rows() != x_cases.rows() ||
      y_cases.cols() != model.units()) {
    throw std::invalid_argument("glm_mean_log_likelihood: outcomes must be [N x " +
                                std::to_string(model.units()) + "], got " +
                                shape_string(y_cases.shape()));
  }
  const std::size_t n = x_cases.rows();
  const std::size_t d = model.features();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    Tensor x(Shape{d});
    for (std::size_t j = 0; j < d; ++j) x[j] = x_cases.at(r, j);
    const Tensor z = glm_z(model, context, x);
    for (std::size_t i = 0; i < model.units(); ++i) {
      total += model.family.log_likelihood(z[i], y_cases.at(r, i));
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace normlab
