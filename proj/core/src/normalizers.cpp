// SPDX-License-Identifier: Apache-2.0
#include "normlab/normalizers.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

const char* norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::None: return "none";
    case NormKind::Layer: return "layer";
    case NormKind::Batch: return "batch";
    case NormKind::Weight: return "weight";
  }
  return "?";
}

std::optional<NormKind> parse_norm_kind(const std::string& name) {
  if (name == "none") return NormKind::None;
  if (name == "layer") return NormKind::Layer;
  if (name == "batch") return NormKind::Batch;
  if (name == "weight") return NormKind::Weight;
  return std::nullopt;
}

AffineParams unit_affine(std::size_t h) {
  return AffineParams{Tensor::full({h}, 1.0), Tensor::zeros({h})};
}

double normalized_unit(double a, double mu, double sigma, double gain, double bias,
                       Nonlinearity f, double eps) {
  return apply_nonlinearity(f, (gain / (sigma + eps)) * (a - mu) + bias);
}

NormStats layer_norm_stats(const Tensor& a) {
  if (a.rank() != 1 || a.size() == 0) {
    throw std::invalid_argument("layer_norm_stats: expected a non-empty rank-1 tensor, got " +
                                shape_string(a.shape()));
  }
  Tensor mu = reduce_mean(a, 0);
  Tensor var = reduce_variance(a, 0, VarianceEstimator::Biased);
  return NormStats{std::move(mu), Tensor{std::sqrt(var[0])}};
}

NormStats batch_norm_stats(const Tensor& a_rows, VarianceEstimator estimator) {
  if (a_rows.rank() != 2) {
    throw std::invalid_argument("batch_norm_stats: expected a rank-2 batch, got " +
                                shape_string(a_rows.shape()));
  }
  Tensor mu = reduce_mean(a_rows, 0);
  Tensor var = reduce_variance(a_rows, 0, estimator);
  Tensor sigma(var.shape());
  for (std::size_t i = 0; i < var.size(); ++i) sigma[i] = std::sqrt(var[i]);
  return NormStats{std::move(mu), std::move(sigma)};
}

Tensor layer_norm_apply(const Tensor& a, const AffineParams& params, double eps, Nonlinearity f) {
  const NormStats stats = layer_norm_stats(a);
  require_same_shape(a, params.gain, "layer_norm_apply");
  require_same_shape(a, params.bias, "layer_norm_apply");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = normalized_unit(a[i], stats.mu[0], stats.sigma[0], params.gain[i], params.bias[i],
                             f, eps);
  }
  return out;
}

Tensor batch_norm_apply_rows(const Tensor& a_rows, const AffineParams& params,
                             const NormStats& stats, double eps, Nonlinearity f) {
  if (a_rows.rank() != 2) {
    throw std::invalid_argument("batch_norm_apply_rows: expected a rank-2 batch, got " +
                                shape_string(a_rows.shape()));
  }
  const std::size_t h = a_rows.cols();
  if (stats.mu.size() != h || stats.sigma.size() != h || params.gain.size() != h ||
      params.bias.size() != h) {
    throw std::invalid_argument("batch_norm_apply_rows: per-unit operands must have " +
                                std::to_string(h) + " entries");
  }
  Tensor out(a_rows.shape());
  for (std::size_t r = 0; r < a_rows.rows(); ++r) {
    for (std::size_t i = 0; i < h; ++i) {
      out[r * h + i] = normalized_unit(a_rows[r * h + i], stats.mu[i], stats.sigma[i],
                                       params.gain[i], params.bias[i], f, eps);
    }
  }
  return out;
}

Tensor weight_norm_apply(const Tensor& w, const Tensor& x, const AffineParams& params, double eps,
                         Nonlinearity f) {
  if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
    throw std::invalid_argument("weight_norm_apply: incompatible shapes " +
                                shape_string(w.shape()) + " and " + shape_string(x.shape()));
  }
  const std::size_t h = w.rows();
  if (params.gain.size() != h || params.bias.size() != h) {
    throw std::invalid_argument("weight_norm_apply: affine parameters must have " +
                                std::to_string(h) + " entries");
  }
  const Tensor a = matvec(w, x);
  Tensor out(Shape{h});
  for (std::size_t i = 0; i < h; ++i) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) norm_sq += w.at(i, j) * w.at(i, j);
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
      throw std::domain_error("weight_norm_apply: row " + std::to_string(i) +
                              " has zero norm, its scale is undefined");
    }
    out[i] = normalized_unit(a[i], 0.0, norm, params.gain[i], params.bias[i], f, eps);
  }
  return out;
}

BatchNormRunning::BatchNormRunning(std::size_t h, double decay)
    : mu_(Tensor::zeros({h})), var_(Tensor::full({h}, 1.0)), decay_(decay) {
  if (decay <= 0.0 || decay >= 1.0) {
    throw std::invalid_argument("BatchNormRunning: decay must lie in (0, 1)");
  }
}

void BatchNormRunning::update(const Tensor& batch_mu, const Tensor& batch_var) {
  require_same_shape(mu_, batch_mu, "BatchNormRunning::update");
  require_same_shape(var_, batch_var, "BatchNormRunning::update");
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    mu_[i] = decay_ * mu_[i] + (1.0 - decay_) * batch_mu[i];
    var_[i] = decay_ * var_[i] + (1.0 - decay_) * batch_var[i];
  }
}

NormStats BatchNormRunning::stats() const {
  Tensor sigma(var_.shape());
  for (std::size_t i = 0; i < var_.size(); ++i) sigma[i] = std::sqrt(var_[i]);
  return NormStats{mu_, std::move(sigma)};
}

NodePtr layer_norm(const NodePtr& a, const NodePtr& gain, const NodePtr& bias, double eps,
                   const StatsOverride* override_stats) {
  if (a->value.rank() != 1) {
    throw std::invalid_argument("layer_norm: expected a rank-1 summed-input vector, got " +
                                shape_string(a->value.shape()));
  }
  NodePtr centered;
  NodePtr sigma;
  if (override_stats != nullptr) {
    centered = bcast_sub(a, constant(override_stats->mu), 0);
    sigma = constant(override_stats->sigma);
  } else {
    const double h = static_cast<double>(a->value.size());
    centered = bcast_sub(a, reduce_mean(a, 0), 0);
    sigma = sqrt_elem(scale(reduce_sum(mul(centered, centered), 0), 1.0 / h));
  }
  auto normalized = bcast_div(centered, add_const(sigma, eps), 0);
  return add(mul(normalized, gain), bias);
}

NodePtr layer_norm_rows(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                        double eps) {
  if (a_rows->value.rank() != 2) {
    throw std::invalid_argument("layer_norm_rows: expected a rank-2 batch, got " +
                                shape_string(a_rows->value.shape()));
  }
  const double h = static_cast<double>(a_rows->value.cols());
  auto centered = bcast_sub(a_rows, reduce_mean(a_rows, 1), 1);
  auto sigma = sqrt_elem(scale(reduce_sum(mul(centered, centered), 1), 1.0 / h));
  auto normalized = bcast_div(centered, add_const(sigma, eps), 1);
  return bcast_add(bcast_mul(normalized, gain, 0), bias, 0);
}

NodePtr batch_norm_rows(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                        VarianceEstimator estimator, double eps) {
  if (a_rows->value.rank() != 2) {
    throw std::invalid_argument("batch_norm_rows: expected a rank-2 batch, got " +
                                shape_string(a_rows->value.shape()));
  }
  const std::size_t n = a_rows->value.rows();
  if (estimator == VarianceEstimator::Unbiased && n < 2) {
    throw std::invalid_argument("batch_norm_rows: unbiased variance needs at least 2 cases, got " +
                                std::to_string(n));
  }
  const double denom = estimator == VarianceEstimator::Biased ? static_cast<double>(n)
                                                              : static_cast<double>(n - 1);
  auto centered = bcast_sub(a_rows, reduce_mean(a_rows, 0), 0);
  auto sigma = sqrt_elem(scale(reduce_sum(mul(centered, centered), 0), 1.0 / denom));
  auto normalized = bcast_div(centered, add_const(sigma, eps), 0);
  return bcast_add(bcast_mul(normalized, gain, 0), bias, 0);
}

NodePtr batch_norm_rows_frozen(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                               const NormStats& stats, double eps) {
  if (a_rows->value.rank() != 2) {
    throw std::invalid_argument("batch_norm_rows_frozen: expected a rank-2 batch, got " +
                                shape_string(a_rows->value.shape()));
  }
  auto centered = bcast_sub(a_rows, constant(stats.mu), 0);
  auto normalized = bcast_div(centered, constant(add_scalar(stats.sigma, eps)), 0);
  return bcast_add(bcast_mul(normalized, gain, 0), bias, 0);
}

}  // namespace normlab
