// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "normlab/graph.hpp"
#include "normlab/tensor.hpp"

namespace normlab {

enum class NormKind { None, Layer, Batch, Weight };

const char* norm_kind_name(NormKind kind);
std::optional<NormKind> parse_norm_kind(const std::string& name);

// First and second moment of the summed inputs. sigma is stored before the
// epsilon offset; every consumer divides by (sigma + eps).
struct NormStats {
  Tensor mu;
  Tensor sigma;
};

struct AffineParams {
  Tensor gain;
  Tensor bias;
};

// gain = 1, bias = 0: the identity affine pair every scheme starts from.
AffineParams unit_affine(std::size_t h);

// The single scalar update all three schemes share:
//   h = f((gain / (sigma + eps)) * (a - mu) + bias)
// They differ only in where (mu, sigma) come from.
double normalized_unit(double a, double mu, double sigma, double gain, double bias,
                       Nonlinearity f, double eps);

// Per-case statistics across the units of one summed-input vector.
NormStats layer_norm_stats(const Tensor& a);
// Per-unit statistics across the rows (cases) of a batch.
NormStats batch_norm_stats(const Tensor& a_rows, VarianceEstimator estimator);

Tensor layer_norm_apply(const Tensor& a, const AffineParams& params, double eps,
                        Nonlinearity f = Nonlinearity::Identity);
Tensor batch_norm_apply_rows(const Tensor& a_rows, const AffineParams& params,
                             const NormStats& stats, double eps,
                             Nonlinearity f = Nonlinearity::Identity);
// Weight normalization: mu = 0, sigma_i = ||w_i||_2. A zero row is rejected
// by name. Returns f((gain_i / (||w_i|| + eps)) * w_i . x + bias_i).
Tensor weight_norm_apply(const Tensor& w, const Tensor& x, const AffineParams& params,
                         double eps, Nonlinearity f = Nonlinearity::Identity);

// Exponential moving average of batch statistics for evaluation-time
// normalization. Tracks (mu, var); var converts to sigma on read.
class BatchNormRunning {
public:
  BatchNormRunning() = default;
  BatchNormRunning(std::size_t h, double decay);
  void update(const Tensor& batch_mu, const Tensor& batch_var);
  NormStats stats() const;
  const Tensor& mu() const noexcept { return mu_; }
  const Tensor& var() const noexcept { return var_; }

private:
  Tensor mu_;
  Tensor var_;
  double decay_ = 0.99;
};

// Pinned statistics for wiring tests: with (mu, sigma) = (0, 1), eps = 0 and
// identity affine parameters, a normalized path must reproduce its
// unnormalized counterpart bit for bit.
struct StatsOverride {
  Tensor mu;
  Tensor sigma;
};

// Differentiable composites. Gradients flow through mu and sigma unless an
// override pins them.
NodePtr layer_norm(const NodePtr& a, const NodePtr& gain, const NodePtr& bias, double eps,
                   const StatsOverride* override_stats = nullptr);
// Row-wise layer norm over a batch: each row of A [N x H] normalized by its
// own statistics; gain/bias indexed by column.
NodePtr layer_norm_rows(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                        double eps);
// Column-wise batch norm with statistics from this batch (training mode).
NodePtr batch_norm_rows(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                        VarianceEstimator estimator, double eps);
// Batch norm against frozen statistics (evaluation mode).
NodePtr batch_norm_rows_frozen(const NodePtr& a_rows, const NodePtr& gain, const NodePtr& bias,
                               const NormStats& stats, double eps);

}  // namespace normlab
