// SPDX-License-Identifier: Apache-2.0
#include "normlab/invariance.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

namespace {

Tensor case_row(const Tensor& x_cases, std::size_t r) {
  Tensor x(Shape{x_cases.cols()});
  for (std::size_t j = 0; j < x_cases.cols(); ++j) x[j] = x_cases.at(r, j);
  return x;
}

void check_layer(const NormalizedLayer& layer, const Tensor& x_cases) {
  if (layer.norm == NormKind::None) {
    throw std::invalid_argument("layer_outputs: the invariance matrix is about the three "
                                "normalization schemes, not the plain layer");
  }
  if (layer.w.rank() != 2 || x_cases.rank() != 2 || layer.w.cols() != x_cases.cols()) {
    throw std::invalid_argument("layer_outputs: weights " + shape_string(layer.w.shape()) +
                                " incompatible with cases " + shape_string(x_cases.shape()));
  }
  const std::size_t h = layer.w.rows();
  if (layer.affine.gain.size() != h || layer.affine.bias.size() != h) {
    throw std::invalid_argument("layer_outputs: affine parameters must have " +
                                std::to_string(h) + " entries");
  }
  if (x_cases.rows() < 2 || h < 2) {
    throw std::invalid_argument("layer_outputs: need at least 2 cases and 2 units, got " +
                                shape_string(x_cases.shape()) + " cases and " +
                                std::to_string(h) + " units");
  }
  // Degenerate geometry makes every scheme's statistics collapse; reject it
  // rather than reporting vacuous invariances.
  for (std::size_t i = 0; i < h; ++i) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < layer.w.cols(); ++j) {
      norm_sq += layer.w.at(i, j) * layer.w.at(i, j);
    }
    if (norm_sq < 1e-12) {
      throw std::domain_error("layer_outputs: weight row " + std::to_string(i) +
                              " is numerically zero");
    }
  }
  const Tensor a = matmul(x_cases, layer.w, false, true);  // [N x H]
  const Tensor unit_var = reduce_variance(a, 0, VarianceEstimator::Biased);
  for (std::size_t i = 0; i < h; ++i) {
    if (unit_var[i] < 1e-12) {
      throw std::domain_error("layer_outputs: unit " + std::to_string(i) +
                              " has constant summed input over the case set");
    }
  }
  const Tensor case_var = reduce_variance(a, 1, VarianceEstimator::Biased);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (case_var[r] < 1e-12) {
      throw std::domain_error("layer_outputs: case " + std::to_string(r) +
                              " has constant summed inputs across units");
    }
  }
}

}  // namespace

const char* transform_kind_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::WeightMatrixRescale: return "weight-matrix-rescale";
    case TransformKind::WeightMatrixRecenter: return "weight-matrix-recenter";
    case TransformKind::WeightVectorRescale: return "weight-vector-rescale";
    case TransformKind::DatasetRescale: return "dataset-rescale";
    case TransformKind::DatasetRecenter: return "dataset-recenter";
    case TransformKind::CaseRescale: return "case-rescale";
  }
  return "?";
}

Tensor layer_outputs(const NormalizedLayer& layer, const Tensor& x_cases) {
  check_layer(layer, x_cases);
  const std::size_t n = x_cases.rows();
  const std::size_t h = layer.w.rows();
  Tensor out(Shape{n, h});
  switch (layer.norm) {
    case NormKind::Batch: {
      const Tensor a = matmul(x_cases, layer.w, false, true);
      const NormStats stats = batch_norm_stats(a, VarianceEstimator::Biased);
      const Tensor rows = batch_norm_apply_rows(a, layer.affine, stats, 0.0, layer.f);
      out = rows;
      break;
    }
    case NormKind::Layer: {
      for (std::size_t r = 0; r < n; ++r) {
        const Tensor a = matvec(layer.w, case_row(x_cases, r));
        const Tensor hrow = layer_norm_apply(a, layer.affine, 0.0, layer.f);
        for (std::size_t i = 0; i < h; ++i) out.at(r, i) = hrow[i];
      }
      break;
    }
    case NormKind::Weight: {
      for (std::size_t r = 0; r < n; ++r) {
        const Tensor hrow = weight_norm_apply(layer.w, case_row(x_cases, r), layer.affine, 0.0,
                                              layer.f);
        for (std::size_t i = 0; i < h; ++i) out.at(r, i) = hrow[i];
      }
      break;
    }
    case NormKind::None: break;  // unreachable, rejected above
  }
  return out;
}

std::pair<NormalizedLayer, Tensor> apply_transform(const NormalizedLayer& layer,
                                                   const Tensor& x_cases,
                                                   const TransformSpec& spec) {
  if (spec.delta <= 0.0) {
    throw std::invalid_argument("apply_transform: delta must be positive, got " +
                                std::to_string(spec.delta));
  }
  NormalizedLayer out_layer = layer;
  Tensor out_cases = x_cases;
  const std::size_t d = layer.w.cols();
  switch (spec.kind) {
    case TransformKind::WeightMatrixRescale:
      out_layer.w.scale_(spec.delta);
      break;
    case TransformKind::WeightMatrixRecenter: {
      if (spec.gamma.rank() != 1 || spec.gamma.size() != d) {
        throw std::invalid_argument("apply_transform: recentering vector must have " +
                                    std::to_string(d) + " entries, got " +
                                    shape_string(spec.gamma.shape()));
      }
      for (std::size_t i = 0; i < out_layer.w.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out_layer.w.at(i, j) += spec.gamma[j];
      }
      break;
    }
    case TransformKind::WeightVectorRescale: {
      if (spec.index >= layer.w.rows()) {
        throw std::invalid_argument("apply_transform: unit " + std::to_string(spec.index) +
                                    " out of range for " + std::to_string(layer.w.rows()) +
                                    " units");
      }
      for (std::size_t j = 0; j < d; ++j) out_layer.w.at(spec.index, j) *= spec.delta;
      break;
    }
    case TransformKind::DatasetRescale:
      out_cases.scale_(spec.delta);
      break;
    case TransformKind::DatasetRecenter: {
      if (spec.gamma.rank() != 1 || spec.gamma.size() != d) {
        throw std::invalid_argument("apply_transform: recentering vector must have " +
                                    std::to_string(d) + " entries, got " +
                                    shape_string(spec.gamma.shape()));
      }
      for (std::size_t r = 0; r < out_cases.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) out_cases.at(r, j) += spec.gamma[j];
      }
      break;
    }
    case TransformKind::CaseRescale: {
      if (spec.index >= x_cases.rows()) {
        throw std::invalid_argument("apply_transform: case " + std::to_string(spec.index) +
                                    " out of range for " + std::to_string(x_cases.rows()) +
                                    " cases");
      }
      for (std::size_t j = 0; j < d; ++j) out_cases.at(spec.index, j) *= spec.delta;
      break;
    }
  }
  return {std::move(out_layer), std::move(out_cases)};
}

TransformSpec sample_transform(TransformKind kind, std::size_t units, std::size_t features,
                               std::size_t cases, Rng& rng) {
  TransformSpec spec;
  spec.kind = kind;
  spec.delta = rng.log_uniform(0.25, 4.0);
  spec.gamma = Tensor(Shape{features});
  rng.fill_normal(spec.gamma);
  spec.index = kind == TransformKind::CaseRescale ? rng.uniform_index(cases)
                                                  : rng.uniform_index(units);
  return spec;
}

bool expected_invariant(NormKind scheme, TransformKind kind) {
  switch (scheme) {
    case NormKind::Batch:
      switch (kind) {
        case TransformKind::WeightMatrixRescale: return true;
        case TransformKind::WeightMatrixRecenter: return false;
        case TransformKind::WeightVectorRescale: return true;
        case TransformKind::DatasetRescale: return true;
        case TransformKind::DatasetRecenter: return true;
        case TransformKind::CaseRescale: return false;
      }
      break;
    case NormKind::Weight:
      switch (kind) {
        case TransformKind::WeightMatrixRescale: return true;
        case TransformKind::WeightMatrixRecenter: return false;
        case TransformKind::WeightVectorRescale: return true;
        case TransformKind::DatasetRescale: return false;
        case TransformKind::DatasetRecenter: return false;
        case TransformKind::CaseRescale: return false;
      }
      break;
    case NormKind::Layer:
      switch (kind) {
        case TransformKind::WeightMatrixRescale: return true;
        case TransformKind::WeightMatrixRecenter: return true;
        case TransformKind::WeightVectorRescale: return false;
        case TransformKind::DatasetRescale: return true;
        case TransformKind::DatasetRecenter: return false;
        case TransformKind::CaseRescale: return true;
      }
      break;
    case NormKind::None:
      throw std::invalid_argument("expected_invariant: the matrix covers the three schemes");
  }
  throw std::invalid_argument("expected_invariant: unknown cell");
}

InvarianceVerdict measure_invariance(const NormalizedLayer& layer, const Tensor& x_cases,
                                     TransformKind kind, const InvarianceTolerances& tol,
                                     Rng& rng) {
  if (tol.trials < 1) {
    throw std::invalid_argument("measure_invariance: trials must be positive");
  }
  const Tensor base = layer_outputs(layer, x_cases);
  InvarianceVerdict verdict;
  verdict.scheme = layer.norm;
  verdict.transform = kind;
  verdict.expected_invariant = expected_invariant(layer.norm, kind);
  for (int trial = 0; trial < tol.trials; ++trial) {
    const TransformSpec spec =
        sample_transform(kind, layer.w.rows(), layer.w.cols(), x_cases.rows(), rng);
    const auto [t_layer, t_cases] = apply_transform(layer, x_cases, spec);
    const Tensor transformed = layer_outputs(t_layer, t_cases);
    verdict.max_deviation = std::max(verdict.max_deviation, max_abs_diff(base, transformed));
  }
  verdict.invariant = verdict.max_deviation <= tol.invariant;
  verdict.pass = verdict.expected_invariant ? verdict.invariant
                                            : verdict.max_deviation >= tol.separation;
  return verdict;
}

std::vector<InvarianceVerdict> full_table(const Tensor& w, const AffineParams& affine,
                                          const Tensor& x_cases,
                                          const InvarianceTolerances& tol, Rng& rng) {
  std::vector<InvarianceVerdict> verdicts;
  verdicts.reserve(3 * kTransformKindCount);
  for (NormKind scheme : {NormKind::Batch, NormKind::Weight, NormKind::Layer}) {
    NormalizedLayer layer{scheme, w, affine, Nonlinearity::Tanh};
    for (std::size_t k = 0; k < kTransformKindCount; ++k) {
      verdicts.push_back(
          measure_invariance(layer, x_cases, static_cast<TransformKind>(k), tol, rng));
    }
  }
  return verdicts;
}

double ln_weight_identity_deviation(const NormalizedLayer& layer, const Tensor& x_cases,
                                    double delta, const Tensor& gamma) {
  if (layer.norm != NormKind::Layer) {
    throw std::invalid_argument("ln_weight_identity_deviation: layer scheme required");
  }
  const Tensor base = layer_outputs(layer, x_cases);
  NormalizedLayer t = layer;
  t.w.scale_(delta);
  if (gamma.rank() != 1 || gamma.size() != layer.w.cols()) {
    throw std::invalid_argument("ln_weight_identity_deviation: gamma must have " +
                                std::to_string(layer.w.cols()) + " entries");
  }
  for (std::size_t i = 0; i < t.w.rows(); ++i) {
    for (std::size_t j = 0; j < t.w.cols(); ++j) t.w.at(i, j) += gamma[j];
  }
  return max_abs_diff(base, layer_outputs(t, x_cases));
}

double ln_case_identity_deviation(const NormalizedLayer& layer, const Tensor& x_case,
                                  double delta) {
  if (layer.norm != NormKind::Layer) {
    throw std::invalid_argument("ln_case_identity_deviation: layer scheme required");
  }
  if (x_case.rank() != 1 || x_case.size() != layer.w.cols()) {
    throw std::invalid_argument("ln_case_identity_deviation: case must have " +
                                std::to_string(layer.w.cols()) + " features");
  }
  const Tensor a = matvec(layer.w, x_case);
  const Tensor base = layer_norm_apply(a, layer.affine, 0.0, layer.f);
  const Tensor a2 = matvec(layer.w, scale(x_case, delta));
  const Tensor shifted = layer_norm_apply(a2, layer.affine, 0.0, layer.f);
  return max_abs_diff(base, shifted);
}

}  // namespace normlab
