// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "normlab/normalizers.hpp"
#include "normlab/random.hpp"

namespace normlab {

// Executable form of the invariance matrix: which parameter and data
// transforms leave a normalized layer's outputs unchanged, per scheme.

enum class TransformKind {
  WeightMatrixRescale,   // W -> delta W
  WeightMatrixRecenter,  // W -> W + 1 gamma^T
  WeightVectorRescale,   // w_i -> delta w_i
  DatasetRescale,        // every case x -> delta x
  DatasetRecenter,       // every case x -> x + gamma
  CaseRescale,           // one case x_j -> delta x_j
};

constexpr std::size_t kTransformKindCount = 6;
const char* transform_kind_name(TransformKind kind);

struct TransformSpec {
  TransformKind kind;
  double delta = 1.0;
  Tensor gamma;           // recentering vector (feature-sized)
  std::size_t index = 0;  // unit (WeightVectorRescale) or case (CaseRescale)
};

// One normalized layer h = f(gain (a - mu) / sigma + bias), a = W x, with
// statistics per the scheme and epsilon fixed at zero so the invariances in
// the matrix hold exactly.
struct NormalizedLayer {
  NormKind norm = NormKind::Layer;  // Layer, Batch, or Weight
  Tensor w;                         // [H x D]
  AffineParams affine;
  Nonlinearity f = Nonlinearity::Tanh;
};

// Outputs for every case, [N x H]. Batch statistics are taken over the whole
// case set. Degenerate inputs (zero weight rows, constant unit or case
// activations) are rejected since they make the matrix vacuous.
Tensor layer_outputs(const NormalizedLayer& layer, const Tensor& x_cases);

// Pure: returns transformed copies, inputs untouched.
std::pair<NormalizedLayer, Tensor> apply_transform(const NormalizedLayer& layer,
                                                   const Tensor& x_cases,
                                                   const TransformSpec& spec);

TransformSpec sample_transform(TransformKind kind, std::size_t units, std::size_t features,
                               std::size_t cases, Rng& rng);

struct InvarianceTolerances {
  double invariant = 1e-9;    // max deviation an invariant transform may show
  double separation = 1e-3;   // deviation a variant transform must reach
  int trials = 5;
};

struct InvarianceVerdict {
  NormKind scheme;
  TransformKind transform;
  double max_deviation = 0.0;
  bool invariant = false;
  bool expected_invariant = false;
  bool pass = false;
};

// The claimed matrix: expected invariance of `scheme` under `kind`.
bool expected_invariant(NormKind scheme, TransformKind kind);

// Runs `trials` freshly sampled transforms of one kind against one scheme.
// Expected-invariant cells must stay within tol.invariant on every trial;
// expected-variant cells must reach tol.separation on at least one.
InvarianceVerdict measure_invariance(const NormalizedLayer& layer, const Tensor& x_cases,
                                     TransformKind kind, const InvarianceTolerances& tol,
                                     Rng& rng);

// All 18 cells (3 schemes x 6 transforms) sharing one weight matrix and case
// set. Entries come back in scheme-major order: batch, weight, layer.
std::vector<InvarianceVerdict> full_table(const Tensor& w, const AffineParams& affine,
                                          const Tensor& x_cases,
                                          const InvarianceTolerances& tol, Rng& rng);

// Exact identities of the layer scheme, measured as max output deviation over
// the case set (zero up to rounding):
//   joint weight transform W -> delta W + 1 gamma^T
double ln_weight_identity_deviation(const NormalizedLayer& layer, const Tensor& x_cases,
                                    double delta, const Tensor& gamma);
//   single-case rescale x -> delta x
double ln_case_identity_deviation(const NormalizedLayer& layer, const Tensor& x_case,
                                  double delta);

}  // namespace normlab
