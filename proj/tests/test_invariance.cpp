// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <stdexcept>

#include "normlab/invariance.hpp"
#include "normlab/random.hpp"

namespace normlab {
namespace {

NormalizedLayer make_layer(NormKind norm, std::size_t h, std::size_t d, Rng& rng) {
  NormalizedLayer layer;
  layer.norm = norm;
  layer.w = Tensor(Shape{h, d});
  rng.fill_normal(layer.w);
  layer.affine = unit_affine(h);
  for (std::size_t i = 0; i < h; ++i) layer.affine.gain[i] = rng.log_uniform(0.5, 2.0);
  rng.fill_normal(layer.affine.bias, 0.0, 0.5);
  return layer;
}

Tensor make_cases(std::size_t n, std::size_t d, Rng& rng) {
  Tensor x(Shape{n, d});
  rng.fill_normal(x);
  return x;
}

// The claimed matrix, schemes in batch / weight / layer order and transforms
// in declaration order: weight matrix rescale, weight matrix recenter,
// weight vector rescale, dataset rescale, dataset recenter, case rescale.
const bool kExpected[3][6] = {
    {true, false, true, true, true, false},
    {true, false, true, false, false, false},
    {true, true, false, true, false, true},
};
const NormKind kSchemes[3] = {NormKind::Batch, NormKind::Weight, NormKind::Layer};

TEST(InvarianceMatrix, ExpectedCellsMatchTheClaim) {
  for (int s = 0; s < 3; ++s) {
    for (std::size_t t = 0; t < kTransformKindCount; ++t) {
      EXPECT_EQ(expected_invariant(kSchemes[s], static_cast<TransformKind>(t)),
                kExpected[s][t])
          << norm_kind_name(kSchemes[s]) << " / "
          << transform_kind_name(static_cast<TransformKind>(t));
    }
  }
  EXPECT_THROW(expected_invariant(NormKind::None, TransformKind::DatasetRescale),
               std::invalid_argument);
}

TEST(InvarianceMatrix, FullTableAllCellsPass) {
  Rng rng(101);
  NormalizedLayer proto = make_layer(NormKind::Layer, 5, 7, rng);
  Tensor x = make_cases(16, 7, rng);

  std::vector<InvarianceVerdict> table =
      full_table(proto.w, proto.affine, x, InvarianceTolerances{}, rng);
  ASSERT_EQ(table.size(), 18u);
  for (int s = 0; s < 3; ++s) {
    for (std::size_t t = 0; t < kTransformKindCount; ++t) {
      const InvarianceVerdict& v = table[s * kTransformKindCount + t];
      EXPECT_EQ(v.scheme, kSchemes[s]);
      EXPECT_EQ(v.transform, static_cast<TransformKind>(t));
      EXPECT_EQ(v.expected_invariant, kExpected[s][t]);
      EXPECT_TRUE(v.pass) << norm_kind_name(v.scheme) << " / "
                          << transform_kind_name(v.transform) << " deviation "
                          << v.max_deviation;
      if (v.pass) EXPECT_EQ(v.invariant, v.expected_invariant);
    }
  }
}

TEST(InvarianceMatrix, MeasureSeparatesVariantCells) {
  Rng rng(102);
  NormalizedLayer layer = make_layer(NormKind::Layer, 4, 6, rng);
  Tensor x = make_cases(12, 6, rng);

  InvarianceVerdict inv =
      measure_invariance(layer, x, TransformKind::WeightMatrixRescale,
                         InvarianceTolerances{}, rng);
  EXPECT_TRUE(inv.invariant);
  EXPECT_LE(inv.max_deviation, 1e-9);

  InvarianceVerdict var = measure_invariance(layer, x, TransformKind::WeightVectorRescale,
                                             InvarianceTolerances{}, rng);
  EXPECT_FALSE(var.invariant);
  EXPECT_GE(var.max_deviation, 1e-3);
  EXPECT_TRUE(var.pass);
}

TEST(ApplyTransform, EditsTheRightOperandAndIsPure) {
  Rng rng(103);
  NormalizedLayer layer = make_layer(NormKind::Layer, 3, 4, rng);
  Tensor x = make_cases(5, 4, rng);
  Tensor w_before = layer.w;
  Tensor x_before = x;

  TransformSpec rescale{TransformKind::WeightMatrixRescale, 2.5, Tensor{}, 0};
  auto [l1, x1] = apply_transform(layer, x, rescale);
  EXPECT_DOUBLE_EQ(l1.w.at(1, 2), 2.5 * layer.w.at(1, 2));
  EXPECT_EQ(max_abs_diff(x1, x), 0.0);

  TransformSpec recenter{TransformKind::DatasetRecenter, 1.0, Tensor{1.0, -2.0, 0.5, 3.0}, 0};
  auto [l2, x2] = apply_transform(layer, x, recenter);
  EXPECT_EQ(max_abs_diff(l2.w, layer.w), 0.0);
  EXPECT_DOUBLE_EQ(x2.at(2, 1), x.at(2, 1) - 2.0);

  TransformSpec one_case{TransformKind::CaseRescale, 3.0, Tensor{}, 2};
  auto [l3, x3] = apply_transform(layer, x, one_case);
  EXPECT_DOUBLE_EQ(x3.at(2, 0), 3.0 * x.at(2, 0));
  EXPECT_DOUBLE_EQ(x3.at(1, 0), x.at(1, 0));

  TransformSpec one_unit{TransformKind::WeightVectorRescale, 0.5, Tensor{}, 1};
  auto [l4, x4] = apply_transform(layer, x, one_unit);
  EXPECT_DOUBLE_EQ(l4.w.at(1, 0), 0.5 * layer.w.at(1, 0));
  EXPECT_DOUBLE_EQ(l4.w.at(0, 0), layer.w.at(0, 0));

  // Inputs are untouched throughout.
  EXPECT_EQ(max_abs_diff(layer.w, w_before), 0.0);
  EXPECT_EQ(max_abs_diff(x, x_before), 0.0);

  EXPECT_THROW(apply_transform(layer, x, TransformSpec{TransformKind::WeightMatrixRescale,
                                                       -1.0, Tensor{}, 0}),
               std::invalid_argument);
  EXPECT_THROW(apply_transform(layer, x, TransformSpec{TransformKind::CaseRescale, 2.0,
                                                       Tensor{}, 99}),
               std::invalid_argument);
}

TEST(LayerOutputs, GuardsDegenerateInputs) {
  Rng rng(104);
  NormalizedLayer layer = make_layer(NormKind::Weight, 3, 4, rng);
  Tensor x = make_cases(5, 4, rng);

  NormalizedLayer zero_row = layer;
  zero_row.w.at(1, 0) = 0.0;
  zero_row.w.at(1, 1) = 0.0;
  zero_row.w.at(1, 2) = 0.0;
  zero_row.w.at(1, 3) = 0.0;
  EXPECT_THROW(layer_outputs(zero_row, x), std::domain_error);

  NormalizedLayer none = layer;
  none.norm = NormKind::None;
  EXPECT_THROW(layer_outputs(none, x), std::invalid_argument);

  EXPECT_THROW(layer_outputs(layer, make_cases(1, 4, rng)), std::invalid_argument);
}

TEST(LnIdentities, ExactUpToRounding) {
  Rng rng(105);
  NormalizedLayer layer = make_layer(NormKind::Layer, 6, 5, rng);
  Tensor x = make_cases(10, 5, rng);

  for (int t = 0; t < 10; ++t) {
    double delta = rng.log_uniform(0.5, 2.0);
    Tensor gamma(Shape{5});
    rng.fill_normal(gamma);
    EXPECT_LE(ln_weight_identity_deviation(layer, x, delta, gamma), 1e-12);

    Tensor one_case(Shape{5});
    rng.fill_normal(one_case);
    EXPECT_LE(ln_case_identity_deviation(layer, one_case, delta), 1e-12);
  }

  NormalizedLayer batch = layer;
  batch.norm = NormKind::Batch;
  EXPECT_THROW(ln_weight_identity_deviation(batch, x, 2.0, Tensor::zeros({5})),
               std::invalid_argument);
}

}  // namespace
}  // namespace normlab
