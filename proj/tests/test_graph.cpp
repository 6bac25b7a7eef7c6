// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "normlab/grad_check.hpp"
#include "normlab/graph.hpp"
#include "normlab/random.hpp"

namespace normlab {
namespace {

// Weighted scalarization: random weights make the reduction sensitive to
// transposition and indexing mistakes a plain sum would hide.
NodePtr weigh(const NodePtr& y, const Tensor& w) { return sum_all(mul(y, constant(w))); }

Tensor rand_like(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  rng.fill_uniform(t, lo, hi);
  return t;
}

void expect_grads_ok(const std::function<NodePtr()>& build, ParameterSet& ps,
                     double tol = 1e-6) {
  GradCheckReport report = finite_diff_check(build, ps.items());
  EXPECT_LT(report.max_rel_err, tol)
      << report.worst_param << "[" << report.worst_index << "] analytic "
      << report.worst_analytic << " numeric " << report.worst_numeric;
}

TEST(GraphForward, EagerValuesAndFrozenCrossEntropy) {
  NodePtr a = leaf(Tensor{1.0, 2.0});
  NodePtr b = leaf(Tensor{3.0, 4.0});
  NodePtr s = add(a, b);
  EXPECT_EQ(s->value[0], 4.0);
  EXPECT_EQ(s->value[1], 6.0);

  // Two equal logits, true class 0: mean NLL is log 2 and the gradient is
  // softmax minus the one-hot target.
  NodePtr logits = leaf(Tensor::matrix(1, 2, {0.0, 0.0}));
  NodePtr loss = softmax_cross_entropy(logits, {0});
  EXPECT_NEAR(loss->value.item(), 0.6931471805599453, 1e-15);
  backward(loss);
  EXPECT_NEAR(logits->grad.at(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(logits->grad.at(0, 1), 0.5, 1e-15);
}

TEST(GraphForward, CrossEntropyIsStableAtLargeLogits) {
  NodePtr logits = leaf(Tensor::matrix(1, 2, {1000.0, 0.0}));
  NodePtr loss = softmax_cross_entropy(logits, {0});
  EXPECT_TRUE(std::isfinite(loss->value.item()));
  EXPECT_NEAR(loss->value.item(), 0.0, 1e-12);
  EXPECT_THROW(softmax_cross_entropy(logits, {2}), std::invalid_argument);
  EXPECT_THROW(softmax_cross_entropy(logits, {0, 1}), std::invalid_argument);
}

TEST(GraphBackward, RootMustBeScalar) {
  NodePtr v = leaf(Tensor{1.0, 2.0});
  EXPECT_THROW(backward(v), std::invalid_argument);
  EXPECT_THROW(backward(nullptr), std::invalid_argument);
}

TEST(GraphBackward, TwoConsumersAccumulateWithinSweep) {
  NodePtr x = leaf(Tensor{3.0});
  NodePtr y = mul(x, x);
  NodePtr loss = sum_all(add(y, x));  // x^2 + x
  backward(loss);
  EXPECT_DOUBLE_EQ(x->grad[0], 7.0);  // 2x + 1
}

TEST(GraphBackward, LeafGradsAccumulateInteriorGradsReset) {
  NodePtr x = leaf(Tensor{1.0});
  NodePtr doubled = scale(x, 2.0);
  NodePtr loss = sum_all(doubled);
  backward(loss);
  backward(loss);
  EXPECT_DOUBLE_EQ(x->grad[0], 4.0);        // leaf: 2 + 2
  EXPECT_DOUBLE_EQ(doubled->grad[0], 1.0);  // interior: reset each sweep
  EXPECT_DOUBLE_EQ(loss->grad[0], 1.0);     // root seeded with one
  x->grad.fill(0.0);
  backward(loss);
  EXPECT_DOUBLE_EQ(x->grad[0], 2.0);
}

TEST(GraphBackward, ConstantsReceiveNoGradient) {
  NodePtr x = leaf(Tensor{2.0});
  NodePtr c = constant(Tensor{5.0});
  NodePtr loss = sum_all(mul(x, c));
  backward(loss);
  EXPECT_DOUBLE_EQ(x->grad[0], 5.0);
  EXPECT_TRUE(c->grad.empty());
  EXPECT_FALSE(c->requires_grad);
}

TEST(GraphBackward, DeepChainUsesIterativeTraversal) {
  NodePtr x = leaf(Tensor{0.0});
  NodePtr y = x;
  for (int i = 0; i < 5000; ++i) y = add_const(y, 1.0);
  NodePtr loss = sum_all(y);
  EXPECT_DOUBLE_EQ(loss->value.item(), 5000.0);
  backward(loss);
  EXPECT_DOUBLE_EQ(x->grad[0], 1.0);
}

TEST(GraphBackward, RepeatedBuildIsBitDeterministic) {
  Rng rng(11);
  Tensor wv = rand_like(Shape{4, 3}, rng);
  Tensor xv = rand_like(Shape{2, 4}, rng);

  auto run = [&](Tensor* grad_out) {
    NodePtr w = leaf(wv);
    NodePtr x = constant(xv);
    NodePtr loss = softmax_cross_entropy(matmul(x, w), {0, 2});
    backward(loss);
    *grad_out = w->grad;
    return loss->value.item();
  };
  Tensor g1, g2;
  double l1 = run(&g1);
  double l2 = run(&g2);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(max_abs_diff(g1, g2), 0.0);
}

TEST(GraphGrad, ElementwiseOps) {
  Rng rng(21);
  ParameterSet ps;
  ps.add("a", rand_like(Shape{3, 4}, rng));
  ps.add("b", rand_like(Shape{3, 4}, rng, 0.5, 1.5));  // safe denominator
  Tensor cw = rand_like(Shape{3, 4}, rng);

  auto a = [&] { return ps.at("a").node; };
  auto b = [&] { return ps.at("b").node; };

  expect_grads_ok([&] { return weigh(add(a(), b()), cw); }, ps);
  expect_grads_ok([&] { return weigh(sub(a(), b()), cw); }, ps);
  expect_grads_ok([&] { return weigh(mul(a(), b()), cw); }, ps);
  expect_grads_ok([&] { return weigh(divide(a(), b()), cw); }, ps);
  expect_grads_ok([&] { return weigh(scale(a(), -1.7), cw); }, ps);
  expect_grads_ok([&] { return weigh(add_const(a(), 2.5), cw); }, ps);
  expect_grads_ok([&] { return weigh(neg(a()), cw); }, ps);
  expect_grads_ok([&] { return weigh(sqrt_elem(b()), cw); }, ps);
}

TEST(GraphGrad, Nonlinearities) {
  Rng rng(22);
  ParameterSet ps;
  // Keep magnitudes off zero so the relu kink never straddles a perturbation.
  Tensor init(Shape{2, 5});
  rng.fill_uniform(init, 0.2, 1.2);
  for (std::size_t i = 0; i < init.size(); i += 2) init[i] = -init[i];
  ps.add("a", init);
  Tensor cw = rand_like(Shape{2, 5}, rng);

  auto a = [&] { return ps.at("a").node; };
  expect_grads_ok([&] { return weigh(nonlinearity(a(), Nonlinearity::Identity), cw); }, ps);
  expect_grads_ok([&] { return weigh(sigmoid(a()), cw); }, ps);
  expect_grads_ok([&] { return weigh(tanh_elem(a()), cw); }, ps);
  expect_grads_ok([&] { return weigh(relu(a()), cw); }, ps);
  expect_grads_ok([&] { return weigh(nonlinearity(a(), Nonlinearity::Tanh), cw); }, ps);
}

TEST(GraphGrad, ReductionsBothAxes) {
  Rng rng(23);
  ParameterSet ps;
  ps.add("a", rand_like(Shape{3, 4}, rng));
  Tensor c_cols = rand_like(Shape{4}, rng);
  Tensor c_rows = rand_like(Shape{3}, rng);
  auto a = [&] { return ps.at("a").node; };

  expect_grads_ok([&] { return weigh(reduce_sum(a(), 0), c_cols); }, ps);
  expect_grads_ok([&] { return weigh(reduce_sum(a(), 1), c_rows); }, ps);
  expect_grads_ok([&] { return weigh(reduce_mean(a(), 0), c_cols); }, ps);
  expect_grads_ok([&] { return weigh(reduce_mean(a(), 1), c_rows); }, ps);
  expect_grads_ok(
      [&] { return weigh(reduce_variance(a(), 0, VarianceEstimator::Biased), c_cols); }, ps);
  expect_grads_ok(
      [&] { return weigh(reduce_variance(a(), 0, VarianceEstimator::Unbiased), c_cols); }, ps);
  expect_grads_ok(
      [&] { return weigh(reduce_variance(a(), 1, VarianceEstimator::Biased), c_rows); }, ps);
  expect_grads_ok([&] { return sum_all(a()); }, ps);
  expect_grads_ok([&] { return mean_all(a()); }, ps);
}

TEST(GraphGrad, BroadcastBinaries) {
  Rng rng(24);
  ParameterSet ps;
  ps.add("a", rand_like(Shape{3, 4}, rng));
  ps.add("v0", rand_like(Shape{4}, rng, 0.5, 1.5));
  ps.add("v1", rand_like(Shape{3}, rng, 0.5, 1.5));
  Tensor cw = rand_like(Shape{3, 4}, rng);
  auto a = [&] { return ps.at("a").node; };
  auto v0 = [&] { return ps.at("v0").node; };
  auto v1 = [&] { return ps.at("v1").node; };

  expect_grads_ok([&] { return weigh(bcast_add(a(), v0(), 0), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_sub(a(), v0(), 0), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_mul(a(), v0(), 0), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_div(a(), v0(), 0), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_add(a(), v1(), 1), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_mul(a(), v1(), 1), cw); }, ps);
  expect_grads_ok([&] { return weigh(bcast_div(a(), v1(), 1), cw); }, ps);
}

TEST(GraphGrad, LinearAlgebraOps) {
  Rng rng(25);
  ParameterSet ps;
  ps.add("w", rand_like(Shape{4, 3}, rng));
  ps.add("x", rand_like(Shape{3}, rng));
  ps.add("b", rand_like(Shape{4}, rng));
  ps.add("xm", rand_like(Shape{2, 4}, rng));
  ps.add("wm", rand_like(Shape{4, 5}, rng));
  ps.add("bm", rand_like(Shape{5}, rng));
  Tensor c_h = rand_like(Shape{4}, rng);
  Tensor c_nm = rand_like(Shape{2, 5}, rng);
  Tensor c_mm = rand_like(Shape{2, 3}, rng);

  auto P = [&](const char* n) { return ps.at(n).node; };

  expect_grads_ok([&] { return weigh(matvec(P("w"), P("x")), c_h); }, ps);
  expect_grads_ok([&] { return weigh(affine(P("w"), P("x"), P("b")), c_h); }, ps);
  expect_grads_ok([&] { return weigh(affine(P("w"), P("x"), nullptr), c_h); }, ps);
  expect_grads_ok([&] { return weigh(matmul(P("xm"), P("wm")), c_nm); }, ps);
  expect_grads_ok([&] { return weigh(linear(P("xm"), P("wm"), P("bm")), c_nm); }, ps);
  expect_grads_ok([&] { return weigh(matmul(P("xm"), P("w")), c_mm); }, ps);
  expect_grads_ok([&] { return dot(P("x"), P("x")); }, ps);
}

TEST(GraphGrad, SliceScatterAddsOverlap) {
  Rng rng(26);
  ParameterSet ps;
  ps.add("a", rand_like(Shape{6}, rng));
  Tensor c1 = rand_like(Shape{3}, rng);
  Tensor c2 = rand_like(Shape{2}, rng);
  auto a = [&] { return ps.at("a").node; };

  // Slices [1,4) and [3,5) share index 3; the checker confirms the scatter
  // accumulates rather than overwrites.
  expect_grads_ok(
      [&] { return add(weigh(slice(a(), 1, 3), c1), weigh(slice(a(), 3, 2), c2)); }, ps);
  EXPECT_THROW(slice(a(), 4, 3), std::invalid_argument);
}

TEST(GraphGrad, SoftmaxCrossEntropy) {
  Rng rng(27);
  ParameterSet ps;
  ps.add("logits", rand_like(Shape{3, 4}, rng));
  expect_grads_ok([&] { return softmax_cross_entropy(ps.at("logits").node, {0, 3, 2}); }, ps);
}

TEST(GraphGrad, CompositeExpression) {
  Rng rng(28);
  ParameterSet ps;
  ps.add("w1", rand_like(Shape{4, 6}, rng, -0.5, 0.5));
  ps.add("b1", rand_like(Shape{6}, rng, -0.1, 0.1));
  ps.add("w2", rand_like(Shape{6, 3}, rng, -0.5, 0.5));
  ps.add("b2", rand_like(Shape{3}, rng, -0.1, 0.1));
  Tensor xv = rand_like(Shape{5, 4}, rng);

  expect_grads_ok(
      [&] {
        NodePtr h = tanh_elem(linear(constant(xv), ps.at("w1").node, ps.at("b1").node));
        NodePtr logits = linear(h, ps.at("w2").node, ps.at("b2").node);
        return softmax_cross_entropy(logits, {0, 1, 2, 0, 1});
      },
      ps);
}

TEST(ParameterSetApi, NamesAndZeroGrads) {
  ParameterSet ps;
  ps.add("w", Tensor{1.0, 2.0});
  ps.add("b", Tensor{3.0});
  EXPECT_EQ(ps.total_size(), 3u);
  EXPECT_THROW(ps.add("w", Tensor{0.0}), std::invalid_argument);
  EXPECT_THROW(ps.at("missing"), std::invalid_argument);

  NodePtr loss = sum_all(mul(ps.at("w").node, ps.at("w").node));
  backward(loss);
  EXPECT_DOUBLE_EQ(ps.at("w").node->grad[0], 2.0);
  ps.zero_grads();
  EXPECT_DOUBLE_EQ(ps.at("w").node->grad[0], 0.0);
}

}  // namespace
}  // namespace normlab
