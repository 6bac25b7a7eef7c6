// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "normlab/adam.hpp"
#include "normlab/errors.hpp"

namespace normlab {
namespace {

TEST(Adam, FirstStepMatchesClosedForm) {
  // p = 0, g = 2, lr = 0.1, defaults: bias correction makes the first step
  // almost exactly -lr, short of it only by the eps in the denominator.
  ParameterSet ps;
  Parameter& p = ps.add("p", Tensor{0.0});
  p.node->grad_buffer().fill(2.0);
  AdamState state;
  adam_step(p, state, AdamConfig{.lr = 0.1});
  EXPECT_NEAR(p.value()[0], -0.0999999995, 1e-12);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientLeavesParameterFixed) {
  ParameterSet ps;
  Parameter& p = ps.add("p", Tensor{1.5});
  p.node->grad_buffer().fill(0.0);
  AdamState state;
  adam_step(p, state, AdamConfig{});
  EXPECT_DOUBLE_EQ(p.value()[0], 1.5);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  ParameterSet ps;
  Parameter& p = ps.add("w_hh", Tensor{1.0});
  p.node->grad_buffer().fill(std::nan(""));
  AdamState state;
  try {
    adam_step(p, state, AdamConfig{});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("w_hh"), std::string::npos) << e.what();
  }
  // The rejected step must not have touched the parameter or the moments.
  EXPECT_DOUBLE_EQ(p.value()[0], 1.0);
  EXPECT_EQ(state.step, 0);
}

TEST(Adam, OptimizerSkipsNonTrainableParameters) {
  ParameterSet ps;
  ps.add("train_me", Tensor{0.0});
  ps.add("frozen", Tensor{5.0}, /*trainable=*/false);
  ps.at("train_me").node->grad_buffer().fill(1.0);
  ps.at("frozen").node->grad_buffer().fill(1.0);

  AdamOptimizer opt(ps, AdamConfig{.lr = 0.1});
  opt.step();
  EXPECT_LT(ps.at("train_me").value()[0], 0.0);
  EXPECT_DOUBLE_EQ(ps.at("frozen").value()[0], 5.0);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParameterSet ps;
  ps.add("p", Tensor{10.0});
  AdamOptimizer opt(ps, AdamConfig{.lr = 0.1});
  for (int i = 0; i < 800; ++i) {
    ps.zero_grads();
    NodePtr d = add_const(ps.at("p").node, -3.0);
    backward(sum_all(mul(d, d)));
    opt.step();
  }
  EXPECT_NEAR(ps.at("p").value()[0], 3.0, 1e-3);
}

TEST(Adam, StateTracksMomentsAcrossSteps) {
  ParameterSet ps;
  Parameter& p = ps.add("p", Tensor{0.0});
  AdamState state;
  AdamConfig cfg{.lr = 0.01};
  for (int t = 1; t <= 3; ++t) {
    p.node->grad_buffer().fill(1.0);
    adam_step(p, state, cfg);
    EXPECT_EQ(state.step, t);
  }
  // Constant unit gradient: m -> 1, v -> 1, each bias-corrected step is
  // close to -lr regardless of t.
  EXPECT_NEAR(p.value()[0], -0.03, 1e-6);
}

}  // namespace
}  // namespace normlab
