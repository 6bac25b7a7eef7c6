// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: graph-level matrix products, row-wise
// layer normalization, one recurrent step, and the normalized Fisher
// assembly. Forward+backward variants rebuild the graph per iteration, so
// the numbers include tape construction, which is how the experiment code
// actually runs.

#include <benchmark/benchmark.h>

#include "normlab/geometry.hpp"
#include "normlab/glm.hpp"
#include "normlab/graph.hpp"
#include "normlab/normalizers.hpp"
#include "normlab/random.hpp"
#include "normlab/recurrent.hpp"

namespace {

using namespace normlab;

void BM_TensorMatmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a(Shape{n, n}), b(Shape{n, n});
  rng.fill_normal(a);
  rng.fill_normal(b);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c[0]);
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_TensorMatmul)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_GraphMatmulForwardBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor av(Shape{n, n}), bv(Shape{n, n});
  rng.fill_normal(av);
  rng.fill_normal(bv);
  NodePtr a = leaf(av);
  NodePtr b = leaf(bv);
  for (auto _ : state) {
    NodePtr loss = sum_all(matmul(a, b));
    backward(loss);
    benchmark::DoNotOptimize(a->grad[0]);
  }
}
BENCHMARK(BM_GraphMatmulForwardBackward)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_LayerNormRowsForwardBackward(benchmark::State& state) {
  const std::size_t cases = static_cast<std::size_t>(state.range(0));
  const std::size_t width = 1000;
  Rng rng(3);
  Tensor av(Shape{cases, width});
  rng.fill_normal(av);
  NodePtr a = leaf(av);
  NodePtr gain = leaf(Tensor::full(Shape{width}, 1.0));
  NodePtr bias = leaf(Tensor(Shape{width}));
  for (auto _ : state) {
    NodePtr loss = sum_all(layer_norm_rows(a, gain, bias, 1e-5));
    backward(loss);
    benchmark::DoNotOptimize(gain->grad[0]);
  }
}
BENCHMARK(BM_LayerNormRowsForwardBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_LstmStep(benchmark::State& state) {
  const CellVariant variant =
      state.range(0) == 0 ? CellVariant::Baseline : CellVariant::LnFull;
  Rng rng(4);
  LstmCell cell = LstmCell::create(64, 128, variant, rng);
  Tensor xv(Shape{64}), hv(Shape{128}), cv(Shape{128});
  rng.fill_normal(xv);
  rng.fill_normal(hv);
  rng.fill_normal(cv);
  NodePtr x = constant(xv);
  CellState prev{leaf(hv), leaf(cv)};
  for (auto _ : state) {
    CellState next = cell.step(x, prev);
    benchmark::DoNotOptimize(next.h->value[0]);
  }
}
BENCHMARK(BM_LstmStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_FisherNormalized(benchmark::State& state) {
  Rng rng(5);
  GlmModel model = make_glm(ExponentialFamily::bernoulli(), NormKind::Layer, 8, 6, rng);
  Tensor x(Shape{64, 6});
  rng.fill_normal(x);
  for (auto _ : state) {
    FisherMatrix fisher = fisher_normalized(model, x);
    benchmark::DoNotOptimize(fisher.matrix[0]);
  }
}
BENCHMARK(BM_FisherNormalized)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
