// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "normlab/graph.hpp"
#include "normlab/normalizers.hpp"
#include "normlab/random.hpp"

namespace normlab {

// Fully connected 784-1000-1000-10 classifier. The chosen normalizer acts on
// the hidden pre-activations only; the final softmax layer is never
// normalized. With normalization each hidden layer keeps its linear bias and
// adds a per-unit gain/bias pair, so the parameter counts are
//   none:  1,796,010
//   layer: 1,800,010 (and batch likewise).
struct MlpConfig {
  NormKind norm = NormKind::None;  // None | Layer | Batch
  std::vector<std::size_t> dims = {784, 1000, 1000, 10};
  VarianceEstimator estimator = VarianceEstimator::Biased;
  double epsilon = 1e-5;
  double running_decay = 0.9;  // EMA decay for evaluation-time batch statistics
};

class Mlp {
public:
  Mlp(const MlpConfig& config, Rng& rng);

  // Forward pass to pre-softmax logits for a batch X [N x dims[0]].
  // training selects batch statistics (and updates the running averages);
  // evaluation uses the frozen running averages. Layer normalization is the
  // same computation in both modes.
  NodePtr logits(const NodePtr& x, bool training);

  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  const MlpConfig& config() const noexcept { return config_; }
  std::size_t hidden_layers() const noexcept { return config_.dims.size() - 2; }
  const BatchNormRunning& running(std::size_t layer) const { return running_.at(layer); }

private:
  MlpConfig config_;
  ParameterSet params_;
  std::vector<BatchNormRunning> running_;  // one per hidden layer (Batch only)
};

// Row-wise argmax of a logits value [N x K].
std::vector<int> argmax_rows(const Tensor& logits);

struct EvalMetrics {
  double nll = 0.0;
  double error_rate = 0.0;
};

// Evaluation-mode metrics over a labeled case set, processed in chunks.
EvalMetrics evaluate_mlp(Mlp& mlp, const Tensor& images, const std::vector<int>& labels,
                         std::size_t chunk = 1000);

}  // namespace normlab
