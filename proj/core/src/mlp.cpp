// SPDX-License-Identifier: Apache-2.0
#include "normlab/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "normlab/errors.hpp"

namespace normlab {

Mlp::Mlp(const MlpConfig& config, Rng& rng) : config_(config) {
  if (config_.dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
  if (config_.norm == NormKind::Weight) {
    throw ConfigError("mlp: weight normalization is not wired into this classifier");
  }
  for (std::size_t l = 0; l + 1 < config_.dims.size(); ++l) {
    std::size_t fan_in = config_.dims[l];
    std::size_t fan_out = config_.dims[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w(Shape{fan_in, fan_out});
    rng.fill_uniform(w, -bound, bound);
    std::string tag = std::to_string(l + 1);
    params_.add("w" + tag, std::move(w));
    params_.add("b" + tag, Tensor(Shape{fan_out}));
    bool hidden = l + 2 < config_.dims.size();
    if (hidden && config_.norm != NormKind::None) {
      params_.add("gain" + tag, Tensor::full(Shape{fan_out}, 1.0));
      params_.add("beta" + tag, Tensor(Shape{fan_out}));
    }
    if (hidden && config_.norm == NormKind::Batch) {
      running_.emplace_back(fan_out, config_.running_decay);
    }
  }
}

NodePtr Mlp::logits(const NodePtr& x, bool training) {
  NodePtr h = x;
  for (std::size_t l = 0; l + 1 < config_.dims.size(); ++l) {
    std::string tag = std::to_string(l + 1);
    NodePtr a = linear(h, params_.at("w" + tag).node, params_.at("b" + tag).node);
    bool hidden = l + 2 < config_.dims.size();
    if (!hidden) return a;  // softmax layer stays unnormalized
    NodePtr pre = a;
    if (config_.norm == NormKind::Layer) {
      pre = layer_norm_rows(a, params_.at("gain" + tag).node, params_.at("beta" + tag).node,
                            config_.epsilon);
    } else if (config_.norm == NormKind::Batch) {
      if (training) {
        running_[l].update(reduce_mean(a->value, 0),
                           reduce_variance(a->value, 0, config_.estimator));
        pre = batch_norm_rows(a, params_.at("gain" + tag).node, params_.at("beta" + tag).node,
                              config_.estimator, config_.epsilon);
      } else {
        pre = batch_norm_rows_frozen(a, params_.at("gain" + tag).node,
                                     params_.at("beta" + tag).node, running_[l].stats(),
                                     config_.epsilon);
      }
    }
    h = relu(pre);
  }
  throw std::logic_error("mlp: unreachable");
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::size_t n = logits.rows();
  std::size_t k = logits.cols();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

EvalMetrics evaluate_mlp(Mlp& mlp, const Tensor& images, const std::vector<int>& labels,
                         std::size_t chunk) {
  std::size_t n = images.rows();
  if (labels.size() != n) throw std::invalid_argument("evaluate_mlp: label count mismatch");
  if (n == 0) throw std::invalid_argument("evaluate_mlp: empty case set");
  std::size_t dim = images.cols();
  double nll_sum = 0.0;
  std::size_t wrong = 0;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    std::size_t len = std::min(chunk, n - begin);
    Tensor block(Shape{len, dim});
    std::copy(images.data() + begin * dim, images.data() + (begin + len) * dim, block.data());
    std::vector<int> block_labels(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                  labels.begin() + static_cast<std::ptrdiff_t>(begin + len));
    NodePtr logits = mlp.logits(constant(std::move(block)), /*training=*/false);
    NodePtr loss = softmax_cross_entropy(logits, block_labels);
    nll_sum += loss->value.item() * static_cast<double>(len);
    std::vector<int> pred = argmax_rows(logits->value);
    for (std::size_t i = 0; i < len; ++i) {
      if (pred[i] != block_labels[i]) ++wrong;
    }
  }
  return EvalMetrics{nll_sum / static_cast<double>(n),
                     static_cast<double>(wrong) / static_cast<double>(n)};
}

}  // namespace normlab
