// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "normlab/normalizers.hpp"
#include "normlab/random.hpp"

namespace normlab {

// Cell wiring variants. Baseline is the plain cell. LnFull normalizes both
// the recurrent and the input summed-input blocks (each with its own gain and
// bias) and, in gated cells, the internal cell state. LnCellOnly leaves the
// gate pre-activations untouched and normalizes only the internal cell state,
// the placement used by sequential attention writers.
enum class CellVariant { Baseline, LnFull, LnCellOnly };

const char* cell_variant_name(CellVariant variant);

// Hidden state threaded through a step; `c` is only set by the LSTM.
struct CellState {
  NodePtr h;
  NodePtr c;
};

// Vanilla recurrent cell: h_t = f(W_hh h_prev + W_xh x_t + b), with the
// LnFull variant normalizing the combined summed inputs before f as
// f(gain/sigma * (a - mu) + b). LnCellOnly is not defined for this cell.
struct RnnCell {
  CellVariant variant = CellVariant::Baseline;
  Nonlinearity f = Nonlinearity::Tanh;
  double eps = 1e-5;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  ParameterSet params;

  static RnnCell create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                        Rng& rng, Nonlinearity f = Nonlinearity::Tanh, double eps = 1e-5);
  NodePtr step(const NodePtr& x, const NodePtr& h_prev,
               const StatsOverride* override_stats = nullptr) const;
};

// LSTM with gates packed in f, i, o, g order along the 4H axis:
//   pre  = W_h h_prev + W_x x + b          (each block layer-normalized in LnFull)
//   c_t  = sig(f) . c_prev + sig(i) . tanh(g)
//   h_t  = sig(o) . tanh(norm_c(c_t))      (norm_c present in LnFull and LnCellOnly)
struct LstmCell {
  CellVariant variant = CellVariant::Baseline;
  double eps = 1e-5;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  ParameterSet params;

  static LstmCell create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                         Rng& rng, double eps = 1e-5);
  CellState step(const NodePtr& x, const CellState& prev,
                 const StatsOverride* override_stats = nullptr) const;
};

// GRU with gates packed in z, r order and no bias terms anywhere:
//   zr   = W_zr_h h_prev + W_zr_x x        (each block layer-normalized in LnFull)
//   hhat = tanh(W_c x + sig(r) . (U_c h_prev))   (both blocks normalized in LnFull)
//   h_t  = (1 - sig(z)) . h_prev + sig(z) . hhat
// LnCellOnly is not defined for this cell.
struct GruCell {
  CellVariant variant = CellVariant::Baseline;
  double eps = 1e-5;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  ParameterSet params;

  static GruCell create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                        Rng& rng, double eps = 1e-5);
  NodePtr step(const NodePtr& x, const NodePtr& h_prev,
               const StatsOverride* override_stats = nullptr) const;
};

enum class SequenceLoss { FinalSumSquares, MeanStepSumSquares };

struct UnrollResult {
  std::vector<NodePtr> hiddens;
  NodePtr loss;
};

// Unrolls a step function over a sequence, building one graph whose backward
// pass is truncation-free backpropagation through time. With check_finite a
// non-finite hidden state raises DivergenceError naming the step.
UnrollResult unroll(const std::function<CellState(const NodePtr&, const CellState&)>& step,
                    const std::vector<Tensor>& inputs, const CellState& initial,
                    SequenceLoss loss, bool check_finite = true);

}  // namespace normlab
