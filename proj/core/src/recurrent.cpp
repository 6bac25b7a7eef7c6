// SPDX-License-Identifier: Apache-2.0
#include "normlab/recurrent.hpp"

#include <cmath>
#include <stdexcept>

#include "normlab/errors.hpp"

namespace normlab {

namespace {

Tensor uniform_init(Shape shape, std::size_t hidden_dim, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  rng.fill_uniform(t, -bound, bound);
  return t;
}

void check_dims(std::size_t input_dim, std::size_t hidden_dim, const char* cell) {
  if (input_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument(std::string(cell) + ": dimensions must be positive, got input " +
                                std::to_string(input_dim) + ", hidden " +
                                std::to_string(hidden_dim));
  }
}

void check_step_shapes(const NodePtr& x, const NodePtr& h, std::size_t input_dim,
                       std::size_t hidden_dim, const char* cell) {
  if (x->value.rank() != 1 || x->value.size() != input_dim) {
    throw std::invalid_argument(std::string(cell) + ": input must be rank-1 with " +
                                std::to_string(input_dim) + " entries, got " +
                                shape_string(x->value.shape()));
  }
  if (h->value.rank() != 1 || h->value.size() != hidden_dim) {
    throw std::invalid_argument(std::string(cell) + ": hidden state must be rank-1 with " +
                                std::to_string(hidden_dim) + " entries, got " +
                                shape_string(h->value.shape()));
  }
}

}  // namespace

const char* cell_variant_name(CellVariant variant) {
  switch (variant) {
    case CellVariant::Baseline: return "baseline";
    case CellVariant::LnFull: return "ln-full";
    case CellVariant::LnCellOnly: return "ln-cell-only";
  }
  return "?";
}

RnnCell RnnCell::create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                        Rng& rng, Nonlinearity f, double eps) {
  check_dims(input_dim, hidden_dim, "RnnCell");
  if (variant == CellVariant::LnCellOnly) {
    throw std::invalid_argument("RnnCell: ln-cell-only is undefined for a cell without an "
                                "internal cell state");
  }
  RnnCell cell;
  cell.variant = variant;
  cell.f = f;
  cell.eps = eps;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.params.add("w_hh", uniform_init(Shape{hidden_dim, hidden_dim}, hidden_dim, rng));
  cell.params.add("w_xh", uniform_init(Shape{hidden_dim, input_dim}, hidden_dim, rng));
  if (variant == CellVariant::LnFull) {
    cell.params.add("gain", Tensor::full({hidden_dim}, 1.0));
  }
  cell.params.add("bias", Tensor::zeros({hidden_dim}));
  return cell;
}

NodePtr RnnCell::step(const NodePtr& x, const NodePtr& h_prev,
                      const StatsOverride* override_stats) const {
  check_step_shapes(x, h_prev, input_dim, hidden_dim, "RnnCell::step");
  const ParameterSet& p = params;
  auto a = add(matvec(p.at("w_hh").node, h_prev), matvec(p.at("w_xh").node, x));
  if (variant == CellVariant::Baseline) {
    return nonlinearity(add(a, p.at("bias").node), f);
  }
  return nonlinearity(layer_norm(a, p.at("gain").node, p.at("bias").node, eps, override_stats),
                      f);
}

LstmCell LstmCell::create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                          Rng& rng, double eps) {
  check_dims(input_dim, hidden_dim, "LstmCell");
  LstmCell cell;
  cell.variant = variant;
  cell.eps = eps;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  const std::size_t gates = 4 * hidden_dim;
  cell.params.add("w_h", uniform_init(Shape{gates, hidden_dim}, hidden_dim, rng));
  cell.params.add("w_x", uniform_init(Shape{gates, input_dim}, hidden_dim, rng));
  cell.params.add("bias", Tensor::zeros({gates}));
  if (variant == CellVariant::LnFull) {
    cell.params.add("gain_h", Tensor::full({gates}, 1.0));
    cell.params.add("bias_h", Tensor::zeros({gates}));
    cell.params.add("gain_x", Tensor::full({gates}, 1.0));
    cell.params.add("bias_x", Tensor::zeros({gates}));
  }
  if (variant != CellVariant::Baseline) {
    cell.params.add("gain_c", Tensor::full({hidden_dim}, 1.0));
    cell.params.add("bias_c", Tensor::zeros({hidden_dim}));
  }
  return cell;
}

CellState LstmCell::step(const NodePtr& x, const CellState& prev,
                         const StatsOverride* override_stats) const {
  check_step_shapes(x, prev.h, input_dim, hidden_dim, "LstmCell::step");
  if (!prev.c || prev.c->value.rank() != 1 || prev.c->value.size() != hidden_dim) {
    throw std::invalid_argument("LstmCell::step: cell state must be rank-1 with " +
                                std::to_string(hidden_dim) + " entries");
  }
  const ParameterSet& p = params;
  auto rec = matvec(p.at("w_h").node, prev.h);
  auto inp = matvec(p.at("w_x").node, x);
  NodePtr pre;
  if (variant == CellVariant::LnFull) {
    auto rec_n = layer_norm(rec, p.at("gain_h").node, p.at("bias_h").node, eps, override_stats);
    auto inp_n = layer_norm(inp, p.at("gain_x").node, p.at("bias_x").node, eps, override_stats);
    pre = add(add(rec_n, inp_n), p.at("bias").node);
  } else {
    pre = add(add(rec, inp), p.at("bias").node);
  }
  const std::size_t h = hidden_dim;
  auto f_gate = sigmoid(slice(pre, 0, h));
  auto i_gate = sigmoid(slice(pre, h, h));
  auto o_gate = sigmoid(slice(pre, 2 * h, h));
  auto g_cand = tanh_elem(slice(pre, 3 * h, h));
  auto c_t = add(mul(f_gate, prev.c), mul(i_gate, g_cand));
  NodePtr c_vis = c_t;
  if (variant != CellVariant::Baseline) {
    c_vis = layer_norm(c_t, p.at("gain_c").node, p.at("bias_c").node, eps, override_stats);
  }
  auto h_t = mul(o_gate, tanh_elem(c_vis));
  return CellState{h_t, c_t};
}

GruCell GruCell::create(std::size_t input_dim, std::size_t hidden_dim, CellVariant variant,
                        Rng& rng, double eps) {
  check_dims(input_dim, hidden_dim, "GruCell");
  if (variant == CellVariant::LnCellOnly) {
    throw std::invalid_argument("GruCell: ln-cell-only is undefined for a cell without an "
                                "internal cell state");
  }
  GruCell cell;
  cell.variant = variant;
  cell.eps = eps;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  const std::size_t gates = 2 * hidden_dim;
  cell.params.add("w_zr_h", uniform_init(Shape{gates, hidden_dim}, hidden_dim, rng));
  cell.params.add("w_zr_x", uniform_init(Shape{gates, input_dim}, hidden_dim, rng));
  cell.params.add("w_c_x", uniform_init(Shape{hidden_dim, input_dim}, hidden_dim, rng));
  cell.params.add("u_c_h", uniform_init(Shape{hidden_dim, hidden_dim}, hidden_dim, rng));
  if (variant == CellVariant::LnFull) {
    cell.params.add("gain_zr_h", Tensor::full({gates}, 1.0));
    cell.params.add("bias_zr_h", Tensor::zeros({gates}));
    cell.params.add("gain_zr_x", Tensor::full({gates}, 1.0));
    cell.params.add("bias_zr_x", Tensor::zeros({gates}));
    cell.params.add("gain_c_x", Tensor::full({hidden_dim}, 1.0));
    cell.params.add("bias_c_x", Tensor::zeros({hidden_dim}));
    cell.params.add("gain_c_h", Tensor::full({hidden_dim}, 1.0));
    cell.params.add("bias_c_h", Tensor::zeros({hidden_dim}));
  }
  return cell;
}

NodePtr GruCell::step(const NodePtr& x, const NodePtr& h_prev,
                      const StatsOverride* override_stats) const {
  check_step_shapes(x, h_prev, input_dim, hidden_dim, "GruCell::step");
  const ParameterSet& p = params;
  auto zr_h = matvec(p.at("w_zr_h").node, h_prev);
  auto zr_x = matvec(p.at("w_zr_x").node, x);
  NodePtr zr;
  if (variant == CellVariant::LnFull) {
    zr = add(layer_norm(zr_h, p.at("gain_zr_h").node, p.at("bias_zr_h").node, eps,
                        override_stats),
             layer_norm(zr_x, p.at("gain_zr_x").node, p.at("bias_zr_x").node, eps,
                        override_stats));
  } else {
    zr = add(zr_h, zr_x);
  }
  const std::size_t h = hidden_dim;
  auto z_gate = sigmoid(slice(zr, 0, h));
  auto r_gate = sigmoid(slice(zr, h, h));
  auto cand_x = matvec(p.at("w_c_x").node, x);
  auto cand_h = matvec(p.at("u_c_h").node, h_prev);
  if (variant == CellVariant::LnFull) {
    cand_x = layer_norm(cand_x, p.at("gain_c_x").node, p.at("bias_c_x").node, eps,
                        override_stats);
    cand_h = layer_norm(cand_h, p.at("gain_c_h").node, p.at("bias_c_h").node, eps,
                        override_stats);
  }
  auto hhat = tanh_elem(add(cand_x, mul(r_gate, cand_h)));
  auto keep = add_const(neg(z_gate), 1.0);
  return add(mul(keep, h_prev), mul(z_gate, hhat));
}

UnrollResult unroll(const std::function<CellState(const NodePtr&, const CellState&)>& step,
                    const std::vector<Tensor>& inputs, const CellState& initial,
                    SequenceLoss loss, bool check_finite) {
  if (inputs.empty()) throw std::invalid_argument("unroll: empty input sequence");
  if (!initial.h) throw std::invalid_argument("unroll: initial hidden state is null");
  UnrollResult result;
  result.hiddens.reserve(inputs.size());
  CellState state = initial;
  NodePtr step_loss_sum;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    state = step(constant(inputs[t]), state);
    if (check_finite && !state.h->value.all_finite()) {
      throw DivergenceError("unroll: non-finite hidden state at step " + std::to_string(t));
    }
    result.hiddens.push_back(state.h);
    if (loss == SequenceLoss::MeanStepSumSquares) {
      auto sq = sum_all(mul(state.h, state.h));
      step_loss_sum = step_loss_sum ? add(step_loss_sum, sq) : sq;
    }
  }
  if (loss == SequenceLoss::FinalSumSquares) {
    result.loss = sum_all(mul(state.h, state.h));
  } else {
    result.loss = scale(step_loss_sum, 1.0 / static_cast<double>(inputs.size()));
  }
  return result;
}

}  // namespace normlab
