// SPDX-License-Identifier: Apache-2.0
#include "normlab/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

namespace {

double eval_loss(const std::function<NodePtr()>& build_loss, const std::string& param,
                 std::size_t index) {
  NodePtr root = build_loss();
  const double v = root->value.item();
  if (!std::isfinite(v)) {
    throw std::runtime_error("finite_diff_check: non-finite loss while perturbing '" + param +
                             "'[" + std::to_string(index) + "]");
  }
  return v;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<NodePtr()>& build_loss,
                                  std::vector<Parameter>& params, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: step h must be positive");

  zero_grads(params);
  NodePtr root = build_loss();
  if (!std::isfinite(root->value.item())) {
    throw std::runtime_error("finite_diff_check: non-finite loss at the base point");
  }
  backward(root);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.node->grad_buffer());

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    if (!p.trainable) continue;
    Tensor& value = p.node->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = eval_loss(build_loss, p.name, i);
      value[i] = saved - h;
      const double down = eval_loss(build_loss, p.name, i);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace normlab
