// SPDX-License-Identifier: Apache-2.0
#include "normlab/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace normlab {

namespace {

Tensor case_row(const Tensor& x_cases, std::size_t r) {
  Tensor x(Shape{x_cases.cols()});
  for (std::size_t j = 0; j < x_cases.cols(); ++j) x[j] = x_cases.at(r, j);
  return x;
}

FisherMatrix finalize(Tensor accum, std::size_t samples) {
  const std::size_t dim = accum.rows();
  accum.scale_(1.0 / static_cast<double>(samples));
  FisherMatrix fisher;
  fisher.asymmetry = 0.0;
  fisher.matrix = Tensor(Shape{dim, dim});
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      fisher.asymmetry = std::max(fisher.asymmetry, std::abs(accum.at(r, c) - accum.at(c, r)));
      fisher.matrix.at(r, c) = 0.5 * (accum.at(r, c) + accum.at(c, r));
    }
  }
  fisher.sample_count = samples;
  return fisher;
}

// Accumulates cov_ij / phi^2 * u_i u_j^T over all unit pairs into the block
// layout with `per_unit` coordinates per unit.
void accumulate_blocks(Tensor& accum, const std::vector<Tensor>& u, const Tensor& z,
                       const ExponentialFamily& family, std::size_t per_unit) {
  const std::size_t h = u.size();
  const double phi2 = family.dispersion * family.dispersion;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      const double cov = predictive_covariance(family, z, i, j);
      if (cov == 0.0) continue;
      const double scale = cov / phi2;
      const std::size_t ro = i * per_unit;
      const std::size_t co = j * per_unit;
      for (std::size_t r = 0; r < per_unit; ++r) {
        const double ur = scale * u[i][r];
        for (std::size_t c = 0; c < per_unit; ++c) {
          accum.at(ro + r, co + c) += ur * u[j][c];
        }
      }
    }
  }
}

void check_cases(const GlmModel& model, const Tensor& x_cases, const char* op) {
  if (x_cases.rank() != 2 || x_cases.cols() != model.features() || x_cases.rows() == 0) {
    throw std::invalid_argument(std::string(op) + ": cases must be non-empty [N x " +
                                std::to_string(model.features()) + "], got " +
                                shape_string(x_cases.shape()));
  }
}

}  // namespace

FisherMatrix fisher_standard(const GlmModel& model, const Tensor& x_cases) {
  if (model.norm != NormKind::None) {
    throw std::invalid_argument("fisher_standard: expected a plain model, norm is " +
                                std::string(norm_kind_name(model.norm)));
  }
  check_cases(model, x_cases, "fisher_standard");
  const std::size_t h = model.units();
  const std::size_t d = model.features();
  const std::size_t per_unit = d + 1;
  const std::size_t dim = h * per_unit;
  const GlmContext ctx = make_context(model, x_cases);
  Tensor accum(Shape{dim, dim});
  std::vector<Tensor> u(h, Tensor(Shape{per_unit}));
  for (std::size_t r = 0; r < x_cases.rows(); ++r) {
    const Tensor x = case_row(x_cases, r);
    const Tensor z = glm_z(model, ctx, x);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < d; ++j) u[i][j] = x[j];
      u[i][d] = 1.0;
    }
    accumulate_blocks(accum, u, z, model.family, per_unit);
  }
  return finalize(std::move(accum), x_cases.rows());
}

Tensor chi_vector(const GlmModel& model, const GlmContext& context, const Tensor& x,
                  std::size_t i) {
  if (i >= model.units()) {
    throw std::invalid_argument("chi_vector: unit " + std::to_string(i) + " out of range for " +
                                std::to_string(model.units()) + " units");
  }
  const std::size_t d = model.features();
  Tensor chi(Shape{d});
  switch (model.norm) {
    case NormKind::None:
      throw std::invalid_argument("chi_vector: undefined for the plain model");
    case NormKind::Weight: {
      // x - (a_i / ||w_i||^2) w_i
      double a = 0.0;
      for (std::size_t j = 0; j < d; ++j) a += model.w.at(i, j) * x[j];
      const double s2 = context.sigma[i] * context.sigma[i];
      for (std::size_t j = 0; j < d; ++j) chi[j] = x[j] - a / s2 * model.w.at(i, j);
      break;
    }
    case NormKind::Batch: {
      // (x - xbar) - t_i * Cov(x) w_i / sigma_i
      double a = 0.0;
      for (std::size_t j = 0; j < d; ++j) a += model.w.at(i, j) * x[j];
      const double t = (a - context.mu[i]) / context.sigma[i];
      for (std::size_t j = 0; j < d; ++j) {
        chi[j] = x[j] - context.xbar[j] - t * context.sigma_w.at(i, j);
      }
      break;
    }
    case NormKind::Layer: {
      // x (1 - 1/H - t_i^2 / H); shared per-case statistics couple the units
      const Tensor a = matvec(model.w, x);
      const NormStats stats = layer_norm_stats(a);
      const double centered = a[i] - stats.mu[0];
      const double h = static_cast<double>(model.units());
      double t2 = 0.0;
      if (centered != 0.0) {
        if (stats.sigma[0] < 1e-8) {
          throw std::domain_error("chi_vector: per-case sigma below 1e-8 with nonzero residual");
        }
        const double t = centered / stats.sigma[0];
        t2 = t * t;
      }
      const double factor = 1.0 - 1.0 / h - t2 / h;
      for (std::size_t j = 0; j < d; ++j) chi[j] = factor * x[j];
      break;
    }
  }
  return chi;
}

FisherMatrix fisher_normalized(const GlmModel& model, const Tensor& x_cases) {
  if (model.norm == NormKind::None) {
    throw std::invalid_argument("fisher_normalized: expected a normalized model");
  }
  check_cases(model, x_cases, "fisher_normalized");
  const std::size_t h = model.units();
  const std::size_t d = model.features();
  const std::size_t per_unit = d + 2;
  const std::size_t dim = h * per_unit;
  const GlmContext ctx = make_context(model, x_cases);
  Tensor accum(Shape{dim, dim});
  std::vector<Tensor> u(h, Tensor(Shape{per_unit}));
  for (std::size_t r = 0; r < x_cases.rows(); ++r) {
    const Tensor x = case_row(x_cases, r);
    const Tensor z = glm_z(model, ctx, x);
    const Tensor a = matvec(model.w, x);
    NormStats layer_stats;
    if (model.norm == NormKind::Layer) layer_stats = layer_norm_stats(a);
    for (std::size_t i = 0; i < h; ++i) {
      double sigma;
      double t;
      switch (model.norm) {
        case NormKind::Batch:
          sigma = ctx.sigma[i];
          t = (a[i] - ctx.mu[i]) / sigma;
          break;
        case NormKind::Weight:
          sigma = ctx.sigma[i];
          t = a[i] / sigma;
          break;
        default: {
          sigma = layer_stats.sigma[0];
          const double centered = a[i] - layer_stats.mu[0];
          t = centered == 0.0 ? 0.0 : centered / sigma;
          break;
        }
      }
      const Tensor chi = chi_vector(model, ctx, x, i);
      const double gs = model.g[i] / sigma;
      for (std::size_t j = 0; j < d; ++j) u[i][j] = gs * chi[j];
      u[i][d] = 1.0;
      u[i][d + 1] = t;
    }
    accumulate_blocks(accum, u, z, model.family, per_unit);
  }
  return finalize(std::move(accum), x_cases.rows());
}

double kl_quadratic(const FisherMatrix& fisher, const Tensor& delta) {
  const std::size_t dim = fisher.matrix.rows();
  if (delta.rank() != 1 || delta.size() != dim) {
    throw std::invalid_argument("kl_quadratic: delta must have " + std::to_string(dim) +
                                " coordinates, got " + shape_string(delta.shape()));
  }
  Tensor fd(Shape{dim});
  gemv_into(fd, fisher.matrix, false, delta);
  return 0.5 * dot(delta, fd);
}

double kl_exact(const GlmModel& model, const Tensor& x_cases, const Tensor& delta) {
  check_cases(model, x_cases, "kl_exact");
  const GlmModel shifted = apply_delta(model, delta);
  const GlmContext ctx = make_context(model, x_cases);
  const GlmContext ctx_shifted = make_context(shifted, x_cases);
  double total = 0.0;
  for (std::size_t r = 0; r < x_cases.rows(); ++r) {
    const Tensor x = case_row(x_cases, r);
    const Tensor z = glm_z(model, ctx, x);
    const Tensor z2 = glm_z(shifted, ctx_shifted, x);
    for (std::size_t i = 0; i < model.units(); ++i) {
      total += model.family.kl_divergence(z[i], z2[i]);
    }
  }
  return total / static_cast<double>(x_cases.rows());
}

namespace {

DirectionMetric quadratic_over_cases(const GlmModel& model, const Tensor& x_cases,
                                     const std::function<void(const Tensor& x, const Tensor& a,
                                                              Tensor& v)>& fill_v) {
  const std::size_t n = x_cases.rows();
  const std::size_t h = model.units();
  const GlmContext ctx = make_context(model, x_cases);
  const double phi2 = model.family.dispersion * model.family.dispersion;
  double sum = 0.0;
  double sum_sq = 0.0;
  Tensor v(Shape{h});
  for (std::size_t r = 0; r < n; ++r) {
    const Tensor x = case_row(x_cases, r);
    const Tensor a = matvec(model.w, x);
    const Tensor z = glm_z(model, ctx, x);
    fill_v(x, a, v);
    double q = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < h; ++j) {
        const double cov = predictive_covariance(model.family, z, i, j);
        if (cov != 0.0) q += cov / phi2 * v[i] * v[j];
      }
    }
    q *= 0.5;
    sum += q;
    sum_sq += q * q;
  }
  DirectionMetric metric;
  metric.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - metric.value * metric.value);
  metric.std_error = std::sqrt(var / static_cast<double>(n));
  return metric;
}

}  // namespace

DirectionMetric gain_direction_metric(const GlmModel& model, const Tensor& x_cases,
                                      const Tensor& delta_g) {
  if (model.norm == NormKind::None) {
    throw std::invalid_argument("gain_direction_metric: expected a normalized model");
  }
  check_cases(model, x_cases, "gain_direction_metric");
  if (delta_g.rank() != 1 || delta_g.size() != model.units()) {
    throw std::invalid_argument("gain_direction_metric: delta must have " +
                                std::to_string(model.units()) + " entries, got " +
                                shape_string(delta_g.shape()));
  }
  const GlmContext ctx = make_context(model, x_cases);
  return quadratic_over_cases(
      model, x_cases, [&](const Tensor& /*x*/, const Tensor& a, Tensor& v) {
        // v_i = delta_g_i t_i under the scheme's own statistics
        switch (model.norm) {
          case NormKind::Batch:
            for (std::size_t i = 0; i < a.size(); ++i) {
              v[i] = delta_g[i] * (a[i] - ctx.mu[i]) / ctx.sigma[i];
            }
            break;
          case NormKind::Weight:
            for (std::size_t i = 0; i < a.size(); ++i) v[i] = delta_g[i] * a[i] / ctx.sigma[i];
            break;
          default: {
            const NormStats stats = layer_norm_stats(a);
            for (std::size_t i = 0; i < a.size(); ++i) {
              const double centered = a[i] - stats.mu[0];
              v[i] = centered == 0.0 ? 0.0 : delta_g[i] * centered / stats.sigma[0];
            }
            break;
          }
        }
      });
}

DirectionMetric projected_weight_metric(const GlmModel& model, const Tensor& x_cases,
                                        const Tensor& delta_g) {
  if (model.norm != NormKind::None) {
    throw std::invalid_argument("projected_weight_metric: expected a plain model, norm is " +
                                std::string(norm_kind_name(model.norm)));
  }
  check_cases(model, x_cases, "projected_weight_metric");
  if (delta_g.rank() != 1 || delta_g.size() != model.units()) {
    throw std::invalid_argument("projected_weight_metric: delta must have " +
                                std::to_string(model.units()) + " entries, got " +
                                shape_string(delta_g.shape()));
  }
  Tensor norms(Shape{model.units()});
  for (std::size_t i = 0; i < model.units(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < model.features(); ++j) s += model.w.at(i, j) * model.w.at(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] < 1e-8) {
      throw std::domain_error("projected_weight_metric: weight row " + std::to_string(i) +
                              " has norm below 1e-8, the projection is undefined");
    }
  }
  return quadratic_over_cases(model, x_cases,
                              [&](const Tensor& /*x*/, const Tensor& a, Tensor& v) {
                                for (std::size_t i = 0; i < a.size(); ++i) {
                                  v[i] = delta_g[i] * a[i] / norms[i];
                                }
                              });
}

double min_eigenvalue(const FisherMatrix& fisher) {
  const std::size_t dim = fisher.matrix.rows();
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = fisher.matrix.at(r, c);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("min_eigenvalue: eigensolver failed to converge");
  }
  return solver.eigenvalues().minCoeff();
}

}  // namespace normlab
