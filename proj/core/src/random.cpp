// SPDX-License-Identifier: Apache-2.0
#include "normlab/random.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

Tensor random_orthogonal(std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("random_orthogonal: n must be positive");
  Tensor q(Shape{n, n});
  rng.fill_normal(q);
  // modified Gram-Schmidt over rows
  for (std::size_t i = 0; i < n; ++i) {
    double* row_i = q.data() + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double* row_j = q.data() + j * n;
      double proj = 0.0;
      for (std::size_t k = 0; k < n; ++k) proj += row_i[k] * row_j[k];
      for (std::size_t k = 0; k < n; ++k) row_i[k] -= proj * row_j[k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += row_i[k] * row_i[k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("random_orthogonal: degenerate draw");
    for (std::size_t k = 0; k < n; ++k) row_i[k] /= norm;
  }
  return q;
}

}  // namespace normlab
