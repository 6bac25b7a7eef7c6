// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace normlab {

using Shape = std::vector<std::size_t>;

enum class VarianceEstimator { Biased, Unbiased };

enum class Nonlinearity { Identity, Sigmoid, Tanh, Relu };

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 1 and rank 2 are the only shapes the
// library ever builds, but the storage is rank-agnostic. Shape mismatches are
// programming errors and throw std::invalid_argument with both shapes spelled
// out.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);
  Tensor(std::initializer_list<double> values);  // rank-1
  // Integer braced lists would silently pick the value-list constructor over
  // the shape constructor; force callers to write Tensor(Shape{...}).
  Tensor(std::initializer_list<int> values) = delete;
  Tensor(std::initializer_list<std::size_t> values) = delete;

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double item() const;  // requires size() == 1

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  void fill(double value);
  Tensor& add_(const Tensor& other);                 // this += other
  Tensor& axpy_(double alpha, const Tensor& other);  // this += alpha * other
  Tensor& scale_(double alpha);

private:
  Shape shape_;
  std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// Elementwise arithmetic (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double alpha);
Tensor add_scalar(const Tensor& a, double c);
Tensor map(const Tensor& a, const std::function<double(double)>& fn);

double apply_nonlinearity(Nonlinearity f, double x);
double nonlinearity_derivative(Nonlinearity f, double x);
Tensor apply_nonlinearity(Nonlinearity f, const Tensor& a);

// Reductions. `axis` names the collapsed axis: rank-1 tensors collapse to a
// scalar (axis must be 0); rank-2 tensors collapse rows (axis 0, result has
// `cols` entries) or columns (axis 1, result has `rows` entries).
Tensor reduce_sum(const Tensor& a, std::size_t axis);
Tensor reduce_mean(const Tensor& a, std::size_t axis);
Tensor reduce_variance(const Tensor& a, std::size_t axis, VarianceEstimator estimator);

// dst += v broadcast along `axis`; the accumulation form used by backward passes.
void bcast_add_into(Tensor& dst, const Tensor& v, std::size_t axis);

// Broadcast binaries between a tensor and the result of a reduction along
// `axis` (see above for the axis convention).
Tensor bcast_add(const Tensor& a, const Tensor& v, std::size_t axis);
Tensor bcast_sub(const Tensor& a, const Tensor& v, std::size_t axis);
Tensor bcast_mul(const Tensor& a, const Tensor& v, std::size_t axis);
Tensor bcast_div(const Tensor& a, const Tensor& v, std::size_t axis);

// Dense products (OpenBLAS underneath). matmul multiplies [N x K][K x M];
// the transpose flags read the operand as transposed without materializing.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor matvec(const Tensor& w, const Tensor& x, bool transpose = false);
Tensor outer(const Tensor& u, const Tensor& v);
// c += alpha * op(a) op(b), the accumulation form used by backward passes.
void gemm_into(Tensor& c, const Tensor& a, bool trans_a, const Tensor& b, bool trans_b,
               double alpha = 1.0);
void gemv_into(Tensor& y, const Tensor& w, bool transpose, const Tensor& x, double alpha = 1.0);
void ger_into(Tensor& a, const Tensor& u, const Tensor& v, double alpha = 1.0);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
double linf_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace normlab
