// SPDX-License-Identifier: Apache-2.0
#include "normlab/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

// Pin OpenBLAS to one thread when it is the BLAS that got linked; threaded
// reductions reorder floating point sums and break run-to-run bit identity.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace normlab {
namespace {

void pin_blas_threads() {
  static const bool done = [] {
    if (openblas_set_num_threads != nullptr) openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

[[noreturn]] void throw_shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  if (shape_.empty()) throw_shape_error("Tensor", "rank-0 shapes are not supported");
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw_shape_error("Tensor", "rank-0 shapes are not supported");
  if (shape_product(shape_) != data_.size()) {
    throw_shape_error("Tensor", "shape " + shape_string(shape_) + " wants " +
                                    std::to_string(shape_product(shape_)) + " values, got " +
                                    std::to_string(data_.size()));
  }
}

Tensor::Tensor(std::initializer_list<double> values)
    : shape_{values.size()}, data_(values) {
  if (values.size() == 0) throw_shape_error("Tensor", "empty initializer");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw_shape_error("Tensor::dim", "axis " + std::to_string(axis) + " out of range for shape " +
                                         shape_string(shape_));
  }
  return shape_[axis];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  if (rank() != 2 || r >= shape_[0] || c >= shape_[1]) {
    throw_shape_error("Tensor::at", "index (" + std::to_string(r) + ", " + std::to_string(c) +
                                        ") invalid for shape " + shape_string(shape_));
  }
  return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return const_cast<Tensor*>(this)->at(r, c);
}

double Tensor::item() const {
  if (size() != 1) {
    throw_shape_error("Tensor::item", "expected a single element, shape is " +
                                          shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

Tensor& Tensor::add_(const Tensor& other) {
  require_same_shape(*this, other, "Tensor::add_");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::axpy_(double alpha, const Tensor& other) {
  require_same_shape(*this, other, "Tensor::axpy_");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
  return *this;
}

Tensor& Tensor::scale_(double alpha) {
  for (double& v : data_) v *= alpha;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw_shape_error(op, "shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
  }
}

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F&& fn) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return zip(a, b, "divide", [](double x, double y) { return x / y; });
}

Tensor scale(const Tensor& a, double alpha) {
  Tensor out = a;
  out.scale_(alpha);
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  return out;
}

Tensor map(const Tensor& a, const std::function<double(double)>& fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

double apply_nonlinearity(Nonlinearity f, double x) {
  switch (f) {
    case Nonlinearity::Identity: return x;
    case Nonlinearity::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Nonlinearity::Tanh: return std::tanh(x);
    case Nonlinearity::Relu: return x > 0.0 ? x : 0.0;
  }
  throw std::invalid_argument("apply_nonlinearity: unknown kind");
}

double nonlinearity_derivative(Nonlinearity f, double x) {
  switch (f) {
    case Nonlinearity::Identity: return 1.0;
    case Nonlinearity::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Nonlinearity::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Nonlinearity::Relu: return x > 0.0 ? 1.0 : 0.0;
  }
  throw std::invalid_argument("nonlinearity_derivative: unknown kind");
}

Tensor apply_nonlinearity(Nonlinearity f, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_nonlinearity(f, a[i]);
  return out;
}

namespace {

struct AxisInfo {
  std::size_t extent;   // length of the collapsed axis
  std::size_t keep;     // length of the surviving axis (1 for rank-1)
  std::size_t stride;   // step between consecutive elements along the collapsed axis
  std::size_t group;    // step between consecutive surviving slots
};

AxisInfo axis_info(const Tensor& a, std::size_t axis, const char* op) {
  if (a.rank() == 1) {
    if (axis != 0) throw_shape_error(op, "rank-1 tensor only has axis 0");
    return {a.size(), 1, 1, 0};
  }
  if (a.rank() == 2) {
    if (axis == 0) return {a.rows(), a.cols(), a.cols(), 1};
    if (axis == 1) return {a.cols(), a.rows(), 1, a.cols()};
    throw_shape_error(op, "axis " + std::to_string(axis) + " out of range for shape " +
                              shape_string(a.shape()));
  }
  throw_shape_error(op, "rank " + std::to_string(a.rank()) + " not supported");
}

}  // namespace

Tensor reduce_sum(const Tensor& a, std::size_t axis) {
  const AxisInfo ax = axis_info(a, axis, "reduce_sum");
  Tensor out(Shape{ax.keep});
  for (std::size_t k = 0; k < ax.keep; ++k) {
    double s = 0.0;
    const double* base = a.data() + k * ax.group;
    for (std::size_t i = 0; i < ax.extent; ++i) s += base[i * ax.stride];
    out[k] = s;
  }
  return out;
}

Tensor reduce_mean(const Tensor& a, std::size_t axis) {
  const AxisInfo ax = axis_info(a, axis, "reduce_mean");
  Tensor out = reduce_sum(a, axis);
  out.scale_(1.0 / static_cast<double>(ax.extent));
  return out;
}

Tensor reduce_variance(const Tensor& a, std::size_t axis, VarianceEstimator estimator) {
  const AxisInfo ax = axis_info(a, axis, "reduce_variance");
  if (estimator == VarianceEstimator::Unbiased && ax.extent < 2) {
    throw std::invalid_argument("reduce_variance: unbiased estimator needs extent >= 2, axis " +
                                std::to_string(axis) + " of " + shape_string(a.shape()) +
                                " has extent " + std::to_string(ax.extent));
  }
  const Tensor mean = reduce_mean(a, axis);
  const double denom = estimator == VarianceEstimator::Biased
                           ? static_cast<double>(ax.extent)
                           : static_cast<double>(ax.extent - 1);
  Tensor out(Shape{ax.keep});
  for (std::size_t k = 0; k < ax.keep; ++k) {
    double s = 0.0;
    const double* base = a.data() + k * ax.group;
    for (std::size_t i = 0; i < ax.extent; ++i) {
      const double d = base[i * ax.stride] - mean[k];
      s += d * d;
    }
    out[k] = s / denom;
  }
  return out;
}

namespace {

template <typename F>
Tensor bcast(const Tensor& a, const Tensor& v, std::size_t axis, const char* op, F&& fn) {
  const AxisInfo ax = axis_info(a, axis, op);
  if (v.rank() != 1 || v.size() != ax.keep) {
    throw_shape_error(op, "broadcast operand " + shape_string(v.shape()) +
                              " does not match axis-" + std::to_string(axis) + " reduction of " +
                              shape_string(a.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t k = 0; k < ax.keep; ++k) {
    const double* src = a.data() + k * ax.group;
    double* dst = out.data() + k * ax.group;
    const double vv = v[k];
    for (std::size_t i = 0; i < ax.extent; ++i) dst[i * ax.stride] = fn(src[i * ax.stride], vv);
  }
  return out;
}

}  // namespace

void bcast_add_into(Tensor& dst, const Tensor& v, std::size_t axis) {
  const AxisInfo ax = axis_info(dst, axis, "bcast_add_into");
  if (v.rank() != 1 || v.size() != ax.keep) {
    throw_shape_error("bcast_add_into", "broadcast operand " + shape_string(v.shape()) +
                                            " does not match axis-" + std::to_string(axis) +
                                            " reduction of " + shape_string(dst.shape()));
  }
  for (std::size_t k = 0; k < ax.keep; ++k) {
    double* d = dst.data() + k * ax.group;
    const double vv = v[k];
    for (std::size_t i = 0; i < ax.extent; ++i) d[i * ax.stride] += vv;
  }
}

Tensor bcast_add(const Tensor& a, const Tensor& v, std::size_t axis) {
  return bcast(a, v, axis, "bcast_add", [](double x, double y) { return x + y; });
}

Tensor bcast_sub(const Tensor& a, const Tensor& v, std::size_t axis) {
  return bcast(a, v, axis, "bcast_sub", [](double x, double y) { return x - y; });
}

Tensor bcast_mul(const Tensor& a, const Tensor& v, std::size_t axis) {
  return bcast(a, v, axis, "bcast_mul", [](double x, double y) { return x * y; });
}

Tensor bcast_div(const Tensor& a, const Tensor& v, std::size_t axis) {
  return bcast(a, v, axis, "bcast_div", [](double x, double y) { return x / y; });
}

namespace {

void check_rank2(const Tensor& t, const char* op, const char* operand) {
  if (t.rank() != 2) {
    throw_shape_error(op, std::string(operand) + " must be rank-2, got " +
                              shape_string(t.shape()));
  }
}

}  // namespace

void gemm_into(Tensor& c, const Tensor& a, bool trans_a, const Tensor& b, bool trans_b,
               double alpha) {
  pin_blas_threads();
  check_rank2(a, "gemm", "left operand");
  check_rank2(b, "gemm", "right operand");
  check_rank2(c, "gemm", "accumulator");
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb || c.rows() != m || c.cols() != n) {
    throw_shape_error("gemm", "incompatible shapes " + shape_string(a.shape()) +
                                  (trans_a ? "^T" : "") + " * " + shape_string(b.shape()) +
                                  (trans_b ? "^T" : "") + " -> " + shape_string(c.shape()));
  }
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a.data(), static_cast<int>(a.cols()), b.data(),
              static_cast<int>(b.cols()), 1.0, c.data(), static_cast<int>(c.cols()));
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  check_rank2(a, "matmul", "left operand");
  check_rank2(b, "matmul", "right operand");
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  Tensor c(Shape{m, n});
  gemm_into(c, a, trans_a, b, trans_b, 1.0);
  return c;
}

void gemv_into(Tensor& y, const Tensor& w, bool transpose, const Tensor& x, double alpha) {
  pin_blas_threads();
  check_rank2(w, "gemv", "matrix");
  const std::size_t in = transpose ? w.rows() : w.cols();
  const std::size_t out_n = transpose ? w.cols() : w.rows();
  if (x.rank() != 1 || x.size() != in || y.rank() != 1 || y.size() != out_n) {
    throw_shape_error("gemv", "incompatible shapes " + shape_string(w.shape()) +
                                  (transpose ? "^T" : "") + " * " + shape_string(x.shape()) +
                                  " -> " + shape_string(y.shape()));
  }
  cblas_dgemv(CblasRowMajor, transpose ? CblasTrans : CblasNoTrans,
              static_cast<int>(w.rows()), static_cast<int>(w.cols()), alpha, w.data(),
              static_cast<int>(w.cols()), x.data(), 1, 1.0, y.data(), 1);
}

Tensor matvec(const Tensor& w, const Tensor& x, bool transpose) {
  check_rank2(w, "matvec", "matrix");
  Tensor y(Shape{transpose ? w.cols() : w.rows()});
  gemv_into(y, w, transpose, x, 1.0);
  return y;
}

void ger_into(Tensor& a, const Tensor& u, const Tensor& v, double alpha) {
  pin_blas_threads();
  check_rank2(a, "ger", "accumulator");
  if (u.rank() != 1 || v.rank() != 1 || a.rows() != u.size() || a.cols() != v.size()) {
    throw_shape_error("ger", "incompatible shapes " + shape_string(u.shape()) + " outer " +
                                 shape_string(v.shape()) + " -> " + shape_string(a.shape()));
  }
  cblas_dger(CblasRowMajor, static_cast<int>(u.size()), static_cast<int>(v.size()), alpha,
             u.data(), 1, v.data(), 1, a.data(), static_cast<int>(a.cols()));
}

Tensor outer(const Tensor& u, const Tensor& v) {
  Tensor a(Shape{u.size(), v.size()});
  ger_into(a, u, v, 1.0);
  return a;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double linf_norm(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace normlab
