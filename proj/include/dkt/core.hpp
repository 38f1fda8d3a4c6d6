#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dkt {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit reals. Sized for desk-scale models
// (at most a few hundred rows/columns), so no BLAS backend.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: zero dimension");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vector sigmoid(Vector x) {
  for (double& v : x) v = sigmoid(v);
  return x;
}

inline Vector tanh_vec(Vector x) {
  for (double& v : x) v = std::tanh(v);
  return x;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// out = W x + b
inline Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  if (w.cols() != x.size() || w.rows() != b.size())
    throw std::invalid_argument("affine: dimension mismatch (" + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()) + " * " + std::to_string(x.size()) +
                                " + " + std::to_string(b.size()) + ")");
  Vector out(b);
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] += dot(w.row(r), x.data(), x.size());
  return out;
}

// (sum |a_i - b_i|, sum (a_i - b_i)^2)
inline std::pair<double, double> diff_norms(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("diff_norms: length mismatch");
  double l1 = 0.0, l2sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    l1 += std::abs(d);
    l2sq += d * d;
  }
  return {l1, l2sq};
}

inline double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

// Joint norm clipping over a set of tensors: if the global L2 norm exceeds
// `threshold`, every entry is scaled by threshold/norm. Returns the pre-clip
// norm. No-op (and exactly identity) when the norm is already within bounds,
// which also makes the operation idempotent.
inline double clip_global_norm(const std::vector<std::span<double>>& tensors, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_global_norm: threshold must be > 0");
  double sq = 0.0;
  for (const auto& t : tensors) sq += squared_norm(t);
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (const auto& t : tensors)
      for (double& x : t) x *= scale;
  }
  return norm;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace dkt
