#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctr/error.hpp"

namespace ctr {

// Row-major dense matrix of doubles. Minimal surface: the models only need
// element access, row views and a few explicit-loop kernels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data_.data() + r * cols_, cols_);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols_, cols_);
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y += A x, with A given as a k_out x k_in row-major span.
inline void matvec_add(std::span<const double> a, std::size_t k_out,
                       std::size_t k_in, std::span<const double> x,
                       std::span<double> y) {
  for (std::size_t r = 0; r < k_out; ++r) {
    const double* row = a.data() + r * k_in;
    double acc = 0.0;
    for (std::size_t c = 0; c < k_in; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += A^T x (A is k_out x k_in, x has k_out entries, y has k_in).
inline void matvec_t_add(std::span<const double> a, std::size_t k_out,
                         std::size_t k_in, std::span<const double> x,
                         std::span<double> y) {
  for (std::size_t r = 0; r < k_out; ++r) {
    const double* row = a.data() + r * k_in;
    const double xr = x[r];
    for (std::size_t c = 0; c < k_in; ++c) y[c] += row[c] * xr;
  }
}

// A += x y^T (outer product accumulate; A is |x| x |y| row-major).
inline void outer_add(std::span<double> a, std::span<const double> x,
                      std::span<const double> y) {
  for (std::size_t r = 0; r < x.size(); ++r) {
    double* row = a.data() + r * y.size();
    const double xr = x[r];
    for (std::size_t c = 0; c < y.size(); ++c) row[c] += xr * y[c];
  }
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline void axpy(double alpha, std::span<const double> x,
                 std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace ctr
