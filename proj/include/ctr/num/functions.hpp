#pragma once

#include <cmath>
#include <span>

namespace ctr {

// Numerically stable logistic function; never overflows, output in [0, 1].
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double leaky_relu(double x, double slope) {
  return x > 0.0 ? x : slope * x;
}

inline double leaky_relu_grad(double x, double slope) {
  return x > 0.0 ? 1.0 : slope;
}

// In-place softmax with max-shift; rows sum to 1 and the result is
// invariant under an additive shift of the logits.
inline void softmax_inplace(std::span<double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

// Gradient of softmax given its output p and upstream dp, written to ds.
inline void softmax_backward(std::span<const double> p,
                             std::span<const double> dp,
                             std::span<double> ds) {
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * dp[i];
  for (std::size_t i = 0; i < p.size(); ++i) ds[i] = p[i] * (dp[i] - inner);
}

}  // namespace ctr
