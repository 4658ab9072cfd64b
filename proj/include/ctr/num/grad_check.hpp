#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "ctr/error.hpp"

namespace ctr {

// Compares an analytic gradient against central differences
// (f(p+eps) - f(p-eps)) / 2eps, coordinate by coordinate. Returns the
// maximum relative error |analytic - numeric| / max(1e-8, |a| + |n|).
// `params` is restored to its original values before returning.
inline double finite_diff_check(
    const std::function<double(std::span<const double>)>& loss_fn,
    std::span<const double> analytic_grad, std::span<double> params,
    double eps) {
  double max_err = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss_fn(params);
    params[i] = saved - eps;
    const double down = loss_fn(params);
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DivergenceError("finite_diff_check: non-finite loss");
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = analytic_grad[i];
    const double denom =
        std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
  }
  return max_err;
}

}  // namespace ctr
