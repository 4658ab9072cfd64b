#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ctr {

// Factorization-machine pairwise interaction sum_{i<j} <v_i, v_j> x_i x_j
// via the O(kn) identity 0.5 * sum_d [ (sum_i v_id x_i)^2 - sum_i v_id^2 x_i^2 ].
// `factors` is the flat row-major embedding table (one k-vector per feature).
// When `field_sums` is non-null it receives sum_i v_id x_i per dimension
// (needed by the backward pass).
inline double fm_pairwise_term(std::span<const double> factors, std::size_t k,
                               std::span<const std::uint32_t> indices,
                               std::span<const double> values,
                               std::vector<double>* field_sums = nullptr) {
  std::vector<double> local;
  std::vector<double>& s = field_sums ? *field_sums : local;
  s.assign(k, 0.0);
  double sq = 0.0;
  for (std::size_t f = 0; f < indices.size(); ++f) {
    const double* row = factors.data() + static_cast<std::size_t>(indices[f]) * k;
    const double x = values[f];
    for (std::size_t d = 0; d < k; ++d) {
      const double vx = row[d] * x;
      s[d] += vx;
      sq += vx * vx;
    }
  }
  double total = 0.0;
  for (std::size_t d = 0; d < k; ++d) total += s[d] * s[d];
  return 0.5 * (total - sq);
}

// Direct O(n^2 k) evaluation of the same sum; serves as the second route of
// the identity check and is deliberately independent of fm_pairwise_term.
inline double fm_pairwise_brute_force(std::span<const double> factors,
                                      std::size_t k,
                                      std::span<const std::uint32_t> indices,
                                      std::span<const double> values) {
  double total = 0.0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t j = i + 1; j < indices.size(); ++j) {
      const double* vi = factors.data() + static_cast<std::size_t>(indices[i]) * k;
      const double* vj = factors.data() + static_cast<std::size_t>(indices[j]) * k;
      double inner = 0.0;
      for (std::size_t d = 0; d < k; ++d) inner += vi[d] * vj[d];
      total += inner * values[i] * values[j];
    }
  }
  return total;
}

}  // namespace ctr
