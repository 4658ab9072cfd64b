#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ctr/error.hpp"
#include "ctr/num/dense.hpp"
#include "ctr/num/functions.hpp"

namespace ctr {

// Views over the nine GRU tensors (all k x k matrices and k biases):
//   z = sigmoid(Wz a + Uz h + bz)
//   r = sigmoid(Wr a + Ur h + br)
//   hc = tanh(Wh a + Uh (r . h) + bh)
//   h' = (1 - z) . h + z . hc
struct GruWeights {
  std::span<const double> wz, uz, wr, ur, wh, uh;
  std::span<const double> bz, br, bh;
  std::size_t k = 0;
};

// Mutable gradient accumulators matching GruWeights.
struct GruGrads {
  std::span<double> wz, uz, wr, ur, wh, uh;
  std::span<double> bz, br, bh;
};

// Intermediates cached by the forward pass for the backward pass.
struct GruCache {
  std::vector<double> h, a;   // inputs
  std::vector<double> z, r, hc, rh;
};

inline void gru_forward(std::span<const double> h, std::span<const double> a,
                        const GruWeights& w, std::span<double> h_out,
                        GruCache* cache = nullptr) {
  const std::size_t k = w.k;
  if (h.size() != k || a.size() != k || h_out.size() != k) {
    throw ConfigError("gru_forward: dimension mismatch");
  }
  std::vector<double> z(w.bz.begin(), w.bz.end());
  std::vector<double> r(w.br.begin(), w.br.end());
  matvec_add(w.wz, k, k, a, z);
  matvec_add(w.uz, k, k, h, z);
  matvec_add(w.wr, k, k, a, r);
  matvec_add(w.ur, k, k, h, r);
  for (std::size_t i = 0; i < k; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }

  std::vector<double> rh(k);
  for (std::size_t i = 0; i < k; ++i) rh[i] = r[i] * h[i];

  std::vector<double> hc(w.bh.begin(), w.bh.end());
  matvec_add(w.wh, k, k, a, hc);
  matvec_add(w.uh, k, k, rh, hc);
  for (std::size_t i = 0; i < k; ++i) hc[i] = std::tanh(hc[i]);

  for (std::size_t i = 0; i < k; ++i) {
    h_out[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
  }

  if (cache != nullptr) {
    cache->h.assign(h.begin(), h.end());
    cache->a.assign(a.begin(), a.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->hc = std::move(hc);
    cache->rh = std::move(rh);
  }
}

// Backpropagates dL/dh' through one cell. Adds dL/dh into dh, dL/da into da,
// and weight gradients into g.
inline void gru_backward(const GruCache& c, const GruWeights& w,
                         std::span<const double> dh_out, std::span<double> dh,
                         std::span<double> da, const GruGrads& g) {
  const std::size_t k = w.k;
  std::vector<double> dz(k), dhc(k), daz(k), dar(k), dah(k), drh(k), dr(k);

  for (std::size_t i = 0; i < k; ++i) {
    dz[i] = dh_out[i] * (c.hc[i] - c.h[i]);
    dhc[i] = dh_out[i] * c.z[i];
    dh[i] += dh_out[i] * (1.0 - c.z[i]);
    daz[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
    dah[i] = dhc[i] * (1.0 - c.hc[i] * c.hc[i]);
  }

  // hc path: ah = Wh a + Uh (r.h) + bh
  matvec_t_add(w.uh, k, k, dah, drh);
  for (std::size_t i = 0; i < k; ++i) {
    dr[i] = drh[i] * c.h[i];
    dh[i] += drh[i] * c.r[i];
    dar[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
  }

  matvec_t_add(w.wz, k, k, daz, da);
  matvec_t_add(w.wr, k, k, dar, da);
  matvec_t_add(w.wh, k, k, dah, da);
  matvec_t_add(w.uz, k, k, daz, dh);
  matvec_t_add(w.ur, k, k, dar, dh);

  outer_add(g.wz, daz, c.a);
  outer_add(g.uz, daz, c.h);
  outer_add(g.wr, dar, c.a);
  outer_add(g.ur, dar, c.h);
  outer_add(g.wh, dah, c.a);
  outer_add(g.uh, dah, c.rh);
  axpy(1.0, daz, g.bz);
  axpy(1.0, dar, g.br);
  axpy(1.0, dah, g.bh);
}

// Plain functional form of the cell for callers that do not need gradients.
inline std::vector<double> gru_cell(std::span<const double> h,
                                    std::span<const double> a,
                                    const GruWeights& w) {
  std::vector<double> out(w.k);
  gru_forward(h, a, w, out);
  return out;
}

}  // namespace ctr
