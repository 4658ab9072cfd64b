#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ctr/error.hpp"
#include "ctr/num/dense.hpp"
#include "ctr/num/functions.hpp"

namespace ctr {

// Multi-head scaled dot-product self-attention over n nodes.
// Projections use the row convention q_i = Wq x_i; all four weight views are
// k x k row-major. k must be divisible by the head count.
struct AttentionWeights {
  std::span<const double> wq, wk, wv, wo;
  std::size_t k = 0;
  std::size_t heads = 1;
};

struct AttentionGrads {
  std::span<double> wq, wk, wv, wo;
};

struct AttentionCache {
  Matrix x, q, k, v, o;
  std::vector<Matrix> attn;  // one n x n matrix per head
};

inline void mha_forward(const Matrix& x, const AttentionWeights& w,
                        Matrix& out, AttentionCache* cache = nullptr) {
  const std::size_t n = x.rows();
  const std::size_t k = w.k;
  if (x.cols() != k) throw ConfigError("mha_forward: dimension mismatch");
  if (k % w.heads != 0) {
    throw ConfigError("mha_forward: k not divisible by head count");
  }
  const std::size_t dh = k / w.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix q(n, k), kk(n, k), v(n, k), o(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    matvec_add(w.wq, k, k, x.row(i), q.row(i));
    matvec_add(w.wk, k, k, x.row(i), kk.row(i));
    matvec_add(w.wv, k, k, x.row(i), v.row(i));
  }

  std::vector<Matrix> attn(w.heads);
  for (std::size_t h = 0; h < w.heads; ++h) {
    Matrix& a = attn[h];
    a = Matrix(n, n);
    const std::size_t c0 = h * dh;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += q(i, c0 + c) * kk(j, c0 + c);
        }
        a(i, j) = s * scale;
      }
      softmax_inplace(a.row(i));
      for (std::size_t j = 0; j < n; ++j) {
        const double aij = a(i, j);
        for (std::size_t c = 0; c < dh; ++c) {
          o(i, c0 + c) += aij * v(j, c0 + c);
        }
      }
    }
  }

  out = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    matvec_add(w.wo, k, k, o.row(i), out.row(i));
  }

  if (cache != nullptr) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(kk);
    cache->v = std::move(v);
    cache->o = std::move(o);
    cache->attn = std::move(attn);
  }
}

// Adds dL/dX into dx and weight gradients into g, given dL/dout.
inline void mha_backward(const AttentionCache& c, const AttentionWeights& w,
                         const Matrix& dout, Matrix& dx,
                         const AttentionGrads& g) {
  const std::size_t n = c.x.rows();
  const std::size_t k = w.k;
  const std::size_t dh = k / w.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix do_(n, k), dq(n, k), dk(n, k), dv(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    outer_add(g.wo, dout.row(i), c.o.row(i));
    matvec_t_add(w.wo, k, k, dout.row(i), do_.row(i));
  }

  std::vector<double> da(n), ds(n);
  for (std::size_t h = 0; h < w.heads; ++h) {
    const Matrix& a = c.attn[h];
    const std::size_t c0 = h * dh;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t cc = 0; cc < dh; ++cc) {
          acc += do_(i, c0 + cc) * c.v(j, c0 + cc);
          dv(j, c0 + cc) += a(i, j) * do_(i, c0 + cc);
        }
        da[j] = acc;
      }
      softmax_backward(a.row(i), da, ds);
      for (std::size_t j = 0; j < n; ++j) {
        const double dsij = ds[j] * scale;
        for (std::size_t cc = 0; cc < dh; ++cc) {
          dq(i, c0 + cc) += dsij * c.k(j, c0 + cc);
          dk(j, c0 + cc) += dsij * c.q(i, c0 + cc);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    outer_add(g.wq, dq.row(i), c.x.row(i));
    outer_add(g.wk, dk.row(i), c.x.row(i));
    outer_add(g.wv, dv.row(i), c.x.row(i));
    matvec_t_add(w.wq, k, k, dq.row(i), dx.row(i));
    matvec_t_add(w.wk, k, k, dk.row(i), dx.row(i));
    matvec_t_add(w.wv, k, k, dv.row(i), dx.row(i));
  }
}

// Functional form of the layer; spec-level entry point.
inline Matrix multi_head_attention(const Matrix& x, const AttentionWeights& w) {
  Matrix out;
  mha_forward(x, w, out);
  return out;
}

}  // namespace ctr
