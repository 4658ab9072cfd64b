#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ctr/data/dataset.hpp"
#include "ctr/num/attention.hpp"
#include "ctr/num/dense.hpp"
#include "ctr/num/functions.hpp"
#include "ctr/num/gru.hpp"

namespace ctr {

// Field-interaction GNN over the complete graph of the 39 fields:
//   1. embed field indices to k-dim node vectors
//   2. one multi-head self-attention layer -> initial states h0
//   3. T propagation steps: attentional edge weights (leaky-ReLU scoring on
//      [h_i || h_j], softmax over j != i), per-node outgoing projections,
//      GRU state update plus residual connection to h0
//   4. readout: two per-node linear scorers, logit = sum_i alpha_i * s_i

inline constexpr double kEdgeLeakySlope = 0.2;

struct FignnViews {
  std::span<const double> embed;      // total_features x k
  AttentionWeights attn;
  std::span<const double> edge_attn;  // scorer on [h_i || h_j], length 2k
  std::span<const double> edge_wout;  // n stacked k x k projections
  GruWeights gru;
  std::span<const double> score_w, score_b;  // readout value scorer
  std::span<const double> attn_w, attn_b;    // readout attention scorer
  std::size_t k = 0;
  std::size_t steps = 0;
};

struct FignnGrads {
  std::span<double> embed;
  AttentionGrads attn;
  std::span<double> edge_attn;
  std::span<double> edge_wout;
  GruGrads gru;
  std::span<double> score_w, score_b, attn_w, attn_b;
};

// Everything the backward pass needs from one example's forward pass.
struct FignnCache {
  Matrix x;
  AttentionCache attn;
  std::vector<Matrix> h;                   // steps+1 states, h[0] = h0
  std::vector<Matrix> u;                   // per step: projected nodes
  std::vector<std::vector<double>> p, q;   // per step: scorer halves
  std::vector<Matrix> w;                   // per step: edge weights
  std::vector<Matrix> m;                   // per step: messages
  std::vector<std::vector<GruCache>> gru;  // per step x node
  std::vector<double> s, alpha;            // readout scores
};

// Optional inspection of internals (testing surface).
struct FignnTrace {
  std::vector<std::vector<Matrix>> edge_weights;  // [example][step]
};

inline double fignn_logit(const FignnViews& v, const EncodedExample& ex,
                          FignnCache& c, FignnTrace* trace = nullptr) {
  const std::size_t n = kNumFields;
  const std::size_t k = v.k;

  c.x = Matrix(n, k);
  for (std::size_t f = 0; f < n; ++f) {
    const double* row = v.embed.data() + static_cast<std::size_t>(ex.field_indices[f]) * k;
    const double val = ex.field_values[f];
    for (std::size_t d = 0; d < k; ++d) c.x(f, d) = val * row[d];
  }

  c.h.assign(v.steps + 1, Matrix());
  mha_forward(c.x, v.attn, c.h[0], &c.attn);
  const Matrix& h0 = c.h[0];

  c.u.assign(v.steps, Matrix());
  c.p.assign(v.steps, {});
  c.q.assign(v.steps, {});
  c.w.assign(v.steps, Matrix());
  c.m.assign(v.steps, Matrix());
  c.gru.assign(v.steps, std::vector<GruCache>(n));
  if (trace != nullptr) trace->edge_weights.emplace_back();

  for (std::size_t t = 0; t < v.steps; ++t) {
    const Matrix& h = c.h[t];

    Matrix& u = c.u[t];
    u = Matrix(n, k);
    for (std::size_t j = 0; j < n; ++j) {
      matvec_add(v.edge_wout.subspan(j * k * k, k * k), k, k, h.row(j),
                 u.row(j));
    }

    auto& p = c.p[t];
    auto& q = c.q[t];
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = dot(v.edge_attn.subspan(0, k), h.row(i));
      q[i] = dot(v.edge_attn.subspan(k, k), h.row(i));
    }

    Matrix& w = c.w[t];
    w = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        w(i, j) = leaky_relu(p[i] + q[j], kEdgeLeakySlope);
        mx = std::max(mx, w(i, j));
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        w(i, j) = std::exp(w(i, j) - mx);
        denom += w(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) w(i, j) /= denom;
      }
    }
    if (trace != nullptr) trace->edge_weights.back().push_back(w);

    Matrix& m = c.m[t];
    m = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        axpy(w(i, j), u.row(j), m.row(i));
      }
    }

    Matrix& next = c.h[t + 1];
    next = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      gru_forward(h.row(i), m.row(i), v.gru, next.row(i), &c.gru[t][i]);
      axpy(1.0, h0.row(i), next.row(i));
    }
  }

  const Matrix& hf = c.h[v.steps];
  c.s.assign(n, 0.0);
  c.alpha.assign(n, 0.0);
  double logit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c.s[i] = dot(v.score_w, hf.row(i)) + v.score_b[0];
    c.alpha[i] = dot(v.attn_w, hf.row(i)) + v.attn_b[0];
    logit += c.alpha[i] * c.s[i];
  }
  return logit;
}

inline void fignn_backward(const FignnViews& v, const FignnCache& c,
                           const EncodedExample& ex, double dlogit,
                           const FignnGrads& g) {
  const std::size_t n = kNumFields;
  const std::size_t k = v.k;

  const Matrix& hf = c.h[v.steps];
  Matrix dh(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double ds = dlogit * c.alpha[i];
    const double dalpha = dlogit * c.s[i];
    axpy(ds, hf.row(i), g.score_w);
    axpy(dalpha, hf.row(i), g.attn_w);
    g.score_b[0] += ds;
    g.attn_b[0] += dalpha;
    for (std::size_t d = 0; d < k; ++d) {
      dh(i, d) = ds * v.score_w[d] + dalpha * v.attn_w[d];
    }
  }

  Matrix dh0(n, k);
  std::vector<double> dwrow(n), dp(n), dq(n);
  for (std::size_t t = v.steps; t-- > 0;) {
    // dh holds dL/dh[t+1]; the residual feeds h0 directly.
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, dh.row(i), dh0.row(i));

    Matrix dh_in(n, k), dm(n, k), du(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      gru_backward(c.gru[t][i], v.gru, dh.row(i), dh_in.row(i), dm.row(i),
                   g.gru);
    }

    const Matrix& w = c.w[t];
    const Matrix& u = c.u[t];
    const Matrix& h = c.h[t];
    std::fill(dp.begin(), dp.end(), 0.0);
    std::fill(dq.begin(), dq.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        dwrow[j] = dot(dm.row(i), u.row(j));
        axpy(w(i, j), dm.row(i), du.row(j));
        inner += w(i, j) * dwrow[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double ds_ij = w(i, j) * (dwrow[j] - inner);
        const double dpre =
            ds_ij * leaky_relu_grad(c.p[t][i] + c.q[t][j], kEdgeLeakySlope);
        dp[i] += dpre;
        dq[j] += dpre;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      axpy(dp[i], h.row(i), g.edge_attn.subspan(0, k));
      axpy(dq[i], h.row(i), g.edge_attn.subspan(k, k));
      for (std::size_t d = 0; d < k; ++d) {
        dh_in(i, d) += dp[i] * v.edge_attn[d] + dq[i] * v.edge_attn[k + d];
      }
      outer_add(g.edge_wout.subspan(i * k * k, k * k), du.row(i), h.row(i));
      matvec_t_add(v.edge_wout.subspan(i * k * k, k * k), k, k, du.row(i),
                   dh_in.row(i));
    }
    dh = std::move(dh_in);
  }

  for (std::size_t i = 0; i < n; ++i) axpy(1.0, dh.row(i), dh0.row(i));

  Matrix dx(n, k);
  mha_backward(c.attn, v.attn, dh0, dx, g.attn);

  for (std::size_t f = 0; f < n; ++f) {
    axpy(ex.field_values[f], dx.row(f),
         g.embed.subspan(static_cast<std::size_t>(ex.field_indices[f]) * k, k));
  }
}

}  // namespace ctr
