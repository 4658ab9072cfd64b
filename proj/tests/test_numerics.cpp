#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ctr/num/adam.hpp"
#include "ctr/num/attention.hpp"
#include "ctr/num/dense.hpp"
#include "ctr/num/functions.hpp"
#include "ctr/num/grad_check.hpp"
#include "ctr/num/gru.hpp"
#include "ctr/rng.hpp"

using namespace ctr;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST(Sigmoid, SpecValues) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  // 1 / (1 + e^{-ln 3}) = 3/4
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-12);
}

TEST(Sigmoid, StableAtExtremes) {
  const double p = sigmoid(-500.0);
  EXPECT_GT(p, 0.0);
  EXPECT_LE(p, 1e-200);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_TRUE(std::isfinite(sigmoid(500.0)));
}

TEST(Sigmoid, SymmetryProperty) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-40.0, 40.0);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
  }
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_vec(rng, 1 + rng.below(10), -5.0, 5.0);
    auto shifted = v;
    const double shift = rng.uniform(-100.0, 100.0);
    for (auto& x : shifted) x += shift;
    softmax_inplace(v);
    softmax_inplace(shifted);
    double sum = 0.0;
    for (double x : v) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(v[i], shifted[i], 1e-12);
    }
  }
}

namespace {

// All-in-one ownership of GRU weights for tests.
struct OwnedGru {
  std::size_t k;
  std::vector<double> wz, uz, wr, ur, wh, uh, bz, br, bh;

  explicit OwnedGru(std::size_t k_, double fill = 0.0)
      : k(k_),
        wz(k_ * k_, fill), uz(k_ * k_, fill), wr(k_ * k_, fill),
        ur(k_ * k_, fill), wh(k_ * k_, fill), uh(k_ * k_, fill),
        bz(k_, fill), br(k_, fill), bh(k_, fill) {}

  void randomize(Rng& rng, double scale) {
    for (auto* v : {&wz, &uz, &wr, &ur, &wh, &uh, &bz, &br, &bh}) {
      for (auto& x : *v) x = rng.uniform(-scale, scale);
    }
  }

  GruWeights view() const {
    return GruWeights{wz, uz, wr, ur, wh, uh, bz, br, bh, k};
  }
};

// Independent scalar-loop oracle for the GRU recurrence.
std::vector<double> gru_oracle(const std::vector<double>& h,
                               const std::vector<double>& a,
                               const OwnedGru& w) {
  const std::size_t k = w.k;
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    double az = w.bz[i], ar = w.br[i];
    for (std::size_t j = 0; j < k; ++j) {
      az += w.wz[i * k + j] * a[j] + w.uz[i * k + j] * h[j];
      ar += w.wr[i * k + j] * a[j] + w.ur[i * k + j] * h[j];
    }
    const double z = 1.0 / (1.0 + std::exp(-az));
    const double r_i = 1.0 / (1.0 + std::exp(-ar));
    (void)r_i;
    double ah = w.bh[i];
    for (std::size_t j = 0; j < k; ++j) {
      double arj = w.br[j];
      for (std::size_t l = 0; l < k; ++l) {
        arj += w.wr[j * k + l] * a[l] + w.ur[j * k + l] * h[l];
      }
      const double rj = 1.0 / (1.0 + std::exp(-arj));
      ah += w.wh[i * k + j] * a[j] + w.uh[i * k + j] * (rj * h[j]);
    }
    const double hc = std::tanh(ah);
    out[i] = (1.0 - z) * h[i] + z * hc;
  }
  return out;
}

}  // namespace

TEST(GruCell, ZeroWeightsHalveState) {
  const std::size_t k = 5;
  OwnedGru w(k);
  std::vector<double> h{0.4, -1.2, 0.0, 2.0, -0.3};
  std::vector<double> a{1.0, 1.0, 1.0, 1.0, 1.0};
  const auto out = gru_cell(h, a, w.view());
  for (std::size_t i = 0; i < k; ++i) {
    EXPECT_NEAR(out[i], 0.5 * h[i], 1e-15);
  }

  std::vector<double> zero(k, 0.0);
  const auto out2 = gru_cell(zero, a, w.view());
  for (double x : out2) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(GruCell, MatchesScalarOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    OwnedGru w(k);
    w.randomize(rng, 1.0);
    const auto h = random_vec(rng, k, -2.0, 2.0);
    const auto a = random_vec(rng, k, -2.0, 2.0);
    const auto got = gru_cell(h, a, w.view());
    const auto want = gru_oracle(h, a, w);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
    }
  }
}

TEST(GruCell, ConvexCombinationBound) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    OwnedGru w(k);
    w.randomize(rng, 3.0);
    const auto h = random_vec(rng, k, -4.0, 4.0);
    const auto a = random_vec(rng, k, -4.0, 4.0);
    const auto out = gru_cell(h, a, w.view());
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_LE(std::abs(out[i]), std::max(std::abs(h[i]), 1.0) + 1e-12);
    }
  }
}

TEST(GruCell, DimensionMismatchIsError) {
  OwnedGru w(4);
  std::vector<double> h(3, 0.0), a(4, 0.0), out(4, 0.0);
  EXPECT_THROW(gru_forward(h, a, w.view(), out), ConfigError);
}

namespace {

struct OwnedAttention {
  std::size_t k, heads;
  std::vector<double> wq, wk, wv, wo;

  OwnedAttention(std::size_t k_, std::size_t heads_)
      : k(k_), heads(heads_),
        wq(k_ * k_), wk(k_ * k_), wv(k_ * k_), wo(k_ * k_) {}

  void randomize(Rng& rng, double scale) {
    for (auto* v : {&wq, &wk, &wv, &wo}) {
      for (auto& x : *v) x = rng.uniform(-scale, scale);
    }
  }

  AttentionWeights view() const {
    return AttentionWeights{wq, wk, wv, wo, k, heads};
  }
};

// Brute-force per-pair softmax oracle, written against the same row
// convention (q_i = Wq x_i) but with naive independent loops.
Matrix mha_oracle(const Matrix& x, const OwnedAttention& w) {
  const std::size_t n = x.rows(), k = w.k, dh = k / w.heads;
  auto project = [&](const std::vector<double>& m, std::size_t i) {
    std::vector<double> out(k, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) out[r] += m[r * k + c] * x(i, c);
    }
    return out;
  };
  Matrix concat(n, k);
  for (std::size_t h = 0; h < w.heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        const auto qi = project(w.wq, i);
        const auto kj = project(w.wk, j);
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += qi[h * dh + c] * kj[h * dh + c];
        }
        scores[j] = s / std::sqrt(static_cast<double>(dh));
      }
      double mx = scores[0];
      for (double s : scores) mx = std::max(mx, s);
      double denom = 0.0;
      for (double s : scores) denom += std::exp(s - mx);
      for (std::size_t j = 0; j < n; ++j) {
        const double weight = std::exp(scores[j] - mx) / denom;
        const auto vj = project(w.wv, j);
        for (std::size_t c = 0; c < dh; ++c) {
          concat(i, h * dh + c) += weight * vj[h * dh + c];
        }
      }
    }
  }
  Matrix out(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        out(i, r) += w.wo[r * k + c] * concat(i, c);
      }
    }
  }
  return out;
}

}  // namespace

TEST(MultiHeadAttention, SingleNodeWeightIsOne) {
  Rng rng(7);
  OwnedAttention w(4, 2);
  w.randomize(rng, 1.0);
  Matrix x(1, 4);
  for (std::size_t c = 0; c < 4; ++c) x(0, c) = rng.uniform(-1.0, 1.0);

  AttentionCache cache;
  Matrix out;
  mha_forward(x, w.view(), out, &cache);
  for (const Matrix& a : cache.attn) {
    EXPECT_NEAR(a(0, 0), 1.0, 1e-15);
  }
  // output = Wo (Wv x)
  std::vector<double> v(4, 0.0), expect(4, 0.0);
  matvec_add(std::span<const double>(w.wv), 4, 4, x.row(0), v);
  matvec_add(std::span<const double>(w.wo), 4, 4, v, expect);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(0, c), expect[c], 1e-14);
}

TEST(MultiHeadAttention, IdenticalRowsGiveUniformWeights) {
  Rng rng(8);
  OwnedAttention w(6, 3);
  w.randomize(rng, 0.7);
  const std::size_t n = 5;
  Matrix x(n, 6);
  for (std::size_t c = 0; c < 6; ++c) {
    const double v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) x(i, c) = v;
  }
  AttentionCache cache;
  Matrix out;
  mha_forward(x, w.view(), out, &cache);
  for (const Matrix& a : cache.attn) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(a(i, j), 1.0 / static_cast<double>(n), 1e-12);
      }
    }
  }
}

TEST(MultiHeadAttention, MatchesBruteForceOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    OwnedAttention w(4, 2);
    w.randomize(rng, 1.0);
    Matrix x(3, 4);
    for (auto& v : x.flat()) v = rng.uniform(-1.5, 1.5);
    const Matrix got = multi_head_attention(x, w.view());
    const Matrix want = mha_oracle(x, w);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(got(i, c), want(i, c), 1e-12);
      }
    }
  }
}

TEST(MultiHeadAttention, HeadDivisibilityIsError) {
  OwnedAttention w(5, 2);
  Matrix x(3, 5);
  EXPECT_THROW(multi_head_attention(x, w.view()), ConfigError);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  auto state = AdamState::init(3, 0.1);
  std::vector<double> params{1.0, -2.0, 0.5};
  const auto before = params;
  std::vector<double> grads(3, 0.0);
  adam_update(params, grads, state);
  adam_update(params, grads, state);
  EXPECT_EQ(state.t, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(params[i], before[i], state.eps * state.lr);
  }
}

TEST(Adam, SingleStepHandRecurrence) {
  // param 0, grad 1, lr 0.1: mhat = vhat = 1, so step = -0.1 (up to eps)
  auto state = AdamState::init(1, 0.1);
  std::vector<double> params{0.0};
  std::vector<double> grads{1.0};
  adam_update(params, grads, state);
  EXPECT_NEAR(params[0], -0.1, 1e-6);
  EXPECT_EQ(state.t, 1);
}

TEST(Adam, ShapeMismatchIsError) {
  auto state = AdamState::init(2);
  std::vector<double> params(3, 0.0), grads(3, 0.0);
  EXPECT_THROW(adam_update(params, grads, state), ConfigError);
}

TEST(FiniteDiff, LinearLossIsExact) {
  Rng rng(10);
  const std::size_t n = 6;
  const auto coef = random_vec(rng, n, -2.0, 2.0);
  auto params = random_vec(rng, n, -1.0, 1.0);
  const auto loss = [&](std::span<const double> p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += coef[i] * p[i];
    return acc;
  };
  const double err = finite_diff_check(loss, coef, params, 1e-4);
  EXPECT_LT(err, 1e-10);
}

TEST(FiniteDiff, QuadraticLoss) {
  Rng rng(11);
  const std::size_t n = 5;
  auto params = random_vec(rng, n, -1.0, 1.0);
  const auto loss = [&](std::span<const double> p) {
    double acc = 0.0;
    for (double x : p) acc += x * x;
    return acc;
  };
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) grad[i] = 2.0 * params[i];
  const double err = finite_diff_check(loss, grad, params, 1e-4);
  EXPECT_LT(err, 1e-8);
}

TEST(FiniteDiff, NonFiniteLossIsError) {
  std::vector<double> params{1.0};
  std::vector<double> grad{0.0};
  const auto loss = [](std::span<const double>) {
    return std::numeric_limits<double>::infinity();
  };
  EXPECT_THROW(finite_diff_check(loss, grad, params, 1e-4), DivergenceError);
}
