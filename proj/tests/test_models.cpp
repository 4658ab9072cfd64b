#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "ctr/model/checkpoint.hpp"
#include "ctr/model/fm_math.hpp"
#include "ctr/model/model.hpp"
#include "ctr/num/grad_check.hpp"
#include "ctr/rng.hpp"

namespace fs = std::filesystem;
using namespace ctr;

namespace {

std::vector<std::uint32_t> uniform_field_sizes(std::uint32_t per_field) {
  return std::vector<std::uint32_t>(kNumFields, per_field);
}

EncodedExample random_example(Rng& rng,
                              std::span<const std::uint32_t> field_sizes,
                              int label) {
  EncodedExample ex;
  ex.label = static_cast<std::uint8_t>(label);
  std::uint32_t offset = 0;
  for (int f = 0; f < kNumFields; ++f) {
    const auto fs = static_cast<std::size_t>(f);
    ex.field_indices[fs] =
        offset + static_cast<std::uint32_t>(rng.below(field_sizes[fs]));
    offset += field_sizes[fs];
  }
  return ex;
}

std::vector<EncodedExample> random_batch(Rng& rng,
                                         std::span<const std::uint32_t> sizes,
                                         std::size_t n) {
  std::vector<EncodedExample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    batch.push_back(random_example(rng, sizes, static_cast<int>(i % 2)));
  }
  return batch;
}

ModelConfig small_config(ModelKind kind, double init_scale = 0.4,
                         std::uint64_t seed = 3) {
  ModelConfig c;
  c.kind = kind;
  c.embed_dim = 4;
  c.attention_heads = 2;
  c.gnn_steps = 2;
  c.mlp_hidden = {8, 6};
  c.init_scale = init_scale;
  c.seed = seed;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST(ModelInit, SameSeedBitIdentical) {
  const auto sizes = uniform_field_sizes(3);
  for (ModelKind kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kDeepFm,
                         ModelKind::kFiGnn}) {
    const Model a = Model::init(small_config(kind), sizes);
    const Model b = Model::init(small_config(kind), sizes);
    const auto fa = a.params().flat();
    const auto fb = b.params().flat();
    ASSERT_EQ(fa.size(), fb.size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
      ASSERT_EQ(fa[i], fb[i]);
    }
    const Model c = Model::init(small_config(kind, 0.4, /*seed=*/4), sizes);
    bool any_diff = false;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      if (fa[i] != c.params().flat()[i]) any_diff = true;
    }
    EXPECT_TRUE(any_diff);
  }
}

TEST(ModelInit, ZeroScalePredictsHalf) {
  const auto sizes = uniform_field_sizes(3);
  Rng rng(1);
  const auto batch = random_batch(rng, sizes, 6);
  for (ModelKind kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kDeepFm,
                         ModelKind::kFiGnn}) {
    const Model m = Model::init(small_config(kind, 0.0), sizes);
    for (double p : m.predict(batch)) {
      EXPECT_DOUBLE_EQ(p, 0.5);
    }
  }
}

TEST(ModelInit, InvalidConfigRejected) {
  ModelConfig c = small_config(ModelKind::kFiGnn);
  c.embed_dim = 5;  // not divisible by 2 heads
  EXPECT_THROW(Model::init(c, uniform_field_sizes(3)), ConfigError);
}

TEST(Predict, FmWithZeroFactorsEqualsLr) {
  const auto sizes = uniform_field_sizes(4);
  Rng rng(2);
  const auto batch = random_batch(rng, sizes, 8);
  const Model lr = Model::init(small_config(ModelKind::kLr), sizes);
  Model fm = Model::init(small_config(ModelKind::kFm), sizes);
  // same seed, same draw order: bias then weights match; zero the factors
  auto factors = fm.params().view(2);
  std::fill(factors.begin(), factors.end(), 0.0);
  const auto pl = lr.predict(batch);
  const auto pf = fm.predict(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_DOUBLE_EQ(pl[i], pf[i]);
  }
}

TEST(Predict, PureAndDeterministic) {
  const auto sizes = uniform_field_sizes(4);
  Rng rng(5);
  const auto batch = random_batch(rng, sizes, 5);
  for (ModelKind kind : {ModelKind::kFm, ModelKind::kFiGnn}) {
    const Model m = Model::init(small_config(kind), sizes);
    const auto a = m.predict(batch);
    const auto b = m.predict(batch);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    for (double p : a) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
    }
  }
}

TEST(Predict, IndexOutOfRangeIsError) {
  const auto sizes = uniform_field_sizes(3);
  const Model m = Model::init(small_config(ModelKind::kLr), sizes);
  EncodedExample ex;
  ex.field_indices[0] = 3;  // field 0 covers indices [0, 3)
  for (int f = 1; f < kNumFields; ++f) {
    ex.field_indices[static_cast<std::size_t>(f)] =
        static_cast<std::uint32_t>(3 * f);
  }
  std::vector<EncodedExample> batch{ex};
  EXPECT_THROW(m.predict(batch), CompatibilityError);
}

TEST(FmMath, IdentityMatchesBruteForce) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const std::size_t total = 20;
    std::vector<double> factors(total * k);
    for (auto& x : factors) x = rng.uniform(-1.0, 1.0);
    const std::size_t n = 2 + rng.below(9);
    std::vector<std::uint32_t> indices(n);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      indices[i] = static_cast<std::uint32_t>(rng.below(total));
      values[i] = rng.uniform(-2.0, 2.0);
    }
    const double fast = fm_pairwise_term(factors, k, indices, values);
    const double brute = fm_pairwise_brute_force(factors, k, indices, values);
    EXPECT_NEAR(fast, brute, 1e-10);
  }
}

TEST(Loss, SpecValues) {
  std::vector<std::uint8_t> labels{1, 0, 1};
  std::vector<double> half(3, 0.5);
  EXPECT_NEAR(loss(half, labels), std::log(2.0), 1e-12);

  std::vector<double> perfect{1.0, 0.0, 1.0};
  EXPECT_LE(loss(perfect, labels), 2e-7);

  std::vector<std::uint8_t> y{1, 0};
  std::vector<double> p{0.9, 0.2};
  EXPECT_NEAR(loss(p, y), 0.164252, 1e-6);
}

TEST(Loss, EmptyBatchIsError) {
  std::vector<std::uint8_t> labels;
  std::vector<double> probs;
  EXPECT_THROW(loss(probs, labels), DataError);
}

TEST(Loss, PermutationInvariant) {
  Rng rng(7);
  std::vector<std::uint8_t> labels;
  std::vector<double> probs;
  for (int i = 0; i < 30; ++i) {
    labels.push_back(static_cast<std::uint8_t>(rng.below(2)));
    probs.push_back(rng.uniform(0.01, 0.99));
  }
  const double base = loss(probs, labels);
  std::vector<std::size_t> perm(labels.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<std::uint8_t> labels2;
  std::vector<double> probs2;
  for (std::size_t i : perm) {
    labels2.push_back(labels[i]);
    probs2.push_back(probs[i]);
  }
  EXPECT_NEAR(loss(probs2, labels2), base, 1e-12);
}

TEST(GradCheck, AllModelsBelowTolerance) {
  const auto sizes = uniform_field_sizes(3);
  for (ModelKind kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kDeepFm,
                         ModelKind::kFiGnn}) {
    Model m = Model::init(small_config(kind, 0.4, 11), sizes);
    Rng rng(13);
    const auto batch = random_batch(rng, sizes, 4);
    const auto analytic = m.gradient(batch);
    const auto loss_fn = [&](std::span<const double>) {
      return m.batch_loss(batch);
    };
    const double err =
        finite_diff_check(loss_fn, analytic, m.params().flat(), 1e-4);
    EXPECT_LT(err, 1e-4) << "model " << to_string(kind);
  }
}

TEST(TrainStep, LossStrictlyDecreasesOnFixedBatch) {
  const auto sizes = uniform_field_sizes(3);
  for (ModelKind kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kDeepFm,
                         ModelKind::kFiGnn}) {
    Model m = Model::init(small_config(kind, 0.1, 21), sizes);
    Rng rng(22);
    const auto batch = random_batch(rng, sizes, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 50; ++step) {
      const double l = m.train_step(batch);
      EXPECT_LT(l, prev) << "model " << to_string(kind) << " step " << step;
      prev = l;
    }
  }
}

TEST(TrainStep, DivergenceIsDetected) {
  const auto sizes = uniform_field_sizes(3);
  Model m = Model::init(small_config(ModelKind::kFm), sizes);
  m.params().flat()[5] = std::numeric_limits<double>::quiet_NaN();
  Rng rng(23);
  const auto batch = random_batch(rng, sizes, 4);
  EXPECT_THROW(m.train_step(batch), DivergenceError);
}

TEST(Fignn, DegenerateZeroStepsStillValid) {
  const auto sizes = uniform_field_sizes(3);
  ModelConfig c = small_config(ModelKind::kFiGnn);
  c.gnn_steps = 0;
  const Model m = Model::init(c, sizes);
  Rng rng(31);
  const auto batch = random_batch(rng, sizes, 4);
  for (double p : m.predict(batch)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  // gradients stay correct in the degenerate pipeline
  Model m2 = Model::init(c, sizes);
  const auto analytic = m2.gradient(batch);
  const auto loss_fn = [&](std::span<const double>) {
    return m2.batch_loss(batch);
  };
  EXPECT_LT(finite_diff_check(loss_fn, analytic, m2.params().flat(), 1e-4),
            1e-4);
}

TEST(Fignn, IdenticalExamplesGetIdenticalProbabilities) {
  const auto sizes = uniform_field_sizes(3);
  const Model m = Model::init(small_config(ModelKind::kFiGnn), sizes);
  Rng rng(32);
  EncodedExample ex = random_example(rng, sizes, 1);
  EncodedExample twin = ex;
  twin.label = 0;  // label plays no role in the forward pass
  std::vector<EncodedExample> batch{ex, twin};
  const auto probs = m.predict(batch);
  EXPECT_EQ(probs[0], probs[1]);
}

TEST(Fignn, EdgeWeightRowsSumToOne) {
  const auto sizes = uniform_field_sizes(3);
  const Model m = Model::init(small_config(ModelKind::kFiGnn), sizes);
  Rng rng(33);
  const auto batch = random_batch(rng, sizes, 2);
  FignnTrace trace;
  m.fignn_forward(batch, &trace);
  ASSERT_EQ(trace.edge_weights.size(), 2u);
  for (const auto& per_step : trace.edge_weights) {
    ASSERT_EQ(per_step.size(), 2u);  // T = 2
    for (const Matrix& w : per_step) {
      for (std::size_t i = 0; i < w.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
          if (j != i) row_sum += w(i, j);
        }
        EXPECT_NEAR(row_sum, 1.0, 1e-12);
        EXPECT_EQ(w(i, i), 0.0);
      }
    }
  }
}

TEST(Fignn, ForwardMatchesPredict) {
  const auto sizes = uniform_field_sizes(3);
  const Model m = Model::init(small_config(ModelKind::kFiGnn), sizes);
  Rng rng(34);
  const auto batch = random_batch(rng, sizes, 4);
  const auto a = m.predict(batch);
  const auto b = m.fignn_forward(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(DeepFm, SharedEmbeddingFeedsBothComponents) {
  const auto sizes = uniform_field_sizes(3);
  Model m = Model::init(small_config(ModelKind::kDeepFm), sizes);
  Rng rng(35);
  const EncodedExample ex = random_example(rng, sizes, 1);

  const auto before = m.deepfm_components(ex);
  // perturb one embedding row this example actually uses
  const std::size_t k = m.config().embed_dim;
  auto factors = m.params().view(2);
  const std::size_t base = static_cast<std::size_t>(ex.field_indices[0]) * k;
  for (std::size_t d = 0; d < k; ++d) factors[base + d] += 0.25;
  const auto after = m.deepfm_components(ex);

  EXPECT_NE(before.fm_logit, after.fm_logit);
  EXPECT_NE(before.mlp_logit, after.mlp_logit);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto sizes = uniform_field_sizes(3);
  Model m = Model::init(small_config(ModelKind::kFiGnn), sizes);
  Rng rng(41);
  const auto batch = random_batch(rng, sizes, 8);
  for (int i = 0; i < 5; ++i) m.train_step(batch);
  m.advance_generation();

  const fs::path p1 = fs::temp_directory_path() / "ctr_test_ckpt1.ctrm";
  const fs::path p2 = fs::temp_directory_path() / "ctr_test_ckpt2.ctrm";
  save_checkpoint(m, p1.string());
  const Model loaded = load_checkpoint(p1.string());
  save_checkpoint(loaded, p2.string());
  EXPECT_EQ(read_file(p1), read_file(p2));

  EXPECT_EQ(loaded.generation(), m.generation());
  EXPECT_EQ(loaded.adam().t, m.adam().t);
  const auto pa = m.predict(batch);
  const auto pb = loaded.predict(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
  fs::remove(p1);
  fs::remove(p2);
}

TEST(Checkpoint, ContinuedTrainingMatchesUninterrupted) {
  const auto sizes = uniform_field_sizes(3);
  Rng rng(42);
  const auto batch = random_batch(rng, sizes, 8);

  Model full = Model::init(small_config(ModelKind::kFm), sizes);
  for (int i = 0; i < 10; ++i) full.train_step(batch);

  Model part = Model::init(small_config(ModelKind::kFm), sizes);
  for (int i = 0; i < 5; ++i) part.train_step(batch);
  const fs::path p = fs::temp_directory_path() / "ctr_test_ckpt3.ctrm";
  save_checkpoint(part, p.string());
  Model resumed = load_checkpoint(p.string());
  for (int i = 0; i < 5; ++i) resumed.train_step(batch);

  const auto fa = full.params().flat();
  const auto fb = resumed.params().flat();
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_EQ(fa[i], fb[i]);
  fs::remove(p);
}

TEST(Checkpoint, VocabularyMismatchDetected) {
  const Model m =
      Model::init(small_config(ModelKind::kLr), uniform_field_sizes(3));
  const auto other = uniform_field_sizes(4);
  EXPECT_THROW(check_compatible(m, other), CompatibilityError);
}
