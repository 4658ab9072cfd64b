#include <gtest/gtest.h>
#include <filesystem>

#include <algorithm>
#include <sstream>
#include <vector>

#include "ctr/metrics/serialize.hpp"
#include "ctr/pipeline/export.hpp"
#include "ctr/pipeline/online.hpp"
#include "ctr/pipeline/sweep.hpp"
#include "ctr/rng.hpp"

using namespace ctr;

namespace {

std::vector<std::uint32_t> field_sizes_of(std::uint32_t per_field) {
  return std::vector<std::uint32_t>(kNumFields, per_field);
}

// Examples over 3-token fields whose label leans on field 0, so training
// has signal to pick up.
std::vector<EncodedExample> synth_examples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    EncodedExample ex;
    std::uint32_t offset = 0;
    for (int f = 0; f < kNumFields; ++f) {
      ex.field_indices[static_cast<std::size_t>(f)] =
          offset + static_cast<std::uint32_t>(rng.below(3));
      offset += 3;
    }
    const bool hot = ex.field_indices[0] == 1;
    ex.label = static_cast<std::uint8_t>(
        rng.uniform() < (hot ? 0.8 : 0.25) ? 1 : 0);
    out.push_back(ex);
  }
  return out;
}

DatasetSplit synth_split(std::size_t n, std::uint64_t seed) {
  return split_and_partition(synth_examples(n, seed), seed);
}

ModelConfig lr_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.kind = ModelKind::kLr;
  c.embed_dim = 4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(TrainOffline, IterationCountAndWarning) {
  const DatasetSplit split = synth_split(10000, 1);
  OnlineConfig config;
  config.offline_batch_size = 100;
  config.offline_epochs = 1;

  Model model = Model::init(lr_config(), field_sizes_of(3));
  std::ostringstream log;
  const TrainHistory history =
      train_offline(model, split, config, 1, &log);
  EXPECT_EQ(history.total_iterations, 80u);  // 8,000 / 100
  EXPECT_TRUE(history.low_iteration_warning);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  ASSERT_EQ(history.epochs.size(), 1u);
  EXPECT_TRUE(history.epochs[0].val_auc.has_value());
}

TEST(TrainOffline, HugeBatchMeansOneIterationPerPartition) {
  const DatasetSplit split = synth_split(10000, 2);
  OnlineConfig config;
  config.offline_batch_size = 1024;
  config.offline_epochs = 1;

  Model model = Model::init(lr_config(), field_sizes_of(3));
  std::ostringstream log;
  const TrainHistory history = train_offline(model, split, config, 2, &log);
  EXPECT_EQ(history.total_iterations, 8u);
  EXPECT_TRUE(history.low_iteration_warning);
}

TEST(TrainOffline, NoWarningWithEnoughIterations) {
  const DatasetSplit split = synth_split(10000, 3);
  OnlineConfig config;
  config.offline_batch_size = 100;
  config.offline_epochs = 2;  // 160 iterations

  Model model = Model::init(lr_config(), field_sizes_of(3));
  const TrainHistory history = train_offline(model, split, config, 3);
  EXPECT_EQ(history.total_iterations, 160u);
  EXPECT_FALSE(history.low_iteration_warning);
}

TEST(TrainOffline, ZeroEpochsLeavesModelUntouched) {
  const DatasetSplit split = synth_split(200, 4);
  OnlineConfig config;
  config.offline_epochs = 0;

  Model model = Model::init(lr_config(), field_sizes_of(3));
  const std::vector<double> before(model.params().flat().begin(),
                                   model.params().flat().end());
  const TrainHistory history = train_offline(model, split, config, 4);
  EXPECT_TRUE(history.epochs.empty());
  EXPECT_EQ(history.total_iterations, 0u);
  EXPECT_FALSE(history.low_iteration_warning);
  const auto after = model.params().flat();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_EQ(after[i], before[i]);
  }
}

TEST(RunOnline, DegenerateLargeMEqualsOfflineEvaluation) {
  const auto stream = synth_examples(120, 5);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 500;  // > stream length

  Model copy = model;
  const OnlineResult result = run_online(copy, stream, config, 5);
  EXPECT_EQ(result.retrain_count, 0u);

  const auto offline_probs = model.predict(stream);
  ASSERT_EQ(result.predictions.size(), stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    EXPECT_EQ(result.predictions[i].prob, offline_probs[i]);
    EXPECT_EQ(result.predictions[i].generation, 0);
  }
}

TEST(RunOnline, ExactMultipleBoundary) {
  const auto stream = synth_examples(1000, 6);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 500;

  const OnlineResult result = run_online(model, stream, config, 6);
  // floor(1000 / 500) = 2 retrains, but only one influences predictions:
  // the boundary retrain at the stream end scores nothing.
  EXPECT_EQ(result.retrain_count, 2u);
  EXPECT_EQ(model.generation(), 2);
  for (const auto& p : result.predictions) {
    EXPECT_EQ(p.generation, p.index < 500 ? 0 : 1);
  }
  const auto& last = result.generations.back();
  EXPECT_EQ(last.scored_from, last.scored_to);  // empty scoring window
}

TEST(RunOnline, GenerationWindows) {
  const auto stream = synth_examples(1000, 7);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 100;

  const OnlineResult result = run_online(model, stream, config, 7);
  EXPECT_EQ(result.retrain_count, 10u);
  for (const auto& p : result.predictions) {
    EXPECT_EQ(p.generation, static_cast<std::int64_t>(p.index / 100));
  }
  // generation indices consecutive from 0
  for (std::size_t g = 0; g < result.generations.size(); ++g) {
    EXPECT_EQ(result.generations[g].generation,
              static_cast<std::int64_t>(g));
  }
}

TEST(RunOnline, PartialTailDoesNotRetrain) {
  const auto stream = synth_examples(250, 8);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 100;

  const OnlineResult result = run_online(model, stream, config, 8);
  EXPECT_EQ(result.retrain_count, 2u);  // floor(250 / 100)
  EXPECT_EQ(model.generation(), 2);
  EXPECT_EQ(result.predictions.back().generation, 2);
}

TEST(RunOnline, RetrainCountProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t len = 20 + rng.below(200);
    const std::size_t m = 1 + rng.below(60);
    const auto stream = synth_examples(len, 100 + trial);
    Model model = Model::init(lr_config(), field_sizes_of(3));
    OnlineConfig config;
    config.learning_batch_size = m;
    config.offline_batch_size = 16;
    const OnlineResult result = run_online(model, stream, config, trial);
    EXPECT_EQ(result.retrain_count, len / m);
  }
}

TEST(RunOnline, PrequentialIntegrity) {
  const auto stream = synth_examples(700, 10);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 150;

  const OnlineResult result = run_online(model, stream, config, 10);
  for (const auto& p : result.predictions) {
    const auto& gen =
        result.generations[static_cast<std::size_t>(p.generation)];
    EXPECT_EQ(gen.generation, p.generation);
    // no example at or after this index trained the scoring generation
    EXPECT_LE(gen.trained_through, p.index);
  }
}

TEST(RunOnline, DeterministicUnderFixedSeed) {
  const auto stream = synth_examples(400, 11);
  OnlineConfig config;
  config.learning_batch_size = 120;

  Model a = Model::init(lr_config(), field_sizes_of(3));
  Model b = Model::init(lr_config(), field_sizes_of(3));
  const OnlineResult ra = run_online(a, stream, config, 11);
  const OnlineResult rb = run_online(b, stream, config, 11);
  ASSERT_EQ(ra.predictions.size(), rb.predictions.size());
  for (std::size_t i = 0; i < ra.predictions.size(); ++i) {
    EXPECT_EQ(ra.predictions[i].prob, rb.predictions[i].prob);
    EXPECT_EQ(ra.predictions[i].generation, rb.predictions[i].generation);
  }
  EXPECT_EQ(generation_log_to_csv(ra.generations),
            generation_log_to_csv(rb.generations));
}

TEST(RunOnline, RescoreFinalProducesSecondMetricSet) {
  const auto stream = synth_examples(300, 12);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 100;
  const OnlineResult result = run_online(model, stream, config, 12, true);
  EXPECT_TRUE(result.rescored_logloss.has_value());
  EXPECT_TRUE(result.rescored_auc.has_value());
}

TEST(SweepM, SingleMEqualsOfflineBaseline) {
  const DatasetSplit split = synth_split(600, 13);
  OnlineConfig config;
  config.offline_epochs = 1;
  config.offline_batch_size = 30;
  config.seeds = {5};

  const std::size_t len = split.test_partition.size();
  const std::vector<std::size_t> ms{len};  // single boundary retrain at end
  const SweepResult sweep = sweep_M(split, lr_config(5), field_sizes_of(3),
                                    ms, config, 1);
  ASSERT_EQ(sweep.cells.size(), 1u);

  // reference: offline-only model evaluated directly on the test stream
  Model ref = Model::init(lr_config(5), field_sizes_of(3),
                          config.learning_rate);
  train_offline(ref, split, config, 5);
  const auto probs = ref.predict(split.test_partition);
  std::vector<std::uint8_t> labels(split.test_partition.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = split.test_partition[i].label;
  }
  EXPECT_DOUBLE_EQ(sweep.cells[0].auc, auc(labels, probs));
  EXPECT_DOUBLE_EQ(sweep.cells[0].logloss, logloss(labels, probs));
  EXPECT_DOUBLE_EQ(sweep.means[0].auc, sweep.cells[0].auc);
}

TEST(SweepM, MeansPermutationInvariantInSeedOrder) {
  const DatasetSplit split = synth_split(400, 14);
  const std::vector<std::size_t> ms{20, 40};

  OnlineConfig config;
  config.offline_epochs = 1;
  config.offline_batch_size = 20;
  config.seeds = {1, 2, 3};
  const SweepResult a =
      sweep_M(split, lr_config(), field_sizes_of(3), ms, config, 2);

  config.seeds = {3, 1, 2};
  const SweepResult b =
      sweep_M(split, lr_config(), field_sizes_of(3), ms, config, 2);

  ASSERT_EQ(a.means.size(), b.means.size());
  for (std::size_t i = 0; i < a.means.size(); ++i) {
    EXPECT_NEAR(a.means[i].auc, b.means[i].auc, 1e-12);
    EXPECT_NEAR(a.means[i].logloss, b.means[i].logloss, 1e-12);
  }
}

TEST(SweepM, CellCountAndCsvLayout) {
  const DatasetSplit split = synth_split(300, 15);
  const std::vector<std::size_t> ms{10, 20, 30};
  OnlineConfig config;
  config.offline_epochs = 1;
  config.offline_batch_size = 30;
  config.seeds = {1, 2};

  const SweepResult sweep =
      sweep_M(split, lr_config(), field_sizes_of(3), ms, config, 2);
  EXPECT_EQ(sweep.cells.size(), 6u);
  EXPECT_EQ(sweep.means.size(), 3u);

  const std::string csv = sweep_to_csv(sweep);
  const std::size_t rows = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(rows, 1u + 6u + 3u);  // header + cells + means
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "M,seed,auc,logloss");
  EXPECT_NE(csv.find(",mean,"), std::string::npos);
}

TEST(Export, PredictionsCsvRoundTrip) {
  const auto stream = synth_examples(50, 16);
  Model model = Model::init(lr_config(), field_sizes_of(3));
  OnlineConfig config;
  config.learning_batch_size = 20;
  config.offline_batch_size = 10;
  const OnlineResult result = run_online(model, stream, config, 16);

  const std::string csv = predictions_to_csv(result.predictions);
  const auto path =
      (std::filesystem::temp_directory_path() / "ctr_preds_roundtrip.csv")
          .string();
  write_file(path, csv);
  const LabeledProbs read = read_predictions_csv(path);
  ASSERT_EQ(read.labels.size(), result.predictions.size());
  for (std::size_t i = 0; i < read.labels.size(); ++i) {
    EXPECT_EQ(read.labels[i], result.predictions[i].label);
    EXPECT_EQ(read.probs[i], result.predictions[i].prob);  // bit-exact
  }
  std::filesystem::remove(path);
}
