#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "ctr/data/dataset.hpp"
#include "ctr/error.hpp"
#include "ctr/model/model.hpp"
#include "ctr/pipeline/online.hpp"
#include "ctr/pipeline/parallel.hpp"

namespace ctr {

struct SweepCell {
  std::size_t m = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double logloss = 0.0;
};

struct SweepMeans {
  std::size_t m = 0;
  double auc = 0.0;
  double logloss = 0.0;
};

struct SweepResult {
  std::vector<std::size_t> ms;
  std::vector<SweepCell> cells;   // M-major, seeds in config order
  std::vector<SweepMeans> means;  // arithmetic average over seeds per M
};

// The learning-batch-size sweep: for every (M, seed) pair, a freshly
// initialized model is trained offline and then run through the prequential
// online loop; per-M means aggregate over seeds. With a fixed seed the
// offline phase does not depend on M, so it executes once per seed and each
// cell starts from a copy of that trained state. Independent cells may run
// concurrently.
inline SweepResult sweep_M(const DatasetSplit& split,
                           const ModelConfig& model_config,
                           std::span<const std::uint32_t> field_sizes,
                           std::span<const std::size_t> ms,
                           const OnlineConfig& config,
                           unsigned threads = std::thread::hardware_concurrency(),
                           std::ostream* log = nullptr,
                           bool rescore_final = false,
                           std::vector<OnlineResult>* runs = nullptr) {
  config.validate();
  if (ms.empty()) throw ConfigError("sweep requires at least one M value");
  auto [pos, neg] = class_counts(split.test_partition);
  if (pos == 0 || neg == 0) {
    throw DataError("sweep requires both classes in the test stream");
  }

  std::vector<Model> offline_models;
  offline_models.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) {
    ModelConfig seeded = model_config;
    seeded.seed = seed;
    offline_models.push_back(
        Model::init(seeded, field_sizes, config.learning_rate));
  }
  parallel_for(config.seeds.size(), threads, [&](std::size_t s) {
    train_offline(offline_models[s], split, config, config.seeds[s]);
  });
  if (log != nullptr) {
    *log << "offline training done for " << config.seeds.size() << " seeds\n";
  }

  SweepResult result;
  result.ms.assign(ms.begin(), ms.end());
  result.cells.resize(ms.size() * config.seeds.size());
  if (runs != nullptr) runs->resize(result.cells.size());
  parallel_for(result.cells.size(), threads, [&](std::size_t i) {
    const std::size_t mi = i / config.seeds.size();
    const std::size_t si = i % config.seeds.size();
    Model model = offline_models[si];
    OnlineConfig cell_config = config;
    cell_config.learning_batch_size = ms[mi];
    OnlineResult run = run_online(model, split.test_partition, cell_config,
                                  config.seeds[si], rescore_final);
    SweepCell cell;
    cell.m = ms[mi];
    cell.seed = config.seeds[si];
    if (rescore_final) {
      cell.auc = run.rescored_auc.value_or(0.5);
      cell.logloss = run.rescored_logloss.value_or(run.logloss);
    } else {
      cell.auc = run.auc.value_or(0.5);
      cell.logloss = run.logloss;
    }
    result.cells[i] = cell;
    if (log != nullptr) {
      *log << "M=" << cell.m << " seed=" << cell.seed << " auc=" << cell.auc
           << " logloss=" << cell.logloss << "\n";
    }
    if (runs != nullptr) (*runs)[i] = std::move(run);
  });

  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    SweepMeans mean;
    mean.m = ms[mi];
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const SweepCell& cell = result.cells[mi * config.seeds.size() + si];
      mean.auc += cell.auc;
      mean.logloss += cell.logloss;
    }
    mean.auc /= static_cast<double>(config.seeds.size());
    mean.logloss /= static_cast<double>(config.seeds.size());
    result.means.push_back(mean);
  }
  return result;
}

}  // namespace ctr
