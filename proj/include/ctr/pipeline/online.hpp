#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ctr/data/dataset.hpp"
#include "ctr/error.hpp"
#include "ctr/metrics/metrics.hpp"
#include "ctr/model/model.hpp"
#include "ctr/rng.hpp"

namespace ctr {

// Knobs of the offline-then-online protocol. learning_batch_size is M, the
// number of streamed examples accumulated between retrains.
struct OnlineConfig {
  std::size_t offline_batch_size = 100;
  std::size_t offline_epochs = 3;
  std::size_t learning_batch_size = 400;
  std::size_t online_passes_per_retrain = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double eval_threshold = 0.3;
  double learning_rate = 1e-3;

  void validate() const {
    if (offline_batch_size == 0) {
      throw ConfigError("offline_batch_size must be >= 1");
    }
    if (learning_batch_size == 0) {
      throw ConfigError("learning_batch_size (M) must be >= 1");
    }
    if (online_passes_per_retrain == 0) {
      throw ConfigError("online_passes_per_retrain must be >= 1");
    }
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (eval_threshold < 0.0 || eval_threshold > 1.0) {
      throw ConfigError("eval_threshold must lie in [0, 1]");
    }
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_train_loss = 0.0;
  std::optional<double> val_auc;
  double val_logloss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t total_iterations = 0;
  bool low_iteration_warning = false;
};

inline constexpr std::size_t kLowIterationThreshold = 100;

namespace detail {

// Shuffled minibatch pass over a set of examples; returns the summed
// pre-update loss and the iteration count.
inline std::pair<double, std::size_t> minibatch_pass(
    Model& model, std::span<const EncodedExample> examples,
    std::size_t batch_size, Rng rng) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  double loss_sum = 0.0;
  std::size_t iterations = 0;
  std::vector<EncodedExample> batch;
  batch.reserve(batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
    loss_sum += model.train_step(batch);
    ++iterations;
  }
  return {loss_sum, iterations};
}

inline void prequential_metrics(std::span<const std::uint8_t> labels,
                                std::span<const double> probs,
                                std::optional<double>& out_auc,
                                double& out_logloss) {
  out_logloss = logloss(labels, probs);
  std::size_t pos = 0;
  for (std::uint8_t y : labels) pos += y;
  if (pos > 0 && pos < labels.size()) out_auc = auc(labels, probs);
}

}  // namespace detail

// Offline phase: iterates the 8 train partitions in order for
// offline_epochs passes, minibatching each partition at offline_batch_size
// (example order reshuffled per epoch and partition under run_seed), and
// evaluates the validation partition after every epoch. Warns when the
// planned iteration count is positive but below 100, the regime where the
// model stays essentially untrained.
inline TrainHistory train_offline(Model& model, const DatasetSplit& split,
                                  const OnlineConfig& config,
                                  std::uint64_t run_seed,
                                  std::ostream* log = nullptr) {
  config.validate();
  if (split.train_partitions.size() != kNumTrainPartitions) {
    throw DataError("expected " + std::to_string(kNumTrainPartitions) +
                    " train partitions");
  }

  std::size_t per_epoch = 0;
  for (const auto& part : split.train_partitions) {
    per_epoch += (part.size() + config.offline_batch_size - 1) /
                 config.offline_batch_size;
  }

  TrainHistory history;
  history.total_iterations = per_epoch * config.offline_epochs;
  if (history.total_iterations > 0 &&
      history.total_iterations < kLowIterationThreshold) {
    history.low_iteration_warning = true;
    if (log != nullptr) {
      *log << "warning: only " << history.total_iterations
           << " training iterations planned (batch size "
           << config.offline_batch_size
           << " is large for these partitions); the model may stay "
              "essentially untrained\n";
    }
  }

  const Rng base(run_seed);
  std::vector<std::uint8_t> val_labels(split.val_partition.size());
  for (std::size_t i = 0; i < val_labels.size(); ++i) {
    val_labels[i] = split.val_partition[i].label;
  }

  for (std::size_t epoch = 0; epoch < config.offline_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t iterations = 0;
    for (std::size_t p = 0; p < split.train_partitions.size(); ++p) {
      const auto [part_loss, part_iters] = detail::minibatch_pass(
          model, split.train_partitions[p], config.offline_batch_size,
          base.derive(epoch * 257 + p + 1));
      loss_sum += part_loss;
      iterations += part_iters;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_train_loss =
        iterations > 0 ? loss_sum / static_cast<double>(iterations) : 0.0;
    if (!split.val_partition.empty()) {
      const auto probs = model.predict(split.val_partition);
      std::optional<double> val_auc;
      detail::prequential_metrics(val_labels, probs, val_auc,
                                  stats.val_logloss);
      stats.val_auc = val_auc;
    }
    history.epochs.push_back(stats);
    if (log != nullptr) {
      *log << "epoch " << epoch << ": train_loss " << stats.mean_train_loss
           << ", val_logloss " << stats.val_logloss;
      if (stats.val_auc) *log << ", val_auc " << *stats.val_auc;
      *log << "\n";
    }
  }
  return history;
}

struct PredictionRecord {
  std::size_t index = 0;  // position in the stream
  std::uint8_t label = 0;
  double prob = 0.0;
  std::int64_t generation = 0;  // generation that scored it
};

struct GenerationRecord {
  std::int64_t generation = 0;
  std::size_t trained_through = 0;  // stream prefix folded into the model
  std::size_t scored_from = 0;      // stream range this generation scored
  std::size_t scored_to = 0;
  std::optional<double> cum_auc;  // over all predictions so far
  std::optional<double> cum_logloss;
  double wall_ms = 0.0;  // kept in memory, not exported
};

struct OnlineResult {
  std::vector<PredictionRecord> predictions;
  std::vector<GenerationRecord> generations;
  std::optional<double> auc;  // prequential, over the whole stream
  double logloss = 0.0;
  std::size_t retrain_count = 0;
  std::optional<double> rescored_auc;  // final-model re-scoring, on request
  std::optional<double> rescored_logloss;
};

// Prequential serving loop: every arriving example is scored by the
// generation in force before its label is used for anything; after each
// M-th example the model retrains on the accumulated batch (minibatched at
// offline_batch_size for online_passes_per_retrain passes, reusing the
// existing optimizer moments) and the generation advances. A final partial
// batch never triggers a retrain; a retrain landing exactly on the stream
// end still runs but scores nothing.
inline OnlineResult run_online(Model& model,
                               std::span<const EncodedExample> stream,
                               const OnlineConfig& config,
                               std::uint64_t run_seed,
                               bool rescore_final = false) {
  config.validate();
  if (stream.empty()) throw DataError("online stream is empty");

  const Rng base(run_seed);
  const std::size_t m = config.learning_batch_size;

  OnlineResult result;
  result.predictions.reserve(stream.size());
  std::vector<std::uint8_t> seen_labels;
  std::vector<double> seen_probs;
  seen_labels.reserve(stream.size());
  seen_probs.reserve(stream.size());

  std::vector<EncodedExample> accumulator;
  accumulator.reserve(m);
  std::size_t scored_from = 0;
  auto gen_clock = std::chrono::steady_clock::now();

  const auto close_generation = [&](std::size_t next_index) {
    GenerationRecord rec;
    rec.generation = model.generation();
    rec.trained_through = next_index - accumulator.size();
    rec.scored_from = scored_from;
    rec.scored_to = next_index;
    if (!seen_labels.empty()) {
      double ll = 0.0;
      detail::prequential_metrics(seen_labels, seen_probs, rec.cum_auc, ll);
      rec.cum_logloss = ll;
    }
    const auto now = std::chrono::steady_clock::now();
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(now - gen_clock).count();
    gen_clock = now;
    result.generations.push_back(rec);
    scored_from = next_index;
  };

  std::vector<EncodedExample> one(1);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    one[0] = stream[i];
    const double prob = model.predict(one)[0];
    result.predictions.push_back(
        PredictionRecord{i, stream[i].label, prob, model.generation()});
    seen_labels.push_back(stream[i].label);
    seen_probs.push_back(prob);
    accumulator.push_back(stream[i]);

    if (accumulator.size() == m) {
      close_generation(i + 1);
      const auto gen_id = static_cast<std::uint64_t>(model.generation());
      for (std::size_t pass = 0; pass < config.online_passes_per_retrain;
           ++pass) {
        detail::minibatch_pass(model, accumulator, config.offline_batch_size,
                               base.derive(0x9000 + gen_id * 131 + pass));
      }
      model.advance_generation();
      ++result.retrain_count;
      accumulator.clear();
    }
  }
  close_generation(stream.size());

  detail::prequential_metrics(seen_labels, seen_probs, result.auc,
                              result.logloss);
  if (rescore_final) {
    const auto probs = model.predict(stream);
    std::optional<double> rescored_auc;
    double rescored_ll = 0.0;
    detail::prequential_metrics(seen_labels, probs, rescored_auc, rescored_ll);
    result.rescored_auc = rescored_auc;
    result.rescored_logloss = rescored_ll;
  }
  return result;
}

}  // namespace ctr
