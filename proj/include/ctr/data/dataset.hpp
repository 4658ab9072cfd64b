#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ctr/data/record.hpp"
#include "ctr/data/vocabulary.hpp"
#include "ctr/error.hpp"
#include "ctr/rng.hpp"

namespace ctr {

// One encoded impression: a binary label plus exactly one active global
// feature index per field (multi-field one-hot layout).
struct EncodedExample {
  std::uint8_t label = 0;
  std::array<std::uint32_t, kNumFields> field_indices{};
  std::array<double, kNumFields> field_values;  // 1.0 for one-hot input

  EncodedExample() { field_values.fill(1.0); }

  bool operator==(const EncodedExample&) const = default;
};

// Encodes a record against a fitted vocabulary. Never fails on feature
// content: unknown and missing tokens land on the field's OOV index.
// Throws only when a label is required but absent.
inline EncodedExample encode(const RawRecord& rec,
                             const FeatureVocabulary& vocab,
                             bool require_label = true) {
  if (require_label && !rec.label) {
    throw DataError("record has no label");
  }
  EncodedExample ex;
  ex.label = static_cast<std::uint8_t>(rec.label.value_or(0));
  for (int f = 0; f < kNumFields; ++f) {
    ex.field_indices[static_cast<std::size_t>(f)] =
        vocab.encode_token(f, field_token(rec, f));
  }
  return ex;
}

// 8 train partitions + validation + test, produced by a seeded shuffle and
// a 10-way near-equal cut (remainder rows go to the earliest partitions).
struct DatasetSplit {
  std::vector<std::vector<EncodedExample>> train_partitions;
  std::vector<EncodedExample> val_partition;
  std::vector<EncodedExample> test_partition;
  std::uint64_t seed = 0;

  std::size_t total_examples() const {
    std::size_t n = val_partition.size() + test_partition.size();
    for (const auto& p : train_partitions) n += p.size();
    return n;
  }

  bool operator==(const DatasetSplit&) const = default;
};

inline constexpr int kNumPartitions = 10;
inline constexpr int kNumTrainPartitions = 8;

// Sizes of the 10 near-equal partitions of n examples.
inline std::array<std::size_t, kNumPartitions> partition_sizes(std::size_t n) {
  std::array<std::size_t, kNumPartitions> sizes{};
  const std::size_t base = n / kNumPartitions;
  const std::size_t rem = n % kNumPartitions;
  for (int p = 0; p < kNumPartitions; ++p) {
    sizes[static_cast<std::size_t>(p)] =
        base + (static_cast<std::size_t>(p) < rem ? 1 : 0);
  }
  return sizes;
}

inline DatasetSplit split_and_partition(std::vector<EncodedExample> examples,
                                        std::uint64_t seed) {
  if (examples.size() < kNumPartitions) {
    throw DataError("need at least " + std::to_string(kNumPartitions) +
                    " examples to split, got " +
                    std::to_string(examples.size()));
  }
  Rng rng(seed);
  rng.shuffle(examples);

  const auto sizes = partition_sizes(examples.size());
  DatasetSplit split;
  split.seed = seed;
  std::size_t pos = 0;
  for (int p = 0; p < kNumPartitions; ++p) {
    const std::size_t n = sizes[static_cast<std::size_t>(p)];
    std::vector<EncodedExample> part(examples.begin() + pos,
                                     examples.begin() + pos + n);
    pos += n;
    if (p < kNumTrainPartitions) {
      split.train_partitions.push_back(std::move(part));
    } else if (p == kNumTrainPartitions) {
      split.val_partition = std::move(part);
    } else {
      split.test_partition = std::move(part);
    }
  }
  return split;
}

enum class RebalanceMode { kUndersample, kOversample };

// Random class rebalancing: undersample reduces the majority class to the
// minority count, oversample duplicates minority examples up to the
// majority count. Input order is not preserved.
inline std::vector<EncodedExample> rebalance(
    std::span<const EncodedExample> examples, RebalanceMode mode,
    std::uint64_t seed) {
  std::vector<EncodedExample> pos, neg;
  for (const auto& ex : examples) {
    (ex.label ? pos : neg).push_back(ex);
  }
  if (pos.empty() || neg.empty()) {
    throw DataError("rebalance requires both classes present");
  }

  Rng rng(seed);
  auto& major = pos.size() >= neg.size() ? pos : neg;
  auto& minor = pos.size() >= neg.size() ? neg : pos;

  if (mode == RebalanceMode::kUndersample) {
    rng.shuffle(major);
    major.resize(minor.size());
  } else {
    const std::size_t target = major.size();
    std::vector<EncodedExample> extra;
    while (minor.size() + extra.size() < target) {
      extra.push_back(minor[rng.below(minor.size())]);
    }
    minor.insert(minor.end(), extra.begin(), extra.end());
  }

  std::vector<EncodedExample> out;
  out.reserve(pos.size() + neg.size());
  out.insert(out.end(), neg.begin(), neg.end());
  out.insert(out.end(), pos.begin(), pos.end());
  rng.shuffle(out);
  return out;
}

// Positive/negative class counts over any example range.
inline std::pair<std::size_t, std::size_t> class_counts(
    std::span<const EncodedExample> examples) {
  std::size_t pos = 0;
  for (const auto& ex : examples) pos += ex.label;
  return {pos, examples.size() - pos};
}

}  // namespace ctr
