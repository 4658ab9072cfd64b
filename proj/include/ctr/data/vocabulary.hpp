#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctr/data/record.hpp"
#include "ctr/error.hpp"

namespace ctr {

// Per-field token -> index maps over a global, disjoint index space.
// Local index 0 of every field is reserved for out-of-vocabulary/missing,
// so global index field_offsets[f] is field f's OOV slot.
struct FeatureVocabulary {
  std::array<std::unordered_map<std::string, std::uint32_t>, kNumFields>
      per_field;
  std::array<std::uint32_t, kNumFields> field_offsets{};
  std::array<std::uint32_t, kNumFields> field_sizes{};  // includes OOV slot
  std::uint32_t min_frequency = 1;
  std::uint32_t total_features = 0;

  // Global index for a token of field f; OOV absorbs unknown and missing.
  std::uint32_t encode_token(int f, std::string_view token) const {
    const auto& m = per_field[static_cast<std::size_t>(f)];
    const auto it = m.find(std::string(token));
    const std::uint32_t local = (it == m.end()) ? 0u : it->second;
    return field_offsets[static_cast<std::size_t>(f)] + local;
  }

  std::uint32_t oov_index(int f) const {
    return field_offsets[static_cast<std::size_t>(f)];
  }
};

// Counts tokens per field (after numeric discretization), drops tokens seen
// fewer than min_frequency times, and assigns local indices 1..n in
// (count desc, token asc) order so the result is independent of record order.
inline FeatureVocabulary build_vocabulary(std::span<const RawRecord> records,
                                          std::uint32_t min_frequency) {
  if (records.empty()) throw DataError("empty corpus");
  if (min_frequency == 0) throw ConfigError("min_frequency must be positive");

  std::array<std::unordered_map<std::string, std::uint64_t>, kNumFields>
      counts;
  for (const RawRecord& rec : records) {
    for (int f = 0; f < kNumFields; ++f) {
      std::string tok = field_token(rec, f);
      if (tok == kMissingToken) continue;
      ++counts[static_cast<std::size_t>(f)][std::move(tok)];
    }
  }

  FeatureVocabulary vocab;
  vocab.min_frequency = min_frequency;
  std::uint32_t offset = 0;
  for (int f = 0; f < kNumFields; ++f) {
    auto& field_counts = counts[static_cast<std::size_t>(f)];
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    kept.reserve(field_counts.size());
    for (auto& [tok, n] : field_counts) {
      if (n >= min_frequency) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    auto& m = vocab.per_field[static_cast<std::size_t>(f)];
    std::uint32_t local = 1;  // 0 is OOV
    for (auto& [tok, n] : kept) {
      m.emplace(std::move(tok), local++);
    }
    vocab.field_offsets[static_cast<std::size_t>(f)] = offset;
    vocab.field_sizes[static_cast<std::size_t>(f)] = local;
    offset += local;
  }
  vocab.total_features = offset;
  return vocab;
}

}  // namespace ctr
