#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctr/binio.hpp"
#include "ctr/data/dataset.hpp"
#include "ctr/data/vocabulary.hpp"
#include "ctr/error.hpp"

namespace ctr {

// A fitted vocabulary plus the partitioned encoded corpus; what the CTRF
// file stores.
struct EncodedDataset {
  FeatureVocabulary vocab;
  DatasetSplit split;
};

inline constexpr char kDatasetMagic[4] = {'C', 'T', 'R', 'F'};
inline constexpr std::uint16_t kDatasetVersion = 1;

// CTRF layout (little-endian):
//   magic "CTRF", version u16, min_frequency u32, split seed u64,
//   39 x [token_count u32, token_count x [len u16, bytes, local_index u32]],
//   partition_count u32 (=10),
//   10 x [example_count u64, examples (label u8 + 39 x index u32)].
// Token entries are written in local-index order so identical vocabularies
// serialize to identical bytes.
inline void save_encoded(const EncodedDataset& ds, const std::string& path) {
  BinWriter w(path);
  w.bytes(kDatasetMagic, 4);
  w.u16(kDatasetVersion);
  w.u32(ds.vocab.min_frequency);
  w.u64(ds.split.seed);

  for (int f = 0; f < kNumFields; ++f) {
    const auto& m = ds.vocab.per_field[static_cast<std::size_t>(f)];
    std::vector<std::pair<std::string, std::uint32_t>> entries(m.begin(),
                                                               m.end());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [tok, local] : entries) {
      w.str16(tok);
      w.u32(local);
    }
  }

  const auto write_partition = [&](const std::vector<EncodedExample>& part) {
    w.u64(part.size());
    for (const EncodedExample& ex : part) {
      w.u8(ex.label);
      for (std::uint32_t idx : ex.field_indices) w.u32(idx);
    }
  };

  w.u32(kNumPartitions);
  for (const auto& part : ds.split.train_partitions) write_partition(part);
  write_partition(ds.split.val_partition);
  write_partition(ds.split.test_partition);
  w.close();
}

inline EncodedDataset load_encoded(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != std::string_view(kDatasetMagic, 4)) {
    throw IoError("not a CTRF dataset file: " + path);
  }
  const std::uint16_t version = r.u16();
  if (version != kDatasetVersion) {
    throw IoError("unsupported CTRF version " + std::to_string(version));
  }

  EncodedDataset ds;
  ds.vocab.min_frequency = r.u32();
  ds.split.seed = r.u64();

  std::uint32_t offset = 0;
  for (int f = 0; f < kNumFields; ++f) {
    const std::uint32_t count = r.u32();
    auto& m = ds.vocab.per_field[static_cast<std::size_t>(f)];
    m.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string tok = r.str16();
      const std::uint32_t local = r.u32();
      if (local == 0 || local > count) {
        throw IoError("corrupt vocabulary entry in " + path);
      }
      m.emplace(std::move(tok), local);
    }
    ds.vocab.field_offsets[static_cast<std::size_t>(f)] = offset;
    ds.vocab.field_sizes[static_cast<std::size_t>(f)] = count + 1;
    offset += count + 1;
  }
  ds.vocab.total_features = offset;

  const std::uint32_t partitions = r.u32();
  if (partitions != kNumPartitions) {
    throw IoError("expected " + std::to_string(kNumPartitions) +
                  " partitions, file has " + std::to_string(partitions));
  }

  const auto read_partition = [&](std::vector<EncodedExample>& part) {
    const std::uint64_t count = r.u64();
    if (count * (1 + 4 * static_cast<std::uint64_t>(kNumFields)) >
        r.remaining()) {
      throw IoError("truncated file: " + path);
    }
    part.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      EncodedExample& ex = part[i];
      ex.label = r.u8();
      if (ex.label > 1) throw IoError("corrupt label in " + path);
      for (int f = 0; f < kNumFields; ++f) {
        const std::uint32_t idx = r.u32();
        const auto fs = static_cast<std::size_t>(f);
        if (idx < ds.vocab.field_offsets[fs] ||
            idx >= ds.vocab.field_offsets[fs] + ds.vocab.field_sizes[fs]) {
          throw IoError("feature index out of field range in " + path);
        }
        ex.field_indices[fs] = idx;
      }
    }
  };

  ds.split.train_partitions.resize(kNumTrainPartitions);
  for (auto& part : ds.split.train_partitions) read_partition(part);
  read_partition(ds.split.val_partition);
  read_partition(ds.split.test_partition);
  if (!r.at_end()) throw IoError("trailing bytes in " + path);
  return ds;
}

}  // namespace ctr
