#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctr/binio.hpp"
#include "ctr/error.hpp"
#include "ctr/model/config.hpp"
#include "ctr/model/model.hpp"

#include "json.hpp"

namespace ctr {

inline constexpr char kCheckpointMagic[4] = {'C', 'T', 'R', 'M'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

// CTRM layout (little-endian):
//   magic "CTRM", version u16, config JSON blob (len u32 + bytes),
//   tensor_count u32, tensors [name str16, rows u32, cols u32, f64 data].
// The JSON blob holds the model config, per-field vocabulary sizes, the
// generation counter and the Adam hyperparameters/step; the Adam moment
// vectors ride along as the trailing "adam.m"/"adam.v" tensors so that a
// reloaded model continues training exactly where it stopped.
inline void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json j = to_json(model.config());
  j["field_sizes"] = std::vector<std::uint32_t>(model.field_sizes().begin(),
                                                model.field_sizes().end());
  j["generation"] = model.generation();
  j["adam"] = {{"t", model.adam().t},
               {"lr", model.adam().lr},
               {"beta1", model.adam().beta1},
               {"beta2", model.adam().beta2},
               {"eps", model.adam().eps}};
  const std::string blob = j.dump();

  BinWriter w(path);
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.bytes(blob.data(), blob.size());

  const auto& specs = model.params().specs();
  w.u32(static_cast<std::uint32_t>(specs.size() + 2));
  for (std::size_t id = 0; id < specs.size(); ++id) {
    w.str16(specs[id].name);
    w.u32(static_cast<std::uint32_t>(specs[id].rows));
    w.u32(static_cast<std::uint32_t>(specs[id].cols));
    for (double x : model.params().view(id)) w.f64(x);
  }
  const auto write_moments = [&](const std::string& name,
                                 const std::vector<double>& data) {
    w.str16(name);
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(data.size()));
    for (double x : data) w.f64(x);
  };
  write_moments("adam.m", model.adam().m);
  write_moments("adam.v", model.adam().v);
  w.close();
}

inline Model load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != std::string_view(kCheckpointMagic, 4)) {
    throw IoError("not a CTRM checkpoint file: " + path);
  }
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported CTRM version " + std::to_string(version));
  }

  const std::uint32_t blob_len = r.u32();
  std::string blob(blob_len, '\0');
  r.bytes(blob.data(), blob_len);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint config: " + std::string(e.what()));
  }

  const ModelConfig config = model_config_from_json(j);
  const auto field_sizes = j.at("field_sizes").get<std::vector<std::uint32_t>>();
  if (field_sizes.size() != kNumFields) {
    throw IoError("checkpoint has wrong field count");
  }
  const auto& adam_j = j.at("adam");
  Model model = Model::init(config, field_sizes, adam_j.at("lr").get<double>(),
                            adam_j.at("beta1").get<double>(),
                            adam_j.at("beta2").get<double>(),
                            adam_j.at("eps").get<double>());
  model.adam().t = adam_j.at("t").get<std::int64_t>();
  model.set_generation(j.at("generation").get<std::int64_t>());

  const std::uint32_t tensor_count = r.u32();
  const auto& specs = model.params().specs();
  if (tensor_count != specs.size() + 2) {
    throw IoError("checkpoint tensor count mismatch");
  }
  for (std::size_t id = 0; id < specs.size(); ++id) {
    const std::string name = r.str16();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (name != specs[id].name || rows != specs[id].rows ||
        cols != specs[id].cols) {
      throw IoError("checkpoint tensor mismatch at '" + name + "'");
    }
    for (double& x : model.params().view(id)) x = r.f64();
  }
  const auto read_moments = [&](const std::string& want,
                                std::vector<double>& data) {
    const std::string name = r.str16();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (name != want || rows != 1 || cols != data.size()) {
      throw IoError("checkpoint tensor mismatch at '" + name + "'");
    }
    for (double& x : data) x = r.f64();
  };
  read_moments("adam.m", model.adam().m);
  read_moments("adam.v", model.adam().v);
  if (!r.at_end()) throw IoError("trailing bytes in " + path);
  return model;
}

// Vocabulary compatibility between a checkpoint and a dataset.
inline void check_compatible(const Model& model,
                             std::span<const std::uint32_t> field_sizes) {
  if (field_sizes.size() != model.field_sizes().size() ||
      !std::equal(field_sizes.begin(), field_sizes.end(),
                  model.field_sizes().begin())) {
    throw CompatibilityError(
        "checkpoint and dataset vocabulary sizes do not match");
  }
}

}  // namespace ctr
