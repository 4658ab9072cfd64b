#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctr/error.hpp"

#include "json.hpp"

namespace ctr {

enum class ModelKind { kLr, kFm, kDeepFm, kFiGnn };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLr: return "lr";
    case ModelKind::kFm: return "fm";
    case ModelKind::kDeepFm: return "deepfm";
    case ModelKind::kFiGnn: return "fignn";
  }
  throw ConfigError("unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "lr") return ModelKind::kLr;
  if (s == "fm") return ModelKind::kFm;
  if (s == "deepfm") return ModelKind::kDeepFm;
  if (s == "fignn") return ModelKind::kFiGnn;
  throw ConfigError("unknown model kind: '" + s + "'");
}

struct ModelConfig {
  ModelKind kind = ModelKind::kLr;
  std::size_t embed_dim = 16;
  std::size_t attention_heads = 2;
  std::size_t gnn_steps = 2;
  std::vector<std::size_t> mlp_hidden = {64, 32};
  double init_scale = 0.01;
  std::uint64_t seed = 1;

  void validate() const {
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (attention_heads == 0) {
      throw ConfigError("attention_heads must be positive");
    }
    if (embed_dim % attention_heads != 0) {
      throw ConfigError("embed_dim must be divisible by attention_heads");
    }
    for (std::size_t w : mlp_hidden) {
      if (w == 0) throw ConfigError("mlp_hidden widths must be positive");
    }
    if (init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"model", to_string(c.kind)},
                        {"embed_dim", c.embed_dim},
                        {"attention_heads", c.attention_heads},
                        {"gnn_steps", c.gnn_steps},
                        {"mlp_hidden", c.mlp_hidden},
                        {"init_scale", c.init_scale},
                        {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("model").get<std::string>());
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.attention_heads = j.at("attention_heads").get<std::size_t>();
  c.gnn_steps = j.at("gnn_steps").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
  c.init_scale = j.at("init_scale").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace ctr
