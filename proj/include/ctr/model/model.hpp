#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctr/data/dataset.hpp"
#include "ctr/error.hpp"
#include "ctr/model/config.hpp"
#include "ctr/model/fignn.hpp"
#include "ctr/model/fm_math.hpp"
#include "ctr/model/params.hpp"
#include "ctr/num/adam.hpp"
#include "ctr/num/functions.hpp"
#include "ctr/rng.hpp"

namespace ctr {

// Probabilities entering the log are clipped to [kLossClip, 1 - kLossClip].
inline constexpr double kLossClip = 1e-7;
// Reported probabilities stay strictly inside (0, 1).
inline constexpr double kProbFloor = 1e-15;

// Mean binary cross-entropy with probability clipping.
inline double bce_loss(std::span<const double> probs,
                       std::span<const std::uint8_t> labels) {
  if (probs.empty()) throw DataError("loss of empty batch");
  if (probs.size() != labels.size()) {
    throw ConfigError("loss: probs/labels length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kLossClip, 1.0 - kLossClip);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

// One CTR model (LR, FM, DeepFM or FiGNN) with its parameters, optimizer
// moments and generation counter. predict/batch_loss are const and safe for
// concurrent callers; train_step needs exclusive ownership.
class Model {
 public:
  static Model init(const ModelConfig& config,
                    std::span<const std::uint32_t> field_sizes,
                    double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                    double eps = 1e-8) {
    config.validate();
    if (field_sizes.size() != kNumFields) {
      throw ConfigError("expected " + std::to_string(kNumFields) +
                        " per-field vocabulary sizes");
    }
    Model m;
    m.config_ = config;
    m.field_sizes_.assign(field_sizes.begin(), field_sizes.end());
    m.field_offsets_.resize(kNumFields);
    std::uint32_t offset = 0;
    for (int f = 0; f < kNumFields; ++f) {
      m.field_offsets_[static_cast<std::size_t>(f)] = offset;
      offset += field_sizes[static_cast<std::size_t>(f)];
    }
    m.total_features_ = offset;
    m.define_tensors();
    m.init_values();
    m.adam_ = AdamState::init(m.params_.size(), lr, beta1, beta2, eps);
    return m;
  }

  const ModelConfig& config() const { return config_; }
  std::span<const std::uint32_t> field_sizes() const { return field_sizes_; }
  std::uint32_t total_features() const { return total_features_; }
  std::int64_t generation() const { return generation_; }
  void advance_generation() { ++generation_; }
  void set_generation(std::int64_t g) { generation_ = g; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  AdamState& adam() { return adam_; }
  const AdamState& adam() const { return adam_; }

  // Forward pass only; deterministic, no parameter mutation.
  std::vector<double> predict(std::span<const EncodedExample> batch) const {
    validate_batch(batch);
    std::vector<double> probs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double logit = forward_logit(batch[i], nullptr);
      if (!std::isfinite(logit)) {
        throw DivergenceError("non-finite model output (generation " +
                              std::to_string(generation_) + ")");
      }
      probs[i] = std::clamp(sigmoid(logit), kProbFloor, 1.0 - kProbFloor);
    }
    return probs;
  }

  double batch_loss(std::span<const EncodedExample> batch) const {
    const auto probs = predict(batch);
    std::vector<std::uint8_t> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;
    return bce_loss(probs, labels);
  }

  // Mean loss plus accumulated dLoss/dparams for the batch.
  double forward_backward(std::span<const EncodedExample> batch,
                          std::span<double> grads) const {
    validate_batch(batch);
    if (batch.empty()) throw DataError("train step on empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    Scratch scratch;
    for (const EncodedExample& ex : batch) {
      const double logit = forward_logit(ex, &scratch);
      const double p = sigmoid(logit);
      const double pc = std::clamp(p, kLossClip, 1.0 - kLossClip);
      total -= ex.label ? std::log(pc) : std::log(1.0 - pc);
      // Clipped probabilities sit on a flat piece of the loss.
      const double dlogit =
          (p <= kLossClip || p >= 1.0 - kLossClip)
              ? 0.0
              : (p - static_cast<double>(ex.label)) * inv_n;
      backward_logit(ex, scratch, dlogit, grads);
    }
    return total * inv_n;
  }

  std::vector<double> gradient(std::span<const EncodedExample> batch) const {
    std::vector<double> grads(params_.size(), 0.0);
    forward_backward(batch, grads);
    return grads;
  }

  // One forward/backward/Adam step; returns the pre-update loss.
  double train_step(std::span<const EncodedExample> batch) {
    std::vector<double> grads(params_.size(), 0.0);
    const double loss = forward_backward(batch, grads);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss in train_step (generation " +
                            std::to_string(generation_) + ", batch size " +
                            std::to_string(batch.size()) + ")");
    }
    adam_update(params_.flat(), grads, adam_);
    return loss;
  }

  // FiGNN forward with optional inspection of the propagation internals.
  std::vector<double> fignn_forward(std::span<const EncodedExample> batch,
                                    FignnTrace* trace = nullptr) const {
    if (config_.kind != ModelKind::kFiGnn) {
      throw ConfigError("fignn_forward requires a FiGNN model");
    }
    validate_batch(batch);
    std::vector<double> probs(batch.size());
    FignnCache cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double logit =
          ctr::fignn_logit(fignn_views(), batch[i], cache, trace);
      probs[i] = std::clamp(sigmoid(logit), kProbFloor, 1.0 - kProbFloor);
    }
    return probs;
  }

  // Component logits of the DeepFM forward pass (testing surface for the
  // shared-embedding property).
  struct DeepFmComponents {
    double fm_logit = 0.0;
    double mlp_logit = 0.0;
  };
  DeepFmComponents deepfm_components(const EncodedExample& ex) const {
    if (config_.kind != ModelKind::kDeepFm) {
      throw ConfigError("deepfm_components requires a DeepFM model");
    }
    Scratch scratch;
    DeepFmComponents out;
    out.fm_logit = lr_fm_logit(ex, /*with_factors=*/true, &scratch);
    out.mlp_logit = mlp_logit(ex, &scratch);
    return out;
  }

 private:
  Model() = default;

  struct MlpCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // per layer, before ReLU
    std::vector<std::vector<double>> act;   // per layer, after ReLU
  };

  struct Scratch {
    std::vector<double> fm_sums;  // per-dimension sums for the FM identity
    MlpCache mlp;
    FignnCache fignn;
  };

  void define_tensors() {
    const std::size_t k = config_.embed_dim;
    const std::size_t n = kNumFields;
    switch (config_.kind) {
      case ModelKind::kLr:
        bias_ = params_.add("bias", 1, 1, true);
        weights_ = params_.add("weights", 1, total_features_);
        break;
      case ModelKind::kFm:
        bias_ = params_.add("bias", 1, 1, true);
        weights_ = params_.add("weights", 1, total_features_);
        factors_ = params_.add("factors", total_features_, k);
        break;
      case ModelKind::kDeepFm: {
        bias_ = params_.add("bias", 1, 1, true);
        weights_ = params_.add("weights", 1, total_features_);
        factors_ = params_.add("factors", total_features_, k);
        std::size_t in_dim = n * k;
        mlp_w_.clear();
        mlp_b_.clear();
        for (std::size_t l = 0; l < config_.mlp_hidden.size(); ++l) {
          const std::size_t width = config_.mlp_hidden[l];
          mlp_w_.push_back(params_.add("mlp.w" + std::to_string(l), width, in_dim));
          mlp_b_.push_back(params_.add("mlp.b" + std::to_string(l), 1, width, true));
          in_dim = width;
        }
        mlp_out_w_ = params_.add("mlp.out_w", 1, in_dim);
        mlp_out_b_ = params_.add("mlp.out_b", 1, 1, true);
        break;
      }
      case ModelKind::kFiGnn:
        embed_ = params_.add("embed", total_features_, k);
        attn_wq_ = params_.add("attn.wq", k, k);
        attn_wk_ = params_.add("attn.wk", k, k);
        attn_wv_ = params_.add("attn.wv", k, k);
        attn_wo_ = params_.add("attn.wo", k, k);
        edge_attn_ = params_.add("edge.attn", 1, 2 * k);
        edge_wout_ = params_.add("edge.wout", n * k, k);
        gru_wz_ = params_.add("gru.wz", k, k);
        gru_uz_ = params_.add("gru.uz", k, k);
        gru_wr_ = params_.add("gru.wr", k, k);
        gru_ur_ = params_.add("gru.ur", k, k);
        gru_wh_ = params_.add("gru.wh", k, k);
        gru_uh_ = params_.add("gru.uh", k, k);
        gru_bz_ = params_.add("gru.bz", 1, k, true);
        gru_br_ = params_.add("gru.br", 1, k, true);
        gru_bh_ = params_.add("gru.bh", 1, k, true);
        read_score_w_ = params_.add("read.score_w", 1, k);
        read_score_b_ = params_.add("read.score_b", 1, 1, true);
        read_attn_w_ = params_.add("read.attn_w", 1, k);
        read_attn_b_ = params_.add("read.attn_b", 1, 1, true);
        break;
    }
  }

  void init_values() {
    Rng rng(config_.seed);
    const double s = config_.init_scale;
    for (std::size_t id = 0; id < params_.specs().size(); ++id) {
      auto view = params_.view(id);
      if (params_.specs()[id].is_bias) {
        std::fill(view.begin(), view.end(), 0.0);
      } else {
        for (double& x : view) x = rng.uniform(-s, s);
      }
    }
  }

  void validate_batch(std::span<const EncodedExample> batch) const {
    for (const EncodedExample& ex : batch) {
      for (int f = 0; f < kNumFields; ++f) {
        const auto fs = static_cast<std::size_t>(f);
        const std::uint32_t idx = ex.field_indices[fs];
        if (idx < field_offsets_[fs] ||
            idx >= field_offsets_[fs] + field_sizes_[fs]) {
          throw CompatibilityError(
              "feature index " + std::to_string(idx) +
              " outside field " + std::to_string(f) + " range");
        }
      }
    }
  }

  double forward_logit(const EncodedExample& ex, Scratch* scratch) const {
    Scratch local;
    Scratch& sc = scratch ? *scratch : local;
    switch (config_.kind) {
      case ModelKind::kLr:
        return lr_fm_logit(ex, false, &sc);
      case ModelKind::kFm:
        return lr_fm_logit(ex, true, &sc);
      case ModelKind::kDeepFm:
        return lr_fm_logit(ex, true, &sc) + mlp_logit(ex, &sc);
      case ModelKind::kFiGnn:
        return ctr::fignn_logit(fignn_views(), ex, sc.fignn);
    }
    throw ConfigError("unknown model kind");
  }

  void backward_logit(const EncodedExample& ex, const Scratch& sc,
                      double dlogit, std::span<double> grads) const {
    if (dlogit == 0.0) return;
    switch (config_.kind) {
      case ModelKind::kLr:
        lr_fm_backward(ex, sc, false, dlogit, grads);
        return;
      case ModelKind::kFm:
        lr_fm_backward(ex, sc, true, dlogit, grads);
        return;
      case ModelKind::kDeepFm:
        lr_fm_backward(ex, sc, true, dlogit, grads);
        mlp_backward(ex, sc, dlogit, grads);
        return;
      case ModelKind::kFiGnn: {
        FignnGrads g = fignn_grads(grads);
        ctr::fignn_backward(fignn_views(), sc.fignn, ex, dlogit, g);
        return;
      }
    }
  }

  // --- LR / FM ---

  double lr_fm_logit(const EncodedExample& ex, bool with_factors,
                     Scratch* sc) const {
    double logit = params_.view(bias_)[0];
    const auto w = params_.view(weights_);
    for (int f = 0; f < kNumFields; ++f) {
      const auto fs = static_cast<std::size_t>(f);
      logit += w[ex.field_indices[fs]] * ex.field_values[fs];
    }
    if (with_factors) {
      logit += fm_pairwise_term(params_.view(factors_), config_.embed_dim,
                                ex.field_indices, ex.field_values,
                                sc ? &sc->fm_sums : nullptr);
    }
    return logit;
  }

  void lr_fm_backward(const EncodedExample& ex, const Scratch& sc,
                      bool with_factors, double dlogit,
                      std::span<double> grads) const {
    params_.view_in(bias_, grads)[0] += dlogit;
    auto dw = params_.view_in(weights_, grads);
    for (int f = 0; f < kNumFields; ++f) {
      const auto fs = static_cast<std::size_t>(f);
      dw[ex.field_indices[fs]] += dlogit * ex.field_values[fs];
    }
    if (with_factors) {
      const std::size_t k = config_.embed_dim;
      const auto factors = params_.view(factors_);
      auto dv = params_.view_in(factors_, grads);
      for (int f = 0; f < kNumFields; ++f) {
        const auto fs = static_cast<std::size_t>(f);
        const std::size_t base =
            static_cast<std::size_t>(ex.field_indices[fs]) * k;
        const double x = ex.field_values[fs];
        for (std::size_t d = 0; d < k; ++d) {
          dv[base + d] +=
              dlogit * x * (sc.fm_sums[d] - factors[base + d] * x);
        }
      }
    }
  }

  // --- DeepFM MLP over the shared embedding table ---

  double mlp_logit(const EncodedExample& ex, Scratch* sc) const {
    const std::size_t k = config_.embed_dim;
    const auto factors = params_.view(factors_);
    MlpCache& c = sc->mlp;
    c.input.assign(static_cast<std::size_t>(kNumFields) * k, 0.0);
    for (int f = 0; f < kNumFields; ++f) {
      const auto fs = static_cast<std::size_t>(f);
      const std::size_t base =
          static_cast<std::size_t>(ex.field_indices[fs]) * k;
      for (std::size_t d = 0; d < k; ++d) {
        c.input[fs * k + d] = ex.field_values[fs] * factors[base + d];
      }
    }

    c.pre.assign(mlp_w_.size(), {});
    c.act.assign(mlp_w_.size(), {});
    const std::vector<double>* cur = &c.input;
    for (std::size_t l = 0; l < mlp_w_.size(); ++l) {
      const auto& spec = params_.specs()[mlp_w_[l]];
      auto& pre = c.pre[l];
      pre.assign(spec.rows, 0.0);
      const auto b = params_.view(mlp_b_[l]);
      std::copy(b.begin(), b.end(), pre.begin());
      matvec_add(params_.view(mlp_w_[l]), spec.rows, spec.cols, *cur, pre);
      auto& act = c.act[l];
      act.resize(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) {
        act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      }
      cur = &act;
    }
    return dot(params_.view(mlp_out_w_), *cur) + params_.view(mlp_out_b_)[0];
  }

  void mlp_backward(const EncodedExample& ex, const Scratch& sc,
                    double dlogit, std::span<double> grads) const {
    const MlpCache& c = sc.mlp;
    const std::vector<double>& last =
        mlp_w_.empty() ? c.input : c.act.back();

    params_.view_in(mlp_out_b_, grads)[0] += dlogit;
    axpy(dlogit, last, params_.view_in(mlp_out_w_, grads));

    std::vector<double> dcur(last.size());
    const auto out_w = params_.view(mlp_out_w_);
    for (std::size_t i = 0; i < dcur.size(); ++i) dcur[i] = dlogit * out_w[i];

    for (std::size_t l = mlp_w_.size(); l-- > 0;) {
      const auto& spec = params_.specs()[mlp_w_[l]];
      // through ReLU
      for (std::size_t i = 0; i < dcur.size(); ++i) {
        if (c.pre[l][i] <= 0.0) dcur[i] = 0.0;
      }
      axpy(1.0, dcur, params_.view_in(mlp_b_[l], grads));
      const std::vector<double>& below = (l == 0) ? c.input : c.act[l - 1];
      outer_add(params_.view_in(mlp_w_[l], grads), dcur, below);
      std::vector<double> dbelow(below.size(), 0.0);
      matvec_t_add(params_.view(mlp_w_[l]), spec.rows, spec.cols, dcur,
                   dbelow);
      dcur = std::move(dbelow);
    }

    // into the shared embedding table
    const std::size_t k = config_.embed_dim;
    auto dv = params_.view_in(factors_, grads);
    for (int f = 0; f < kNumFields; ++f) {
      const auto fs = static_cast<std::size_t>(f);
      const std::size_t base =
          static_cast<std::size_t>(ex.field_indices[fs]) * k;
      for (std::size_t d = 0; d < k; ++d) {
        dv[base + d] += ex.field_values[fs] * dcur[fs * k + d];
      }
    }
  }

  // --- FiGNN view plumbing ---

  FignnViews fignn_views() const {
    FignnViews v;
    v.embed = params_.view(embed_);
    v.attn = AttentionWeights{params_.view(attn_wq_), params_.view(attn_wk_),
                              params_.view(attn_wv_), params_.view(attn_wo_),
                              config_.embed_dim, config_.attention_heads};
    v.edge_attn = params_.view(edge_attn_);
    v.edge_wout = params_.view(edge_wout_);
    v.gru = GruWeights{params_.view(gru_wz_), params_.view(gru_uz_),
                       params_.view(gru_wr_), params_.view(gru_ur_),
                       params_.view(gru_wh_), params_.view(gru_uh_),
                       params_.view(gru_bz_), params_.view(gru_br_),
                       params_.view(gru_bh_), config_.embed_dim};
    v.score_w = params_.view(read_score_w_);
    v.score_b = params_.view(read_score_b_);
    v.attn_w = params_.view(read_attn_w_);
    v.attn_b = params_.view(read_attn_b_);
    v.k = config_.embed_dim;
    v.steps = config_.gnn_steps;
    return v;
  }

  FignnGrads fignn_grads(std::span<double> grads) const {
    FignnGrads g;
    g.embed = params_.view_in(embed_, grads);
    g.attn = AttentionGrads{
        params_.view_in(attn_wq_, grads), params_.view_in(attn_wk_, grads),
        params_.view_in(attn_wv_, grads), params_.view_in(attn_wo_, grads)};
    g.edge_attn = params_.view_in(edge_attn_, grads);
    g.edge_wout = params_.view_in(edge_wout_, grads);
    g.gru = GruGrads{params_.view_in(gru_wz_, grads),
                     params_.view_in(gru_uz_, grads),
                     params_.view_in(gru_wr_, grads),
                     params_.view_in(gru_ur_, grads),
                     params_.view_in(gru_wh_, grads),
                     params_.view_in(gru_uh_, grads),
                     params_.view_in(gru_bz_, grads),
                     params_.view_in(gru_br_, grads),
                     params_.view_in(gru_bh_, grads)};
    g.score_w = params_.view_in(read_score_w_, grads);
    g.score_b = params_.view_in(read_score_b_, grads);
    g.attn_w = params_.view_in(read_attn_w_, grads);
    g.attn_b = params_.view_in(read_attn_b_, grads);
    return g;
  }

  ModelConfig config_;
  std::vector<std::uint32_t> field_sizes_;
  std::vector<std::uint32_t> field_offsets_;
  std::uint32_t total_features_ = 0;
  ParameterSet params_;
  AdamState adam_;
  std::int64_t generation_ = 0;

  // tensor ids (meaning depends on the architecture)
  std::size_t bias_ = 0, weights_ = 0, factors_ = 0;
  std::vector<std::size_t> mlp_w_, mlp_b_;
  std::size_t mlp_out_w_ = 0, mlp_out_b_ = 0;
  std::size_t embed_ = 0;
  std::size_t attn_wq_ = 0, attn_wk_ = 0, attn_wv_ = 0, attn_wo_ = 0;
  std::size_t edge_attn_ = 0, edge_wout_ = 0;
  std::size_t gru_wz_ = 0, gru_uz_ = 0, gru_wr_ = 0, gru_ur_ = 0,
              gru_wh_ = 0, gru_uh_ = 0, gru_bz_ = 0, gru_br_ = 0,
              gru_bh_ = 0;
  std::size_t read_score_w_ = 0, read_score_b_ = 0, read_attn_w_ = 0,
              read_attn_b_ = 0;
};

// Spec-level loss entry point over model outputs.
inline double loss(std::span<const double> probs,
                   std::span<const std::uint8_t> labels) {
  return bce_loss(probs, labels);
}

}  // namespace ctr
