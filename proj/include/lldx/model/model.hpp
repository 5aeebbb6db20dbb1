// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lldx/numeric/layers.hpp"
#include "lldx/numeric/lstm.hpp"
#include "lldx/stream/task_stream.hpp"

namespace lldx {

/// How per-step context states are pooled into one vector of width 2H.
enum class AggMode { kMean, kMax, kConcatEnds };

std::string_view agg_mode_name(AggMode mode);
AggMode parse_agg_mode(std::string_view name);

struct ModelConfig {
  std::size_t char_vocab = 0;
  std::size_t entity_vocab = 0;
  std::size_t embed_dim = 16;
  std::size_t hidden = 16;
  AggMode agg = AggMode::kMean;
  /// Without the entity channel the classifier sees z_c only.
  bool use_entities = true;
  /// Without attention every sub-entity gets weight 1/M.
  bool use_attention = true;

  bool operator==(const ModelConfig&) const = default;
};

struct ContextEncoding {
  Vec h_c;  // aggregated BiLSTM state, width 2H
  Vec z_c;  // W_align_c^T h_c
};

struct EntityEncoding {
  Tensor2 states;  // h^s_m rows [M x 2H]
  Vec scores;      // cosine scores u_m
  Vec attention;   // a_m, empty when M = 0
  Vec h_s;         // sum_m a_m h^s_m, zero when M = 0
  Vec z_s;         // W_align_s^T h_s
};

struct Classification {
  Vec logits;
  Vec probabilities;
};

/// The pair of aligned embeddings consolidation compares across stages.
struct Embedding {
  Vec z_c;
  Vec z_s;  // empty when the entity channel is disabled
};

/// Cosine similarity with the zero-norm guard: 0 if either norm < 1e-12.
double guarded_cosine(std::span<const double> a, std::span<const double> b);

/// Dual-channel classifier: character BiLSTM context encoder, sub-entity
/// BiLSTM with context-to-entity attention, one square alignment layer per
/// channel and a bias-free classifier whose rows grow with the label space.
class DualEncoderModel {
 public:
  DualEncoderModel() = default;
  DualEncoderModel(const ModelConfig& config, RngStream& init_rng);

  const ModelConfig& config() const { return config_; }
  std::size_t num_classes() const { return classifier_.rows(); }
  std::size_t channel_dim() const { return 2 * config_.hidden; }
  std::size_t feature_dim() const { return config_.use_entities ? 4 * config_.hidden : 2 * config_.hidden; }

  ContextEncoding encode_context(const Note& note) const;
  EntityEncoding encode_entities(const Note& note, std::span<const double> h_c) const;
  Classification classify(std::span<const double> z_c, std::span<const double> z_s) const;
  Embedding embed(const Note& note) const;
  /// argmax over the current label space.
  Label predict(const Note& note) const;

  /// Adds rows for new labels; existing rows are left bit-identical.
  void expand_classifier(std::size_t new_labels, RngStream& rng);

  /// Forward + backward of scale * cross-entropy; returns the unscaled loss.
  double accumulate_cross_entropy(const Note& note, double scale);

  struct ConsolidationTerms {
    double omega_c = 0.0;
    double omega_s = 0.0;
  };
  /// Forward + backward of scale * (alpha |z_c - t_c|^2 + beta |z_s - t_s|^2)
  /// against fixed targets; returns the unweighted squared distances.
  ConsolidationTerms accumulate_consolidation(const Note& note, const Embedding& target,
                                              double alpha, double beta, double scale);

  /// Aligned per-entity embeddings W_align_s^T h^s_m, one row per entity.
  Tensor2 aligned_entity_states(const Note& note) const;

  std::vector<ParamSlot*> parameters();
  std::vector<const ParamSlot*> parameters() const;
  std::vector<ParamSlot*> alignment_parameters() { return {&align_c_, &align_s_}; }
  /// Every slot except the alignment layers.
  std::vector<ParamSlot*> non_alignment_parameters();

  ParamSlot& char_embedding() { return char_emb_; }
  ParamSlot& entity_embedding() { return ent_emb_; }
  ParamSlot& align_c() { return align_c_; }
  ParamSlot& align_s() { return align_s_; }
  ParamSlot& classifier() { return classifier_; }
  const ParamSlot& align_c() const { return align_c_; }
  const ParamSlot& align_s() const { return align_s_; }
  const ParamSlot& classifier() const { return classifier_; }
  LstmWeights& context_lstm(bool backward) { return backward ? ctx_bwd_ : ctx_fwd_; }
  LstmWeights& entity_lstm(bool backward) { return backward ? ent_bwd_ : ent_fwd_; }

  /// Copy without classifier rows, used for frozen encoder snapshots.
  DualEncoderModel clone_encoders() const;

  void set_all_frozen(bool frozen);

 private:
  struct Trace;
  Trace forward(const Note& note, bool with_logits) const;
  void backward(const Note& note, const Trace& trace, std::span<const double> d_logits,
                std::span<const double> d_z_c, std::span<const double> d_z_s);
  bool encoders_accumulate() const;

  ModelConfig config_;
  ParamSlot char_emb_;
  ParamSlot ent_emb_;
  LstmWeights ctx_fwd_, ctx_bwd_;
  LstmWeights ent_fwd_, ent_bwd_;
  ParamSlot align_c_;
  ParamSlot align_s_;
  ParamSlot classifier_;
};

/// Read-only deep copy of the encoders and alignment layers of one stage.
/// It can embed notes but has no classifier and never accumulates gradients.
class EncoderSnapshot {
 public:
  explicit EncoderSnapshot(const DualEncoderModel& model);

  Embedding embed(const Note& note) const { return model_.embed(note); }
  ContextEncoding encode_context(const Note& note) const { return model_.encode_context(note); }
  EntityEncoding encode_entities(const Note& note, std::span<const double> h_c) const {
    return model_.encode_entities(note, h_c);
  }
  const DualEncoderModel& model() const { return model_; }

 private:
  DualEncoderModel model_;
};

}  // namespace lldx
