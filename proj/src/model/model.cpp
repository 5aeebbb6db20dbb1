// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "lldx/error.hpp"

namespace lldx {

std::string_view agg_mode_name(AggMode mode) {
  switch (mode) {
    case AggMode::kMean: return "mean";
    case AggMode::kMax: return "max";
    case AggMode::kConcatEnds: return "concat-ends";
  }
  return "mean";
}

AggMode parse_agg_mode(std::string_view name) {
  if (name == "mean" || name == "mean-pool") return AggMode::kMean;
  if (name == "max" || name == "max-pool") return AggMode::kMax;
  if (name == "concat-ends" || name == "concat") return AggMode::kConcatEnds;
  throw ConfigError("unknown aggregation mode '" + std::string(name) +
                    "' (expected mean, max or concat-ends)");
}

double guarded_cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

struct DualEncoderModel::Trace {
  Tensor2 char_in;
  LstmSequence ctx_f, ctx_b;
  std::vector<std::size_t> max_pos;
  Vec h_c, z_c;

  Tensor2 ent_in;
  LstmSequence ent_f, ent_b;
  Tensor2 ent_states;
  Vec u, a;
  Vec h_s, z_s;

  Vec z;
  Vec logits;
};

DualEncoderModel::DualEncoderModel(const ModelConfig& config, RngStream& rng) : config_(config) {
  if (config.char_vocab == 0 || config.embed_dim == 0 || config.hidden == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (config.use_entities && config.entity_vocab == 0) {
    throw ConfigError("entity channel enabled with an empty entity vocabulary");
  }
  const std::size_t d = config.embed_dim;
  const std::size_t h = config.hidden;
  char_emb_ = ParamSlot("char_embedding", config.char_vocab, d);
  ent_emb_ = ParamSlot("entity_embedding", std::max<std::size_t>(config.entity_vocab, 1), d);
  ctx_fwd_ = LstmWeights("context_lstm.fwd", d, h);
  ctx_bwd_ = LstmWeights("context_lstm.bwd", d, h);
  ent_fwd_ = LstmWeights("entity_lstm.fwd", d, h);
  ent_bwd_ = LstmWeights("entity_lstm.bwd", d, h);
  align_c_ = ParamSlot("align_c", Tensor2::identity(2 * h));
  align_s_ = ParamSlot("align_s", Tensor2::identity(2 * h));
  classifier_ = ParamSlot("classifier", 0, feature_dim());

  // Embedding lookups have a single active input, hence fan-in 1.
  init_uniform_fan_in(char_emb_.value, 1, rng);
  init_uniform_fan_in(ent_emb_.value, 1, rng);
  ctx_fwd_.initialize(rng);
  ctx_bwd_.initialize(rng);
  ent_fwd_.initialize(rng);
  ent_bwd_.initialize(rng);
}

std::vector<ParamSlot*> DualEncoderModel::parameters() {
  std::vector<ParamSlot*> out{&char_emb_, &ent_emb_};
  for (LstmWeights* w : {&ctx_fwd_, &ctx_bwd_, &ent_fwd_, &ent_bwd_}) {
    for (ParamSlot* s : w->slots()) out.push_back(s);
  }
  out.push_back(&align_c_);
  out.push_back(&align_s_);
  out.push_back(&classifier_);
  return out;
}

std::vector<const ParamSlot*> DualEncoderModel::parameters() const {
  auto mutable_slots = const_cast<DualEncoderModel*>(this)->parameters();
  return {mutable_slots.begin(), mutable_slots.end()};
}

std::vector<ParamSlot*> DualEncoderModel::non_alignment_parameters() {
  std::vector<ParamSlot*> out;
  for (ParamSlot* s : parameters()) {
    if (s != &align_c_ && s != &align_s_) out.push_back(s);
  }
  return out;
}

void DualEncoderModel::set_all_frozen(bool frozen) {
  for (ParamSlot* s : parameters()) s->frozen = frozen;
}

bool DualEncoderModel::encoders_accumulate() const {
  for (const ParamSlot* s : parameters()) {
    if (s == &align_c_ || s == &align_s_ || s == &classifier_) continue;
    if (s->accumulates()) return true;
  }
  return false;
}

DualEncoderModel DualEncoderModel::clone_encoders() const {
  DualEncoderModel copy = *this;
  copy.classifier_ = ParamSlot("classifier", 0, feature_dim());
  copy.set_all_frozen(true);
  for (ParamSlot* s : copy.parameters()) s->grad = Tensor2(s->rows(), s->cols());
  return copy;
}

void DualEncoderModel::expand_classifier(std::size_t new_labels, RngStream& rng) {
  if (new_labels == 0) return;
  Tensor2 rows(new_labels, feature_dim());
  init_uniform_fan_in(rows, feature_dim(), rng);
  classifier_.append_rows(rows);
}

namespace {

Tensor2 lookup_rows(const std::vector<TokenId>& ids, const ParamSlot& table, const char* what) {
  Tensor2 out(ids.size(), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= table.rows()) {
      throw IndexError(std::string(what) + " id " + std::to_string(ids[t]) +
                       " out of range for vocabulary of " + std::to_string(table.rows()));
    }
    const auto src = table.value.row(ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

void scatter_rows(const std::vector<TokenId>& ids, const Tensor2& grads, ParamSlot& table) {
  if (!table.accumulates()) return;
  for (std::size_t t = 0; t < ids.size(); ++t) axpy(1.0, grads.row(t), table.grad.row(ids[t]));
}

// Concatenate forward/backward states row-wise into [T x 2H].
Tensor2 join_directions(const LstmSequence& f, const LstmSequence& b) {
  const std::size_t t_len = f.hidden.rows();
  const std::size_t h = f.hidden.cols();
  Tensor2 out(t_len, 2 * h);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::copy(f.hidden.row(t).begin(), f.hidden.row(t).end(), out.row(t).begin());
    std::copy(b.hidden.row(t).begin(), b.hidden.row(t).end(), out.row(t).begin() + h);
  }
  return out;
}

void split_directions(const Tensor2& joint, Tensor2& df, Tensor2& db) {
  const std::size_t h = joint.cols() / 2;
  df = Tensor2(joint.rows(), h);
  db = Tensor2(joint.rows(), h);
  for (std::size_t t = 0; t < joint.rows(); ++t) {
    const auto r = joint.row(t);
    std::copy(r.begin(), r.begin() + h, df.row(t).begin());
    std::copy(r.begin() + h, r.end(), db.row(t).begin());
  }
}

}  // namespace

DualEncoderModel::Trace DualEncoderModel::forward(const Note& note, bool with_logits) const {
  if (note.char_ids.empty()) throw EmptyInputError("note '" + note.source_id + "' has no characters");
  const std::size_t h = config_.hidden;
  Trace tr;

  tr.char_in = lookup_rows(note.char_ids, char_emb_, "character");
  tr.ctx_f = lstm_sequence_forward(tr.char_in, ctx_fwd_, false);
  tr.ctx_b = lstm_sequence_forward(tr.char_in, ctx_bwd_, true);
  const std::size_t t_len = note.char_ids.size();
  tr.h_c.assign(2 * h, 0.0);
  switch (config_.agg) {
    case AggMode::kMean: {
      const double inv = 1.0 / static_cast<double>(t_len);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t k = 0; k < h; ++k) {
          tr.h_c[k] += inv * tr.ctx_f.hidden(t, k);
          tr.h_c[h + k] += inv * tr.ctx_b.hidden(t, k);
        }
      }
      break;
    }
    case AggMode::kMax: {
      tr.max_pos.assign(2 * h, 0);
      for (std::size_t k = 0; k < 2 * h; ++k) {
        const LstmSequence& s = k < h ? tr.ctx_f : tr.ctx_b;
        const std::size_t kk = k < h ? k : k - h;
        double best = s.hidden(0, kk);
        for (std::size_t t = 1; t < t_len; ++t) {
          if (s.hidden(t, kk) > best) {
            best = s.hidden(t, kk);
            tr.max_pos[k] = t;
          }
        }
        tr.h_c[k] = best;
      }
      break;
    }
    case AggMode::kConcatEnds: {
      for (std::size_t k = 0; k < h; ++k) {
        tr.h_c[k] = tr.ctx_f.hidden(t_len - 1, k);
        tr.h_c[h + k] = tr.ctx_b.hidden(0, k);
      }
      break;
    }
  }
  tr.z_c = linear_forward(tr.h_c, align_c_);

  if (config_.use_entities) {
    const std::size_t m_len = note.entity_ids.size();
    tr.h_s.assign(2 * h, 0.0);
    if (m_len > 0) {
      tr.ent_in = lookup_rows(note.entity_ids, ent_emb_, "entity");
      tr.ent_f = lstm_sequence_forward(tr.ent_in, ent_fwd_, false);
      tr.ent_b = lstm_sequence_forward(tr.ent_in, ent_bwd_, true);
      tr.ent_states = join_directions(tr.ent_f, tr.ent_b);
      if (config_.use_attention) {
        tr.u.resize(m_len);
        for (std::size_t m = 0; m < m_len; ++m) tr.u[m] = guarded_cosine(tr.ent_states.row(m), tr.h_c);
        tr.a = softmax(tr.u);
      } else {
        tr.a.assign(m_len, 1.0 / static_cast<double>(m_len));
      }
      for (std::size_t m = 0; m < m_len; ++m) axpy(tr.a[m], tr.ent_states.row(m), tr.h_s);
    }
    tr.z_s = linear_forward(tr.h_s, align_s_);
  }

  tr.z = tr.z_c;
  tr.z.insert(tr.z.end(), tr.z_s.begin(), tr.z_s.end());
  if (with_logits) tr.logits = rows_forward(tr.z, classifier_);
  return tr;
}

void DualEncoderModel::backward(const Note& note, const Trace& tr, std::span<const double> d_logits,
                                std::span<const double> d_z_c, std::span<const double> d_z_s) {
  const std::size_t h = config_.hidden;
  const std::size_t cd = 2 * h;
  Vec dz(tr.z.size(), 0.0);
  if (!d_logits.empty()) rows_backward(tr.z, d_logits, classifier_, dz);

  Vec dzc(dz.begin(), dz.begin() + cd);
  if (!d_z_c.empty()) axpy(1.0, d_z_c, dzc);
  const bool need_enc = encoders_accumulate();
  Vec dh_c(cd, 0.0);
  linear_backward(tr.h_c, dzc, align_c_, nullptr, need_enc ? std::span<double>(dh_c) : std::span<double>());

  if (config_.use_entities) {
    Vec dzs(dz.begin() + cd, dz.end());
    if (!d_z_s.empty()) axpy(1.0, d_z_s, dzs);
    Vec dh_s(cd, 0.0);
    linear_backward(tr.h_s, dzs, align_s_, nullptr, need_enc ? std::span<double>(dh_s) : std::span<double>());

    const std::size_t m_len = note.entity_ids.size();
    if (need_enc && m_len > 0) {
      Tensor2 d_states(m_len, cd);
      Vec da(m_len);
      for (std::size_t m = 0; m < m_len; ++m) {
        axpy(tr.a[m], dh_s, d_states.row(m));
        da[m] = dot(tr.ent_states.row(m), dh_s);
      }
      if (config_.use_attention) {
        const double mean_da = dot(tr.a, da);
        const double norm_c = norm2(tr.h_c);
        for (std::size_t m = 0; m < m_len; ++m) {
          const double du = tr.a[m] * (da[m] - mean_da);
          const auto s = tr.ent_states.row(m);
          const double norm_s = norm2(s);
          if (norm_s < 1e-12 || norm_c < 1e-12) continue;
          const double inv = 1.0 / (norm_s * norm_c);
          const double u = tr.u[m];
          auto ds = d_states.row(m);
          for (std::size_t k = 0; k < cd; ++k) {
            ds[k] += du * (tr.h_c[k] * inv - u * s[k] / (norm_s * norm_s));
            dh_c[k] += du * (s[k] * inv - u * tr.h_c[k] / (norm_c * norm_c));
          }
        }
      }
      Tensor2 df, db;
      split_directions(d_states, df, db);
      Tensor2 d_in(m_len, config_.embed_dim);
      lstm_sequence_backward(tr.ent_f, tr.ent_in, df, ent_fwd_, d_in);
      lstm_sequence_backward(tr.ent_b, tr.ent_in, db, ent_bwd_, d_in);
      scatter_rows(note.entity_ids, d_in, ent_emb_);
    }
  }

  if (!need_enc) return;
  const std::size_t t_len = note.char_ids.size();
  Tensor2 df(t_len, h), db(t_len, h);
  switch (config_.agg) {
    case AggMode::kMean: {
      const double inv = 1.0 / static_cast<double>(t_len);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t k = 0; k < h; ++k) {
          df(t, k) = inv * dh_c[k];
          db(t, k) = inv * dh_c[h + k];
        }
      }
      break;
    }
    case AggMode::kMax:
      for (std::size_t k = 0; k < h; ++k) {
        df(tr.max_pos[k], k) += dh_c[k];
        db(tr.max_pos[h + k], k) += dh_c[h + k];
      }
      break;
    case AggMode::kConcatEnds:
      for (std::size_t k = 0; k < h; ++k) {
        df(t_len - 1, k) += dh_c[k];
        db(0, k) += dh_c[h + k];
      }
      break;
  }
  Tensor2 d_in(t_len, config_.embed_dim);
  lstm_sequence_backward(tr.ctx_f, tr.char_in, df, ctx_fwd_, d_in);
  lstm_sequence_backward(tr.ctx_b, tr.char_in, db, ctx_bwd_, d_in);
  scatter_rows(note.char_ids, d_in, char_emb_);
}

ContextEncoding DualEncoderModel::encode_context(const Note& note) const {
  if (note.char_ids.empty()) throw EmptyInputError("note '" + note.source_id + "' has no characters");
  Note context_only;
  context_only.char_ids = note.char_ids;
  // A note without entities skips the entity channel entirely.
  Trace tr = forward(context_only, false);
  return {std::move(tr.h_c), std::move(tr.z_c)};
}

EntityEncoding DualEncoderModel::encode_entities(const Note& note, std::span<const double> h_c) const {
  const std::size_t h = config_.hidden;
  if (h_c.size() != 2 * h) {
    throw DimensionError("context vector of length " + std::to_string(h_c.size()) +
                         " does not match channel width " + std::to_string(2 * h));
  }
  EntityEncoding out;
  out.h_s.assign(2 * h, 0.0);
  const std::size_t m_len = note.entity_ids.size();
  if (m_len > 0) {
    Tensor2 in = lookup_rows(note.entity_ids, ent_emb_, "entity");
    out.states = join_directions(lstm_sequence_forward(in, ent_fwd_, false),
                                 lstm_sequence_forward(in, ent_bwd_, true));
    if (config_.use_attention) {
      out.scores.resize(m_len);
      for (std::size_t m = 0; m < m_len; ++m) out.scores[m] = guarded_cosine(out.states.row(m), h_c);
      out.attention = softmax(out.scores);
    } else {
      out.attention.assign(m_len, 1.0 / static_cast<double>(m_len));
    }
    for (std::size_t m = 0; m < m_len; ++m) axpy(out.attention[m], out.states.row(m), out.h_s);
  }
  out.z_s = linear_forward(out.h_s, align_s_);
  return out;
}

Classification DualEncoderModel::classify(std::span<const double> z_c, std::span<const double> z_s) const {
  Vec z(z_c.begin(), z_c.end());
  z.insert(z.end(), z_s.begin(), z_s.end());
  if (z.size() != feature_dim()) {
    throw DimensionError("classifier input of width " + std::to_string(z.size()) +
                         " does not match feature width " + std::to_string(feature_dim()));
  }
  if (num_classes() == 0) throw DimensionError("classifier has no output rows yet");
  Classification c;
  c.logits = rows_forward(z, classifier_);
  c.probabilities = softmax(c.logits);
  return c;
}

Embedding DualEncoderModel::embed(const Note& note) const {
  Trace tr = forward(note, false);
  return {std::move(tr.z_c), std::move(tr.z_s)};
}

Label DualEncoderModel::predict(const Note& note) const {
  if (num_classes() == 0) throw DimensionError("classifier has no output rows yet");
  Trace tr = forward(note, true);
  return static_cast<Label>(std::max_element(tr.logits.begin(), tr.logits.end()) - tr.logits.begin());
}

double DualEncoderModel::accumulate_cross_entropy(const Note& note, double scale) {
  Trace tr = forward(note, true);
  CrossEntropy ce = softmax_cross_entropy(tr.logits, note.label);
  for (double& g : ce.grad_logits) g *= scale;
  backward(note, tr, ce.grad_logits, {}, {});
  return ce.loss;
}

DualEncoderModel::ConsolidationTerms DualEncoderModel::accumulate_consolidation(
    const Note& note, const Embedding& target, double alpha, double beta, double scale) {
  Trace tr = forward(note, false);
  if (target.z_c.size() != tr.z_c.size() || target.z_s.size() != tr.z_s.size()) {
    throw DimensionError("consolidation target does not match embedding widths");
  }
  ConsolidationTerms out;
  Vec dzc(tr.z_c.size()), dzs(tr.z_s.size());
  for (std::size_t k = 0; k < dzc.size(); ++k) {
    const double diff = tr.z_c[k] - target.z_c[k];
    out.omega_c += diff * diff;
    dzc[k] = scale * 2.0 * alpha * diff;
  }
  for (std::size_t k = 0; k < dzs.size(); ++k) {
    const double diff = tr.z_s[k] - target.z_s[k];
    out.omega_s += diff * diff;
    dzs[k] = scale * 2.0 * beta * diff;
  }
  backward(note, tr, {}, dzc, dzs);
  return out;
}

Tensor2 DualEncoderModel::aligned_entity_states(const Note& note) const {
  if (!config_.use_entities || note.entity_ids.empty()) return Tensor2(0, 2 * config_.hidden);
  Tensor2 in = lookup_rows(note.entity_ids, ent_emb_, "entity");
  Tensor2 states = join_directions(lstm_sequence_forward(in, ent_fwd_, false),
                                   lstm_sequence_forward(in, ent_bwd_, true));
  Tensor2 out(states.rows(), states.cols());
  for (std::size_t m = 0; m < states.rows(); ++m) {
    Vec z = linear_forward(states.row(m), align_s_);
    std::copy(z.begin(), z.end(), out.row(m).begin());
  }
  return out;
}

EncoderSnapshot::EncoderSnapshot(const DualEncoderModel& model) : model_(model.clone_encoders()) {}

}  // namespace lldx
