// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/baselines/strategy.hpp"

#include <cmath>
#include <numeric>

#include "lldx/error.hpp"

namespace lldx {
namespace {

void check_stage(const TaskStream& stream, std::size_t stage) {
  if (stage == 0 || stage > stream.num_tasks()) {
    throw StageError("stage " + std::to_string(stage) + " outside 1.." +
                     std::to_string(stream.num_tasks()));
  }
}

void freeze_for_phase1(DualEncoderModel& model) {
  model.set_all_frozen(false);
  model.align_c().frozen = true;
  model.align_s().frozen = true;
}

void notify_before(const std::vector<TrainingObserver*>& obs, const DualEncoderModel& m) {
  for (TrainingObserver* o : obs) o->before_step(Phase::kPhase1, m);
}

void notify_after(const std::vector<TrainingObserver*>& obs, const StepEvent& e,
                  const DualEncoderModel& m) {
  for (TrainingObserver* o : obs) o->after_step(e, m);
}

/// Mean cross-entropy gradient of a batch into the non-frozen slots.
double accumulate_batch(DualEncoderModel& model, std::span<const Note* const> batch) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Note* n : batch) total += model.accumulate_cross_entropy(*n, scale);
  const double mean = total * scale;
  if (!std::isfinite(mean)) {
    for (ParamSlot* s : model.parameters()) s->zero_grad();
    throw DivergenceError("cross-entropy loss is not finite");
  }
  return mean;
}

/// Plain cross-entropy epochs over a note set, with an optional hook that
/// replaces the default update.
template <typename Step>
StageTraining run_epochs(DualEncoderModel& model, std::span<const Note* const> notes,
                         const E2mcConfig& cfg, std::size_t stage, RunStreams& streams,
                         const std::vector<TrainingObserver*>& observers, Step&& step) {
  StageTraining out;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t steps = 0;
    std::vector<std::size_t> order = streams.shuffle.permutation(notes.size());
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_train) {
      std::vector<const Note*> batch;
      for (std::size_t k = at; k < std::min(order.size(), at + cfg.batch_train); ++k) {
        batch.push_back(notes[order[k]]);
      }
      notify_before(observers, model);
      const double loss = step(batch);
      ++out.phase1_steps;
      notify_after(observers, {stage, epoch, out.phase1_steps, Phase::kPhase1, loss, 0.0, 0.0},
                   model);
      total += loss;
      ++steps;
    }
    out.mean_loss = total / static_cast<double>(std::max<std::size_t>(1, steps));
  }
  return out;
}

std::vector<const Note*> pointers(std::span<const Note> notes) {
  std::vector<const Note*> out;
  out.reserve(notes.size());
  for (const Note& n : notes) out.push_back(&n);
  return out;
}

class Finetune : public Strategy {
 public:
  explicit Finetune(const StrategyOptions& o) : cfg_(o.train) { cfg_.validate(); }
  std::string_view name() const override { return "finetune"; }
  StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream, std::size_t stage,
                            RunStreams& streams) override {
    check_stage(stream, stage);
    const auto notes = pointers(stream.tasks[stage - 1].train);
    StageTraining out = run_epochs(model, notes, cfg_, stage, streams, observers_,
                                   [&](std::span<const Note* const> b) {
                                     return phase1_step(model, b, cfg_.lr_phase1);
                                   });
    model.set_all_frozen(false);
    return out;
  }

 private:
  E2mcConfig cfg_;
};

class Multitask : public Strategy {
 public:
  explicit Multitask(const StrategyOptions& o) : cfg_(o.train) { cfg_.validate(); }
  std::string_view name() const override { return "multitask"; }
  StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream, std::size_t stage,
                            RunStreams& streams) override {
    check_stage(stream, stage);
    std::vector<const Note*> notes;
    for (std::size_t k = 0; k < stage; ++k) {
      for (const Note& n : stream.tasks[k].train) notes.push_back(&n);
    }
    StageTraining out = run_epochs(model, notes, cfg_, stage, streams, observers_,
                                   [&](std::span<const Note* const> b) {
                                     return phase1_step(model, b, cfg_.lr_phase1);
                                   });
    model.set_all_frozen(false);
    return out;
  }

 private:
  E2mcConfig cfg_;
};

class Ewc : public Strategy {
 public:
  explicit Ewc(const StrategyOptions& o)
      : cfg_(o.train), lambda_(o.ewc_lambda), samples_(o.ewc_samples) {
    cfg_.validate();
    if (!(lambda_ >= 0.0)) throw ConfigError("ewc lambda must be non-negative");
  }
  std::string_view name() const override { return "ewc"; }

  StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream, std::size_t stage,
                            RunStreams& streams) override {
    check_stage(stream, stage);
    const Task& task = stream.tasks[stage - 1];
    const auto notes = pointers(task.train);
    StageTraining out = run_epochs(model, notes, cfg_, stage, streams, observers_,
                                   [&](std::span<const Note* const> b) { return step(model, b); });
    update_fisher(model, task, streams.fisher);
    model.set_all_frozen(false);
    return out;
  }

 private:
  double step(DualEncoderModel& model, std::span<const Note* const> batch) {
    freeze_for_phase1(model);
    const double loss = accumulate_batch(model, batch);
    std::vector<ParamSlot*> params = model.parameters();
    for (ParamSlot* p : params) {
      if (!std::isfinite(std::accumulate(p->grad.flat().begin(), p->grad.flat().end(), 0.0))) {
        throw DivergenceError("gradient of " + p->name + " is not finite");
      }
    }
    if (anchor_.empty()) {
      sgd_step(params, cfg_.lr_phase1);
      return loss;
    }
    // Implicit step on the quadratic penalty: stable for any lambda * lr * F.
    const double lr = cfg_.lr_phase1;
    for (std::size_t s = 0; s < params.size(); ++s) {
      ParamSlot& p = *params[s];
      if (p.frozen) continue;
      auto v = p.value.flat();
      auto g = p.grad.flat();
      const auto f = fisher_[s].flat();
      const auto a = anchor_[s].flat();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i < a.size()) {
          const double k = lr * lambda_ * f[i];
          v[i] = (v[i] - lr * g[i] + k * a[i]) / (1.0 + k);
        } else {
          v[i] -= lr * g[i];
        }
      }
    }
    for (ParamSlot* p : params) p->zero_grad();
    return loss;
  }

  void update_fisher(DualEncoderModel& model, const Task& task, RngStream& rng) {
    freeze_for_phase1(model);
    std::vector<ParamSlot*> params = model.parameters();
    std::vector<Tensor2> fresh;
    for (ParamSlot* p : params) {
      p->zero_grad();
      fresh.emplace_back(p->rows(), p->cols());
    }
    const std::size_t n = std::min(samples_, task.train.size());
    for (std::size_t idx : rng.sample_without_replacement(task.train.size(), n)) {
      model.accumulate_cross_entropy(task.train[idx], 1.0);
      for (std::size_t s = 0; s < params.size(); ++s) {
        auto g = params[s]->grad.flat();
        auto f = fresh[s].flat();
        for (std::size_t i = 0; i < g.size(); ++i) f[i] += g[i] * g[i] / static_cast<double>(n);
        params[s]->zero_grad();
      }
    }
    for (std::size_t s = 0; s < params.size(); ++s) {
      if (s < fisher_.size()) {
        auto f = fresh[s].flat();
        const auto old = fisher_[s].flat();
        for (std::size_t i = 0; i < old.size(); ++i) f[i] += old[i];
      }
    }
    fisher_ = std::move(fresh);
    anchor_.clear();
    for (ParamSlot* p : params) anchor_.push_back(p->value);
  }

  E2mcConfig cfg_;
  double lambda_;
  std::size_t samples_;
  std::vector<Tensor2> fisher_;
  std::vector<Tensor2> anchor_;
};

class Agem : public Strategy {
 public:
  explicit Agem(const StrategyOptions& o)
      : cfg_(o.train), ref_batch_(o.agem_ref_batch), memory_(o.train.budget) {
    cfg_.validate();
    if (ref_batch_ == 0) throw ConfigError("agem reference batch must be at least 1");
  }
  std::string_view name() const override { return "agem"; }
  std::size_t memory_size() const override { return memory_.size(); }

  StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream, std::size_t stage,
                            RunStreams& streams) override {
    check_stage(stream, stage);
    const Task& task = stream.tasks[stage - 1];
    const auto notes = pointers(task.train);
    StageTraining out = run_epochs(model, notes, cfg_, stage, streams, observers_,
                                   [&](std::span<const Note* const> b) {
                                     return step(model, b, streams.replay);
                                   });
    if (cfg_.budget > 0) memory_.write(task.id, task.train, streams.memory);
    model.set_all_frozen(false);
    return out;
  }

 private:
  static Vec flatten_grads(std::span<ParamSlot* const> params) {
    Vec out;
    for (const ParamSlot* p : params) {
      out.insert(out.end(), p->grad.flat().begin(), p->grad.flat().end());
    }
    return out;
  }

  double step(DualEncoderModel& model, std::span<const Note* const> batch, RngStream& rng) {
    freeze_for_phase1(model);
    std::vector<ParamSlot*> params = model.parameters();
    const std::vector<const Note*> ref = memory_.sample(ref_batch_, rng);
    if (ref.empty()) return phase1_step(model, batch, cfg_.lr_phase1);
    accumulate_batch(model, ref);
    const Vec g_ref = flatten_grads(params);
    for (ParamSlot* p : params) p->zero_grad();
    const double loss = accumulate_batch(model, batch);
    const Vec g = agem_project(flatten_grads(params), g_ref);
    std::size_t at = 0;
    for (ParamSlot* p : params) {
      for (double& v : p->grad.flat()) v = g[at++];
    }
    sgd_step(params, cfg_.lr_phase1);
    return loss;
  }

  E2mcConfig cfg_;
  std::size_t ref_batch_;
  EpisodicMemory memory_;
};

class E2mc : public Strategy {
 public:
  E2mc(std::string name, const StrategyOptions& o, bool entities, bool attention)
      : name_(std::move(name)), entities_(entities), attention_(attention), trainer_(o.train) {}
  std::string_view name() const override { return name_; }
  ModelConfig model_config(ModelConfig base) const override {
    base.use_entities = base.use_entities && entities_;
    base.use_attention = base.use_attention && attention_;
    return base;
  }
  std::size_t memory_size() const override { return trainer_.memory().size(); }
  const E2mcTrainer* e2mc() const override { return &trainer_; }

  StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream, std::size_t stage,
                            RunStreams& streams) override {
    check_stage(stream, stage);
    if (!hooked_) {
      for (TrainingObserver* o : observers_) trainer_.add_observer(o);
      hooked_ = true;
    }
    return trainer_.train_task(model, stream.tasks[stage - 1], stage, streams);
  }

 private:
  std::string name_;
  bool entities_;
  bool attention_;
  bool hooked_ = false;
  E2mcTrainer trainer_;
};

}  // namespace

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{
      "finetune", "multitask", "ewc", "agem", "e2mc", "e2mc-no-entity", "e2mc-no-attention"};
  return names;
}

std::unique_ptr<Strategy> make_strategy(std::string_view name, const StrategyOptions& options) {
  if (name == "finetune") return std::make_unique<Finetune>(options);
  if (name == "multitask") return std::make_unique<Multitask>(options);
  if (name == "ewc") return std::make_unique<Ewc>(options);
  if (name == "agem") return std::make_unique<Agem>(options);
  if (name == "e2mc") return std::make_unique<E2mc>("e2mc", options, true, true);
  if (name == "e2mc-no-entity") return std::make_unique<E2mc>("e2mc-no-entity", options, false, true);
  if (name == "e2mc-no-attention") {
    return std::make_unique<E2mc>("e2mc-no-attention", options, true, false);
  }
  if (name == "gem" || name == "mbpa++") {
    throw NotImplementedError("strategy '" + std::string(name) +
                              "' is not implemented in this release");
  }
  std::string valid;
  for (const std::string& n : strategy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown strategy '" + std::string(name) + "'; valid strategies: " + valid);
}

double ewc_penalty(std::span<const ParamSlot* const> params, std::span<const Tensor2> fisher,
                   std::span<const Tensor2> anchor, double lambda) {
  if (fisher.size() != params.size() || anchor.size() != params.size()) {
    throw DimensionError("ewc penalty: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(fisher.size()) + " fisher and " +
                         std::to_string(anchor.size()) + " anchor tensors");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < params.size(); ++s) {
    const Tensor2& v = params[s]->value;
    if (anchor[s].cols() != v.cols() || anchor[s].rows() > v.rows() ||
        fisher[s].rows() != anchor[s].rows() || fisher[s].cols() != anchor[s].cols()) {
      throw DimensionError("ewc penalty: " + params[s]->name + " is " + v.shape_str() +
                           " but anchor is " + anchor[s].shape_str() + " and fisher is " +
                           fisher[s].shape_str());
    }
    const auto a = anchor[s].flat();
    const auto f = fisher[s].flat();
    const auto x = v.flat();
    for (std::size_t i = 0; i < a.size(); ++i) total += f[i] * (x[i] - a[i]) * (x[i] - a[i]);
  }
  return 0.5 * lambda * total;
}

Vec agem_project(std::span<const double> g, std::span<const double> g_ref) {
  if (g.size() != g_ref.size()) {
    throw DimensionError("agem: gradient length " + std::to_string(g.size()) +
                         " but reference length " + std::to_string(g_ref.size()));
  }
  Vec out(g.begin(), g.end());
  const double rr = dot(g_ref, g_ref);
  const double gr = dot(g, g_ref);
  if (rr == 0.0 || gr >= 0.0) return out;
  axpy(-gr / rr, g_ref, out);
  return out;
}

}  // namespace lldx
