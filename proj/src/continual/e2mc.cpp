// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/continual/e2mc.hpp"

#include <cmath>
#include <string>

#include "lldx/error.hpp"

namespace lldx {

std::string_view schedule_name(Phase2Schedule s) {
  switch (s) {
    case Phase2Schedule::kInterleaved: return "interleaved";
    case Phase2Schedule::kTaskEnd: return "task-end";
    case Phase2Schedule::kOff: return "off";
  }
  return "interleaved";
}

Phase2Schedule parse_schedule(std::string_view name) {
  if (name == "interleaved") return Phase2Schedule::kInterleaved;
  if (name == "task-end") return Phase2Schedule::kTaskEnd;
  if (name == "off") return Phase2Schedule::kOff;
  throw ConfigError("unknown phase-2 schedule '" + std::string(name) +
                    "' (expected interleaved, task-end or off)");
}

void E2mcConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(key) + " must be positive, got " + std::to_string(v));
    }
  };
  auto nonnegative = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(key) + " must be non-negative, got " + std::to_string(v));
    }
  };
  nonnegative(alpha, "alpha");
  nonnegative(beta, "beta");
  positive(lr_phase1, "lr_phase1");
  positive(lr_align_c, "lr_align_c");
  positive(lr_align_s, "lr_align_s");
  if (batch_train == 0) throw ConfigError("batch_train must be at least 1");
  if (batch_phase2 == 0) throw ConfigError("batch_phase2 must be at least 1");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
}

ConsolidationTerms consolidation_loss(const Note& note, const DualEncoderModel& model,
                                      const EncoderSnapshot* snapshot) {
  if (snapshot == nullptr) {
    throw StageError("consolidation needs the previous stage's snapshot (none before stage 2)");
  }
  const Embedding now = model.embed(note);
  const Embedding then = snapshot->embed(note);
  ConsolidationTerms t;
  t.omega_c = squared_distance(now.z_c, then.z_c);
  t.omega_s = now.z_s.empty() ? 0.0 : squared_distance(now.z_s, then.z_s);
  return t;
}

double consolidation_objective(std::span<const Note* const> batch, const DualEncoderModel& model,
                               const EncoderSnapshot& snapshot, double alpha, double beta) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const Note* n : batch) {
    ConsolidationTerms t = consolidation_loss(*n, model, &snapshot);
    total += alpha * t.omega_c + beta * t.omega_s;
  }
  return total / static_cast<double>(batch.size());
}

double phase1_step(DualEncoderModel& model, std::span<const Note* const> batch, double lr) {
  if (batch.empty()) throw EmptyInputError("phase-1 batch is empty");
  model.set_all_frozen(false);
  model.align_c().frozen = true;
  model.align_s().frozen = true;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Note* n : batch) total += model.accumulate_cross_entropy(*n, scale);
  const double mean = total * scale;
  if (!std::isfinite(mean)) {
    for (ParamSlot* s : model.parameters()) s->zero_grad();
    throw DivergenceError("phase-1 loss is not finite");
  }
  sgd_step(model.parameters(), lr);
  return mean;
}

ConsolidationTerms phase2_step(DualEncoderModel& model, std::span<const Note* const> batch,
                               const EncoderSnapshot* snapshot, double alpha, double beta,
                               double lr_c, double lr_s) {
  if (snapshot == nullptr) {
    throw StageError("phase 2 needs the previous stage's snapshot (none before stage 2)");
  }
  if (batch.empty()) throw EmptyInputError("phase-2 batch is empty");
  model.set_all_frozen(true);
  model.align_c().frozen = false;
  model.align_s().frozen = false;
  const double scale = 1.0 / static_cast<double>(batch.size());
  ConsolidationTerms mean;
  for (const Note* n : batch) {
    ConsolidationTerms t =
        model.accumulate_consolidation(*n, snapshot->embed(*n), alpha, beta, scale);
    mean.omega_c += t.omega_c * scale;
    mean.omega_s += t.omega_s * scale;
  }
  if (!std::isfinite(mean.omega_c) || !std::isfinite(mean.omega_s)) {
    model.align_c().zero_grad();
    model.align_s().zero_grad();
    throw DivergenceError("phase-2 consolidation loss is not finite");
  }
  ParamSlot* c[] = {&model.align_c()};
  ParamSlot* s[] = {&model.align_s()};
  sgd_step(c, lr_c);
  sgd_step(s, lr_s);
  return mean;
}

RunStreams::RunStreams(const RngStream& root)
    : init(root.split("init")),
      shuffle(root.split("shuffle")),
      replay(root.split("replay")),
      phase2(root.split("phase2")),
      memory(root.split("memory")),
      probe(root.split("probe")),
      fisher(root.split("fisher")),
      eval(root.split("eval")) {}

std::vector<std::vector<const Note*>> make_batches(std::span<const Note> notes, std::size_t batch,
                                                   RngStream& rng) {
  std::vector<std::size_t> order = rng.permutation(notes.size());
  std::vector<std::vector<const Note*>> out;
  for (std::size_t at = 0; at < order.size(); at += batch) {
    std::vector<const Note*> b;
    for (std::size_t k = at; k < std::min(order.size(), at + batch); ++k) b.push_back(&notes[order[k]]);
    out.push_back(std::move(b));
  }
  return out;
}

E2mcTrainer::E2mcTrainer(E2mcConfig config) : config_(config), memory_(config.budget) {
  config_.validate();
}

void E2mcTrainer::notify_before(Phase phase, const DualEncoderModel& model) {
  for (TrainingObserver* o : observers_) o->before_step(phase, model);
}

void E2mcTrainer::notify_after(const StepEvent& event, const DualEncoderModel& model) {
  for (TrainingObserver* o : observers_) o->after_step(event, model);
}

StageTraining E2mcTrainer::train_task(DualEncoderModel& model, const Task& task,
                                      std::size_t stage, RunStreams& streams) {
  if (model.num_classes() < task.label_end) {
    throw StageError("classifier has " + std::to_string(model.num_classes()) +
                     " rows but task " + std::to_string(task.id) + " needs " +
                     std::to_string(task.label_end));
  }
  for (const auto& [id, notes] : memory_.per_task()) {
    for (const Note& n : notes) {
      if (task.owns(n.label)) {
        throw ValidationError("task " + std::to_string(task.id) + " label " +
                              std::to_string(n.label) + " overlaps stored task " +
                              std::to_string(id) + "; label sets must be pairwise disjoint");
      }
    }
  }
  const bool consolidate = stage >= 2 && config_.schedule != Phase2Schedule::kOff;
  if (consolidate && !snapshot_) throw StageError("stage " + std::to_string(stage) + " has no snapshot");

  auto run_phase2 = [&](std::span<const Note* const> batch, StageTraining& out, std::size_t epoch) {
    notify_before(Phase::kPhase2, model);
    ConsolidationTerms t = phase2_step(model, batch, snapshot(), config_.alpha, config_.beta,
                                       config_.lr_align_c, config_.lr_align_s);
    ++out.phase2_steps;
    notify_after({stage, epoch, out.phase2_steps, Phase::kPhase2,
                  config_.alpha * t.omega_c + config_.beta * t.omega_s, t.omega_c, t.omega_s},
                 model);
  };

  StageTraining out;
  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::vector<const Note*>& batch : make_batches(task.train, config_.batch_train, streams.shuffle)) {
      if (config_.budget > 0 && config_.replay_batch > 0) {
        for (const Note* n : memory_.sample(config_.replay_batch, streams.replay)) batch.push_back(n);
      }
      notify_before(Phase::kPhase1, model);
      const double loss = phase1_step(model, batch, config_.lr_phase1);
      ++out.phase1_steps;
      notify_after({stage, epoch, out.phase1_steps, Phase::kPhase1, loss, 0.0, 0.0}, model);
      epoch_loss += loss;
      ++epoch_steps;

      if (consolidate && config_.schedule == Phase2Schedule::kInterleaved) {
        std::vector<const Note*> sub;
        for (std::size_t idx : streams.phase2.sample_without_replacement(
                 batch.size(), std::min(config_.batch_phase2, batch.size()))) {
          sub.push_back(batch[idx]);
        }
        run_phase2(sub, out, epoch);
      }
    }
    out.mean_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_steps));
  }

  if (consolidate && config_.schedule == Phase2Schedule::kTaskEnd) {
    std::vector<const Note*> pool;
    for (const Note& n : task.train) pool.push_back(&n);
    for (const Note* n : memory_.notes()) pool.push_back(n);
    streams.phase2.shuffle(std::span<const Note*>(pool));
    for (std::size_t at = 0; at < pool.size(); at += config_.batch_phase2) {
      std::span<const Note* const> batch(pool.data() + at,
                                         std::min(config_.batch_phase2, pool.size() - at));
      run_phase2(batch, out, config_.epochs);
    }
  }

  if (stage >= 2 && config_.probe_steps > 0) out.probe = probe(model, streams.probe);
  if (config_.budget > 0) memory_.write(task.id, task.train, streams.memory);
  snapshot_.emplace(model);
  model.set_all_frozen(false);
  return out;
}

std::optional<ConsolidationProbe> E2mcTrainer::probe(const DualEncoderModel& model,
                                                     RngStream& rng) const {
  if (!snapshot_ || memory_.empty()) return std::nullopt;
  const std::vector<const Note*> batch = memory_.sample(config_.batch_phase2, rng);
  ConsolidationProbe p;
  p.before = consolidation_objective(batch, model, *snapshot_, config_.alpha, config_.beta);
  DualEncoderModel copy = model;
  for (std::size_t k = 0; k < config_.probe_steps; ++k) {
    phase2_step(copy, batch, &*snapshot_, config_.alpha, config_.beta, config_.lr_align_c,
                config_.lr_align_s);
  }
  p.after = consolidation_objective(batch, copy, *snapshot_, config_.alpha, config_.beta);
  return p;
}

}  // namespace lldx
