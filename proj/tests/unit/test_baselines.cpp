// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "lldx/baselines/strategy.hpp"
#include "lldx/error.hpp"
#include "lldx/stream/synth.hpp"

using namespace lldx;

TEST_CASE("agem_project examples") {
  CHECK(agem_project(Vec{0.3, -0.2}, Vec{0.3, -0.2}) == Vec{0.3, -0.2});
  CHECK(agem_project(Vec{1, 0}, Vec{-1, 0}) == Vec{0, 0});
  Vec p = agem_project(Vec{1, 1}, Vec{-1, 0});
  CHECK(p == Vec{0, 1});
  CHECK(dot(p, Vec{-1, 0}) >= 0.0);
  CHECK(agem_project(Vec{1, -2}, Vec{0, 0}) == Vec{1, -2});
  CHECK_THROWS_AS(agem_project(Vec{1}, Vec{1, 2}), DimensionError);
}

TEST_CASE("agem_project properties over random pairs") {
  RngStream rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    Vec g(n), r(n);
    for (double& v : g) v = rng.uniform(-2, 2);
    for (double& v : r) v = rng.uniform(-2, 2);
    Vec p = agem_project(g, r);
    CHECK(dot(p, r) >= -1e-12);
    const Vec twice = agem_project(p, r);
    double gap = 0.0;
    for (std::size_t k = 0; k < n; ++k) gap = std::max(gap, std::fabs(twice[k] - p[k]));
    CHECK(gap <= 1e-12);
    if (dot(g, r) >= 0) CHECK(p == g);
  }
}

TEST_CASE("ewc_penalty examples") {
  ParamSlot theta("theta", Tensor2(1, 1, {5.0}));
  const ParamSlot* params[] = {&theta};
  std::vector<Tensor2> fisher{Tensor2(1, 1, {2.0})};
  std::vector<Tensor2> anchor{Tensor2(1, 1, {2.0})};
  CHECK(ewc_penalty(params, fisher, anchor, 1.0) == doctest::Approx(9.0));

  anchor[0] = theta.value;
  CHECK(ewc_penalty(params, fisher, anchor, 100.0) == 0.0);

  anchor[0] = Tensor2(1, 1, {-3.0});
  fisher[0] = Tensor2(1, 1, {0.0});
  CHECK(ewc_penalty(params, fisher, anchor, 100.0) == 0.0);

  std::vector<Tensor2> wrong{Tensor2(1, 2)};
  CHECK_THROWS_AS(ewc_penalty(params, wrong, wrong, 1.0), DimensionError);
}

TEST_CASE("ewc_penalty covers only the anchored classifier rows") {
  ParamSlot clf("classifier", Tensor2(3, 2, {1, 2, 3, 4, 50, 60}));
  const ParamSlot* params[] = {&clf};
  std::vector<Tensor2> fisher{Tensor2(2, 2, 1.0)};
  std::vector<Tensor2> anchor{Tensor2(2, 2, {1, 2, 3, 3})};
  CHECK(ewc_penalty(params, fisher, anchor, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("ewc_penalty is non-negative and vanishes only at the anchor") {
  RngStream rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    ParamSlot p("p", 3, 3);
    Tensor2 a(3, 3), f(3, 3);
    for (double& v : p.value.flat()) v = rng.uniform(-1, 1);
    for (double& v : a.flat()) v = rng.uniform(-1, 1);
    for (double& v : f.flat()) v = rng.uniform(0.01, 1);
    const ParamSlot* params[] = {&p};
    std::vector<Tensor2> fisher{f}, anchor{a};
    CHECK(ewc_penalty(params, fisher, anchor, 3.0) > 0.0);
    anchor[0] = p.value;
    CHECK(ewc_penalty(params, fisher, anchor, 3.0) == 0.0);
  }
}

TEST_CASE("strategy factory") {
  StrategyOptions o;
  for (const std::string& name : strategy_names()) CHECK(make_strategy(name, o)->name() == name);
  CHECK_THROWS_AS(make_strategy("gem", o), NotImplementedError);
  CHECK_THROWS_AS(make_strategy("mbpa++", o), NotImplementedError);
  try {
    make_strategy("sgd", o);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const std::string& name : strategy_names()) CHECK(msg.find(name) != std::string::npos);
  }
  ModelConfig base;
  CHECK_FALSE(make_strategy("e2mc-no-entity", o)->model_config(base).use_entities);
  CHECK_FALSE(make_strategy("e2mc-no-attention", o)->model_config(base).use_attention);
  CHECK(make_strategy("e2mc", o)->model_config(base) == base);
}

namespace {

struct Run {
  std::vector<std::vector<Tensor2>> params_per_stage;
  std::size_t steps = 0;
};

class StepCounter : public TrainingObserver {
 public:
  void after_step(const StepEvent& e, const DualEncoderModel&) override {
    if (e.phase == Phase::kPhase1) ++steps;
  }
  std::size_t steps = 0;
};

Run run_strategy(const std::string& name, const StrategyOptions& o, const TaskStream& s,
                 std::size_t stages) {
  auto strategy = make_strategy(name, o);
  StepCounter counter;
  strategy->add_observer(&counter);
  RunStreams streams(RngStream(4));
  ModelConfig c;
  c.char_vocab = s.char_vocab.size();
  c.entity_vocab = s.lexicon.size();
  c.embed_dim = 4;
  c.hidden = 4;
  DualEncoderModel m(strategy->model_config(c), streams.init);
  Run run;
  for (std::size_t k = 1; k <= stages; ++k) {
    m.expand_classifier(s.tasks[k - 1].num_labels(), streams.init);
    strategy->train_stage(m, s, k, streams);
    std::vector<Tensor2> values;
    for (ParamSlot* p : m.parameters()) values.push_back(p->value);
    run.params_per_stage.push_back(values);
  }
  run.steps = counter.steps;
  return run;
}

StrategyOptions quick_options() {
  StrategyOptions o;
  o.train.lr_phase1 = 0.5;
  o.train.epochs = 2;
  o.train.batch_train = 16;
  o.train.lr_align_c = 0.05;
  o.train.lr_align_s = 0.05;
  o.ewc_samples = 32;
  return o;
}

}  // namespace

TEST_CASE("e2mc without weights or memory follows the fine-tuning trajectory") {
  TaskStream s = synthesize_stream(default_synth_spec(8, 20, 4), RngStream(12));
  StrategyOptions o = quick_options();
  o.train.alpha = 0.0;
  o.train.beta = 0.0;
  o.train.budget = 0;
  Run a = run_strategy("finetune", o, s, 3);
  Run b = run_strategy("e2mc", o, s, 3);
  CHECK(a.params_per_stage == b.params_per_stage);
}

TEST_CASE("multitask matches finetune on the first stage and trains on the union") {
  TaskStream s = synthesize_stream(default_synth_spec(8, 20, 4), RngStream(13));
  StrategyOptions o = quick_options();
  Run ft = run_strategy("finetune", o, s, 1);
  Run mt = run_strategy("multitask", o, s, 1);
  CHECK(ft.params_per_stage == mt.params_per_stage);

  Run mt3 = run_strategy("multitask", o, s, 3);
  std::size_t expected = 0, seen = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    seen += s.tasks[k].train.size();
    expected += o.train.epochs * ((seen + o.train.batch_train - 1) / o.train.batch_train);
  }
  CHECK(mt3.steps == expected);
}

TEST_CASE("baselines run on a short stream") {
  TaskStream s = synthesize_stream(default_synth_spec(8, 20, 4), RngStream(14));
  StrategyOptions o = quick_options();
  o.train.budget = 8;
  for (const std::string& name : {"ewc", "agem", "e2mc-no-entity", "e2mc-no-attention"}) {
    CAPTURE(name);
    Run r = run_strategy(name, o, s, 3);
    for (const Tensor2& t : r.params_per_stage.back()) CHECK(t.all_finite());
  }
}

TEST_CASE("ewc with a large penalty stays finite") {
  TaskStream s = synthesize_stream(default_synth_spec(8, 20, 4), RngStream(15));
  StrategyOptions o = quick_options();
  o.ewc_lambda = 1e6;
  Run r = run_strategy("ewc", o, s, 3);
  for (const Tensor2& t : r.params_per_stage.back()) CHECK(t.all_finite());
  // Anchored parameters barely move under a huge penalty.
  const Tensor2& before = r.params_per_stage[1][0];
  const Tensor2& after = r.params_per_stage[2][0];
  double drift = 0.0;
  for (std::size_t i = 0; i < before.flat().size(); ++i) drift = std::max(drift, std::fabs(before.flat()[i] - after.flat()[i]));
  CHECK(drift < 0.5);
}
