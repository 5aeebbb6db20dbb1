// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/model/gradcheck_suite.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include "lldx/model/model.hpp"
#include "lldx/numeric/lstm.hpp"

namespace lldx {
namespace {

void randomize(Tensor2& t, RngStream& rng, double scale) {
  for (double& v : t.flat()) v = rng.uniform(-scale, scale);
}

double weighted_sum(const Tensor2& a, const Tensor2& w) {
  return std::inner_product(a.flat().begin(), a.flat().end(), w.flat().begin(), 0.0);
}

class Suite {
 public:
  explicit Suite(const GradcheckOptions& o) : options_(o) {}

  void run(const std::string& name, GradCheckTarget target) {
    if (options_.inject_fault && !target.slots.empty()) {
      auto inner = target.backward;
      ParamSlot* victim = target.slots.front();
      target.backward = [inner, victim] {
        inner();
        victim->grad.flat()[0] += 1e-2 + 0.5 * std::fabs(victim->grad.flat()[0]);
      };
    }
    cases_.push_back({name, finite_diff_check(target, options_.epsilon, options_.tolerance)});
  }

  std::vector<GradcheckCase> take() { return std::move(cases_); }

 private:
  GradcheckOptions options_;
  std::vector<GradcheckCase> cases_;
};

Note random_note(RngStream& rng, std::size_t chars, std::size_t entities, std::size_t char_vocab,
                 std::size_t entity_vocab, std::size_t labels) {
  Note n;
  n.char_ids.resize(chars);
  n.entity_ids.resize(entities);
  for (auto& c : n.char_ids) c = static_cast<TokenId>(rng.below(char_vocab));
  for (auto& e : n.entity_ids) e = static_cast<TokenId>(rng.below(entity_vocab));
  n.label = static_cast<Label>(rng.below(labels));
  return n;
}

void layer_cases(Suite& suite, RngStream& rng) {
  {
    auto w = std::make_shared<ParamSlot>("linear.weight", 5, 4);
    auto b = std::make_shared<ParamSlot>("linear.bias", 1, 4);
    auto x = std::make_shared<ParamSlot>("linear.input", 1, 5);
    randomize(w->value, rng, 0.5);
    randomize(b->value, rng, 0.5);
    randomize(x->value, rng, 1.0);
    auto r = std::make_shared<Vec>(4);
    for (double& v : *r) v = rng.uniform(-1, 1);
    suite.run("linear", {{w.get(), b.get(), x.get()},
                         [=] {
                           Vec y = linear_forward(x->value.flat(), *w, b.get());
                           double s = 0.0;
                           for (std::size_t k = 0; k < y.size(); ++k) s += (*r)[k] * y[k] * y[k];
                           return s;
                         },
                         [=] {
                           Vec y = linear_forward(x->value.flat(), *w, b.get());
                           Vec dy(y.size());
                           for (std::size_t k = 0; k < y.size(); ++k) dy[k] = 2.0 * (*r)[k] * y[k];
                           linear_backward(x->value.flat(), dy, *w, b.get(), x->grad.flat());
                         }});
  }
  {
    auto w = std::make_shared<ParamSlot>("classifier", 6, 5);
    auto x = std::make_shared<ParamSlot>("features", 1, 5);
    randomize(w->value, rng, 0.5);
    randomize(x->value, rng, 1.0);
    const std::size_t label = rng.below(6);
    suite.run("classifier_cross_entropy",
              {{w.get(), x.get()},
               [=] { return softmax_cross_entropy(rows_forward(x->value.flat(), *w), label).loss; },
               [=] {
                 auto ce = softmax_cross_entropy(rows_forward(x->value.flat(), *w), label);
                 rows_backward(x->value.flat(), ce.grad_logits, *w, x->grad.flat());
               }});
  }
  {
    auto z = std::make_shared<ParamSlot>("logits", 1, 7);
    randomize(z->value, rng, 3.0);
    const std::size_t label = rng.below(7);
    suite.run("softmax_cross_entropy",
              {{z.get()},
               [=] { return softmax_cross_entropy(z->value.flat(), label).loss; },
               [=] {
                 auto ce = softmax_cross_entropy(z->value.flat(), label);
                 for (std::size_t k = 0; k < ce.grad_logits.size(); ++k) z->grad.flat()[k] += ce.grad_logits[k];
               }});
  }
  for (bool reverse : {false, true}) {
    auto w = std::make_shared<LstmWeights>("lstm", 3, 4);
    w->initialize(rng);
    randomize(w->bias.value, rng, 0.5);
    auto in = std::make_shared<ParamSlot>("lstm.inputs", 5, 3);
    randomize(in->value, rng, 1.0);
    auto proj = std::make_shared<Tensor2>(5, 4);
    randomize(*proj, rng, 1.0);
    std::vector<ParamSlot*> slots = w->slots();
    slots.push_back(in.get());
    suite.run(reverse ? "lstm_backward_direction" : "lstm_forward_direction",
              {slots,
               [=] { return weighted_sum(lstm_sequence_forward(in->value, *w, reverse).hidden, *proj); },
               [=] {
                 auto seq = lstm_sequence_forward(in->value, *w, reverse);
                 lstm_sequence_backward(seq, in->value, *proj, *w, in->grad);
               }});
  }
  {
    auto a = std::make_shared<ParamSlot>("align", 4, 4);
    a->value = Tensor2::identity(4);
    for (double& v : a->value.flat()) v += rng.uniform(-0.3, 0.3);
    auto h = std::make_shared<Vec>(4);
    auto t = std::make_shared<Vec>(4);
    for (double& v : *h) v = rng.uniform(-1, 1);
    for (double& v : *t) v = rng.uniform(-1, 1);
    suite.run("alignment_consolidation",
              {{a.get()},
               [=] { return squared_distance(linear_forward(*h, *a), *t); },
               [=] {
                 Vec z = linear_forward(*h, *a);
                 Vec dz(z.size());
                 for (std::size_t k = 0; k < z.size(); ++k) dz[k] = 2.0 * (z[k] - (*t)[k]);
                 linear_backward(*h, dz, *a, nullptr, {});
               }});
  }
}

void model_cases(Suite& suite, RngStream& rng) {
  struct Variant {
    const char* name;
    AggMode agg;
    bool entities;
    bool attention;
  };
  const Variant variants[] = {{"model_mean", AggMode::kMean, true, true},
                              {"model_max", AggMode::kMax, true, true},
                              {"model_concat_ends", AggMode::kConcatEnds, true, true},
                              {"model_no_entity", AggMode::kMean, false, true},
                              {"model_no_attention", AggMode::kMean, true, false}};
  for (const Variant& v : variants) {
    ModelConfig cfg;
    cfg.char_vocab = 8;
    cfg.entity_vocab = 6;
    cfg.embed_dim = 3;
    cfg.hidden = 3;
    cfg.agg = v.agg;
    cfg.use_entities = v.entities;
    cfg.use_attention = v.attention;
    auto m = std::make_shared<DualEncoderModel>(cfg, rng);
    m->expand_classifier(4, rng);
    for (double& x : m->align_c().value.flat()) x += rng.uniform(-0.3, 0.3);
    for (double& x : m->align_s().value.flat()) x += rng.uniform(-0.3, 0.3);
    auto note = std::make_shared<Note>(random_note(rng, 5, 3, 8, 6, 4));
    suite.run(v.name, {m->parameters(),
                       [=] {
                         Embedding e = m->embed(*note);
                         return -std::log(m->classify(e.z_c, e.z_s).probabilities[note->label]);
                       },
                       [=] { m->accumulate_cross_entropy(*note, 1.0); }});
  }
  {
    ModelConfig cfg;
    cfg.char_vocab = 8;
    cfg.entity_vocab = 6;
    cfg.embed_dim = 3;
    cfg.hidden = 3;
    auto m = std::make_shared<DualEncoderModel>(cfg, rng);
    for (double& x : m->align_c().value.flat()) x += rng.uniform(-0.3, 0.3);
    for (double& x : m->align_s().value.flat()) x += rng.uniform(-0.3, 0.3);
    auto note = std::make_shared<Note>(random_note(rng, 4, 3, 8, 6, 1));
    auto target = std::make_shared<Embedding>();
    target->z_c.resize(6);
    target->z_s.resize(6);
    for (double& x : target->z_c) x = rng.uniform(-0.5, 0.5);
    for (double& x : target->z_s) x = rng.uniform(-0.5, 0.5);
    const double alpha = rng.uniform(0.5, 1.5), beta = rng.uniform(0.5, 1.5);
    suite.run("model_consolidation",
              {m->parameters(),
               [=] {
                 Embedding e = m->embed(*note);
                 return alpha * squared_distance(e.z_c, target->z_c) +
                        beta * squared_distance(e.z_s, target->z_s);
               },
               [=] { m->accumulate_consolidation(*note, *target, alpha, beta, 1.0); }});
  }
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(GradcheckScope scope, const GradcheckOptions& options) {
  Suite suite(options);
  RngStream rng = RngStream(options.seed).split(scope == GradcheckScope::kLayer ? "layer" : "model");
  if (scope == GradcheckScope::kLayer) {
    layer_cases(suite, rng);
  } else {
    model_cases(suite, rng);
  }
  return suite.take();
}

}  // namespace lldx
