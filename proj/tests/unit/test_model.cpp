// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lldx/error.hpp"
#include "lldx/model/checkpoint.hpp"
#include "lldx/model/model.hpp"
#include "lldx/numeric/gradcheck.hpp"

using namespace lldx;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.char_vocab = 7;
  c.entity_vocab = 6;
  c.embed_dim = 3;
  c.hidden = 3;
  return c;
}

Note make_note(std::vector<TokenId> chars, std::vector<TokenId> ents, Label label) {
  Note n;
  n.char_ids = std::move(chars);
  n.entity_ids = std::move(ents);
  n.label = label;
  return n;
}

DualEncoderModel make_model(const ModelConfig& cfg, std::uint64_t seed, std::size_t classes = 4) {
  RngStream rng(seed);
  DualEncoderModel m(cfg, rng);
  m.expand_classifier(classes, rng);
  return m;
}

void perturb(ParamSlot& s, RngStream& rng, double scale) {
  for (double& v : s.value.flat()) v += rng.uniform(-scale, scale);
}

double cross_entropy_of(const DualEncoderModel& m, const Note& n) {
  Embedding e = m.embed(n);
  return -std::log(m.classify(e.z_c, e.z_s).probabilities[n.label]);
}

void set_lstm(LstmWeights& w, std::vector<double> in, std::vector<double> rec,
              std::vector<double> bias) {
  w.input.value = Tensor2(1, 4, std::move(in));
  w.recurrent.value = Tensor2(1, 4, std::move(rec));
  w.bias.value = Tensor2(1, 4, std::move(bias));
}

}  // namespace

TEST_CASE("identity alignment passes encodings through") {
  auto m = make_model(small_config(), 1);
  Note n = make_note({1, 2, 3}, {0, 4}, 1);
  ContextEncoding ctx = m.encode_context(n);
  CHECK(ctx.z_c == ctx.h_c);
  EntityEncoding ent = m.encode_entities(n, ctx.h_c);
  CHECK(ent.z_s == ent.h_s);
  CHECK(ctx.h_c.size() == 6);
}

TEST_CASE("single step mean pooling equals the step state") {
  auto m = make_model(small_config(), 2);
  Note n = make_note({5}, {}, 0);
  ContextEncoding ctx = m.encode_context(n);
  ModelConfig cfg = small_config();
  cfg.agg = AggMode::kConcatEnds;
  RngStream rng(2);
  DualEncoderModel ends(cfg, rng);
  CHECK(ends.encode_context(n).h_c == ctx.h_c);
}

TEST_CASE("context pooling matches a scalar oracle on two steps") {
  for (AggMode mode : {AggMode::kMean, AggMode::kMax}) {
    ModelConfig cfg;
    cfg.char_vocab = 3;
    cfg.entity_vocab = 1;
    cfg.embed_dim = 1;
    cfg.hidden = 1;
    cfg.agg = mode;
    RngStream rng(0);
    DualEncoderModel m(cfg, rng);
    m.char_embedding().value = Tensor2(3, 1, {0.0, 0.6, -0.9});
    set_lstm(m.context_lstm(false), {0.5, -0.3, 0.8, 0.1}, {0.2, 0.4, -0.6, 0.9},
             {0.1, 1.0, -0.2, 0.05});
    set_lstm(m.context_lstm(true), {-0.4, 0.7, 0.3, -0.2}, {0.6, -0.1, 0.5, 0.3},
             {0.0, 1.0, 0.1, -0.1});
    Vec h_c = m.encode_context(make_note({1, 2}, {}, 0)).h_c;
    REQUIRE(h_c.size() == 2);
    // Frozen from an independent step-by-step scalar evaluation.
    if (mode == AggMode::kMean) {
      CHECK(h_c[0] == doctest::Approx(-0.0036964265120896234).epsilon(1e-13));
      CHECK(h_c[1] == doctest::Approx(-0.019576208216684696).epsilon(1e-13));
    } else {
      CHECK(h_c[0] == doctest::Approx(0.08542225606889998).epsilon(1e-13));
      CHECK(h_c[1] == doctest::Approx(0.012253358842917826).epsilon(1e-13));
    }
  }
}

TEST_CASE("empty character sequence is rejected") {
  auto m = make_model(small_config(), 3);
  CHECK_THROWS_AS(m.encode_context(make_note({}, {1}, 0)), EmptyInputError);
}

TEST_CASE("attention examples") {
  SUBCASE("hand cosine and softmax") {
    // u = (1, 0) so a = (e/(e+1), 1/(e+1)).
    Vec u{guarded_cosine(Vec{1, 0}, Vec{1, 0}), guarded_cosine(Vec{0, 1}, Vec{1, 0})};
    CHECK(u == Vec{1.0, 0.0});
    Vec a = softmax(u);
    CHECK(a[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.2689414213699951).epsilon(1e-15));
  }
  SUBCASE("single entity gets all the weight") {
    auto m = make_model(small_config(), 4);
    Note n = make_note({1, 2}, {3}, 0);
    auto ctx = m.encode_context(n);
    auto ent = m.encode_entities(n, ctx.h_c);
    REQUIRE(ent.attention.size() == 1);
    CHECK(ent.attention[0] == 1.0);
    for (std::size_t k = 0; k < ent.h_s.size(); ++k) CHECK(ent.h_s[k] == ent.states(0, k));
  }
  SUBCASE("duplicate entities get uniform weight") {
    auto m = make_model(small_config(), 5);
    Note n = make_note({1, 2}, {2, 2, 2}, 0);
    auto ent = m.encode_entities(n, m.encode_context(n).h_c);
    REQUIRE(ent.attention.size() == 3);
    // The BiLSTM sees position, so states differ; only uniform scores are tied.
    Vec u(3, 0.25);
    for (double a : softmax(u)) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("no entities gives a zero vector and empty attention") {
    auto m = make_model(small_config(), 6);
    Note n = make_note({1, 2}, {}, 0);
    auto ent = m.encode_entities(n, m.encode_context(n).h_c);
    CHECK(ent.attention.empty());
    CHECK(ent.h_s == Vec(6, 0.0));
    CHECK(ent.z_s == Vec(6, 0.0));
  }
  SUBCASE("zero norm cosine is zero") {
    CHECK(guarded_cosine(Vec{0, 0}, Vec{1, 2}) == 0.0);
    CHECK(guarded_cosine(Vec{1, 2}, Vec{0, 0}) == 0.0);
  }
}

TEST_CASE("attention weights are a distribution on random notes") {
  RngStream rng(31);
  auto m = make_model(small_config(), 7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenId> chars(1 + rng.below(6)), ents(1 + rng.below(5));
    for (auto& c : chars) c = static_cast<TokenId>(rng.below(7));
    for (auto& e : ents) e = static_cast<TokenId>(rng.below(6));
    Note n = make_note(chars, ents, 0);
    auto ent = m.encode_entities(n, m.encode_context(n).h_c);
    double total = 0.0;
    for (double a : ent.attention) {
      CHECK(a >= 0.0);
      total += a;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("cosine is scale invariant and attention is monotone in scores") {
  Vec h_c{0.3, -0.2, 0.9};
  Vec h_s{-0.5, 0.4, 0.1};
  const double base = guarded_cosine(h_s, h_c);
  for (double c : {0.5, 2.0, 10.0}) {
    Vec scaled = h_s;
    for (double& v : scaled) v *= c;
    CHECK(guarded_cosine(scaled, h_c) == doctest::Approx(base).epsilon(1e-14));
  }
  Vec u{0.1, -0.3, 0.4};
  double prev = softmax(u)[0];
  for (double step = 0.1; step < 1.0; step += 0.1) {
    u[0] = 0.1 + step;
    const double a0 = softmax(u)[0];
    CHECK(a0 > prev);
    prev = a0;
  }
}

TEST_CASE("classify examples") {
  SUBCASE("zero classifier gives uniform probabilities") {
    auto m = make_model(small_config(), 8, 5);
    m.classifier().value.fill(0.0);
    Note n = make_note({1, 2, 3}, {1}, 0);
    Embedding e = m.embed(n);
    for (double p : m.classify(e.z_c, e.z_s).probabilities) CHECK(p == doctest::Approx(0.2));
  }
  SUBCASE("probabilities sum to one") {
    auto m = make_model(small_config(), 9, 6);
    RngStream rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      Vec zc(6), zs(6);
      for (double& v : zc) v = rng.uniform(-3, 3);
      for (double& v : zs) v = rng.uniform(-3, 3);
      Vec p = m.classify(zc, zs).probabilities;
      CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    }
  }
  SUBCASE("two classes by hand") {
    ModelConfig cfg;
    cfg.char_vocab = 2;
    cfg.entity_vocab = 1;
    cfg.embed_dim = 1;
    cfg.hidden = 1;
    RngStream rng(0);
    DualEncoderModel m(cfg, rng);
    m.expand_classifier(2, rng);
    // Rows act on (z_c ; z_s) of width 4.
    m.classifier().value = Tensor2(2, 4, {1.0, 0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 0.5});
    auto out = m.classify(Vec{0.5, 1.0}, Vec{-0.25, 2.0});
    CHECK(out.logits[0] == doctest::Approx(0.0));
    CHECK(out.logits[1] == doctest::Approx(0.0));
    CHECK(out.probabilities[0] == doctest::Approx(0.5));
  }
  SUBCASE("width mismatch") {
    auto m = make_model(small_config(), 10);
    CHECK_THROWS_AS(m.classify(Vec(5, 0.0), Vec(6, 0.0)), DimensionError);
  }
}

TEST_CASE("expand_classifier keeps old rows") {
  auto m = make_model(small_config(), 11, 4);
  const Tensor2 before = m.classifier().value;
  Note n = make_note({1, 2, 3}, {1, 2}, 0);
  const Vec old_logits = [&] {
    Embedding e = m.embed(n);
    return m.classify(e.z_c, e.z_s).logits;
  }();
  RngStream other(999);
  m.expand_classifier(4, other);
  CHECK(m.num_classes() == 8);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < before.cols(); ++c) CHECK(m.classifier().value(r, c) == before(r, c));
  Embedding e = m.embed(n);
  Vec logits = m.classify(e.z_c, e.z_s).logits;
  for (std::size_t k = 0; k < 4; ++k) CHECK(logits[k] == old_logits[k]);

  RngStream rng(12);
  DualEncoderModel grow(small_config(), rng);
  for (int k = 0; k < 10; ++k) grow.expand_classifier(4, rng);
  CHECK(grow.num_classes() == 40);
}

TEST_CASE("snapshot is isolated from further training") {
  auto m = make_model(small_config(), 13);
  Note n = make_note({1, 4, 2}, {1, 3}, 2);
  EncoderSnapshot snap(m);
  const Embedding fresh = m.embed(n);
  CHECK(snap.embed(n).z_c == fresh.z_c);
  CHECK(snap.embed(n).z_s == fresh.z_s);
  auto params = m.parameters();
  for (int step = 0; step < 100; ++step) {
    m.accumulate_cross_entropy(n, 1.0);
    sgd_step(params, 0.05);
  }
  CHECK(m.embed(n).z_c != fresh.z_c);
  CHECK(snap.embed(n).z_c == fresh.z_c);
  CHECK(snap.embed(n).z_s == fresh.z_s);
  CHECK(snap.model().num_classes() == 0);
}

TEST_CASE("full model gradients match finite differences over 10 seeds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CAPTURE(seed);
    ModelConfig cfg = small_config();
    cfg.agg = seed % 3 == 0 ? AggMode::kMax : (seed % 3 == 1 ? AggMode::kMean : AggMode::kConcatEnds);
    auto m = make_model(cfg, seed);
    RngStream rng(seed + 100);
    perturb(m.align_c(), rng, 0.3);
    perturb(m.align_s(), rng, 0.3);
    Note n = make_note({1, 3, 5, 2}, {1, 4, 2}, static_cast<Label>(seed % 4));
    GradCheckTarget target;
    target.slots = m.parameters();
    target.loss = [&] { return cross_entropy_of(m, n); };
    target.backward = [&] { m.accumulate_cross_entropy(n, 1.0); };
    auto report = finite_diff_check(target, 1e-5, 1e-4);
    CHECK(report.passed());
    CHECK(report.max_rel_error() < 1e-4);
  }
}

TEST_CASE("model variants pass gradient checks") {
  for (int variant = 0; variant < 2; ++variant) {
    ModelConfig cfg = small_config();
    (variant == 0 ? cfg.use_entities : cfg.use_attention) = false;
    auto m = make_model(cfg, 40 + variant);
    Note n = make_note({2, 3, 1}, {2, 5}, 3);
    GradCheckTarget target;
    target.slots = m.parameters();
    target.loss = [&] { return cross_entropy_of(m, n); };
    target.backward = [&] { m.accumulate_cross_entropy(n, 1.0); };
    CHECK(finite_diff_check(target, 1e-5, 1e-4).passed());
  }
}

TEST_CASE("consolidation gradient matches finite differences") {
  auto m = make_model(small_config(), 50);
  RngStream rng(50);
  perturb(m.align_c(), rng, 0.3);
  perturb(m.align_s(), rng, 0.3);
  Note n = make_note({1, 3, 5}, {1, 4}, 0);
  Embedding target{Vec(6), Vec(6)};
  for (double& v : target.z_c) v = rng.uniform(-0.5, 0.5);
  for (double& v : target.z_s) v = rng.uniform(-0.5, 0.5);
  const double alpha = 0.7, beta = 1.3;
  m.set_all_frozen(true);
  m.align_c().frozen = m.align_s().frozen = false;
  GradCheckTarget t;
  t.slots = m.alignment_parameters();
  t.loss = [&] {
    Embedding e = m.embed(n);
    return alpha * squared_distance(e.z_c, target.z_c) + beta * squared_distance(e.z_s, target.z_s);
  };
  t.backward = [&] { m.accumulate_consolidation(n, target, alpha, beta, 1.0); };
  CHECK(finite_diff_check(t, 1e-5, 1e-6).passed());
}

TEST_CASE("checkpoint round trip is bit exact") {
  ModelConfig cfg = small_config();
  cfg.agg = AggMode::kMax;
  auto m = make_model(cfg, 60, 8);
  RngStream rng(60);
  perturb(m.align_c(), rng, 0.1);
  DualEncoderModel back = deserialize_checkpoint(serialize_checkpoint(m));
  CHECK(back.config() == m.config());
  CHECK(back.num_classes() == 8);
  auto a = m.parameters();
  auto b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k]->name == b[k]->name);
    CHECK(a[k]->value == b[k]->value);
  }
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(m));
  CHECK_THROWS_AS(deserialize_checkpoint("garbage"), ParseError);
}
