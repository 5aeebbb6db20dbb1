// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/stream/synth.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lldx/error.hpp"

namespace lldx {

namespace {

using json = nlohmann::ordered_json;

// Entity surfaces use these letters; filler words avoid the consonants so a
// filler can never contain an entity surface.
constexpr std::string_view kEntityConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::string_view kFillerConsonants = "chjwxy";

std::string make_word(RngStream& rng, std::string_view consonants, std::size_t syllables) {
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w.push_back(consonants[rng.below(consonants.size())]);
    w.push_back(kVowels[rng.below(kVowels.size())]);
  }
  return w;
}

std::vector<std::string> make_unique_words(RngStream& rng, std::string_view consonants,
                                           std::size_t syllables, std::size_t count,
                                           std::set<std::string>& used) {
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w = make_word(rng, consonants, syllables);
    if (used.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace

SynthSpec default_synth_spec(std::size_t num_classes, std::size_t notes_per_class,
                             std::size_t num_tasks) {
  RngStream rng(0x2021'0E2Cu);
  std::set<std::string> used;
  SynthSpec spec;
  spec.notes_per_class = notes_per_class;
  spec.num_tasks = num_tasks;

  constexpr std::size_t kOwnSymptoms = 3;
  const std::size_t shared_symptoms = std::max<std::size_t>(1, num_classes / 2);
  const std::size_t body_parts = std::max<std::size_t>(2, num_classes / 2);

  auto own = make_unique_words(rng, kEntityConsonants, 2, num_classes * kOwnSymptoms, used);
  auto shared = make_unique_words(rng, kEntityConsonants, 2, shared_symptoms, used);
  auto parts = make_unique_words(rng, kEntityConsonants, 2, body_parts, used);
  auto durations = make_unique_words(rng, kEntityConsonants, 2, 4, used);
  auto severities = make_unique_words(rng, kEntityConsonants, 2, 4, used);
  auto negations = make_unique_words(rng, kEntityConsonants, 2, 4, used);
  spec.filler_words = make_unique_words(rng, kFillerConsonants, 2, 24, used);

  for (const auto& w : own) spec.lexicon.push_back({w, "symptom"});
  for (const auto& w : shared) spec.lexicon.push_back({w, "symptom"});
  for (const auto& w : parts) spec.lexicon.push_back({w, "body_part"});
  for (const auto& w : durations) spec.lexicon.push_back({w, "duration"});
  for (const auto& w : severities) spec.lexicon.push_back({w, "severity"});
  for (const auto& w : negations) spec.lexicon.push_back({w, "negation"});
  for (const auto* pool : {&durations, &severities, &negations}) {
    spec.context_entities.insert(spec.context_entities.end(), pool->begin(), pool->end());
  }

  for (std::size_t c = 0; c < num_classes; ++c) {
    SynthClass cls;
    std::ostringstream name;
    name << "disease_" << (c < 10 ? "0" : "") << c;
    cls.name = name.str();
    for (std::size_t k = 0; k < kOwnSymptoms; ++k) {
      cls.keywords.push_back({own[c * kOwnSymptoms + k], 3.0});
    }
    // Each shared symptom and body part is used by two classes, typically in
    // different tasks, which couples tasks through the entity channel.
    cls.keywords.push_back({shared[c % shared_symptoms], 1.5});
    cls.keywords.push_back({parts[c % body_parts], 1.0});
    cls.keywords.push_back({parts[(c * 7 + 3) % body_parts], 1.0});
    spec.classes.push_back(std::move(cls));
  }
  return spec;
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.classes.size() < 2) {
    throw ConfigError("synthetic spec needs at least 2 classes, got " +
                      std::to_string(spec.classes.size()));
  }
  if (spec.notes_per_class == 0) throw ConfigError("notes_per_class must be positive");
  if (spec.mentions_min == 0 || spec.mentions_min > spec.mentions_max) {
    throw ConfigError("mention range must satisfy 1 <= min <= max");
  }
  if (spec.context_min > spec.context_max || spec.filler_min > spec.filler_max) {
    throw ConfigError("context and filler ranges must satisfy min <= max");
  }
  if (spec.context_max > 0 && spec.context_entities.empty()) {
    throw ConfigError("context entity mentions requested but none declared");
  }
  if ((spec.filler_max > 0 || spec.noise_rate > 0.0) && spec.filler_words.empty()) {
    throw ConfigError("filler words requested but none declared");
  }
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0)) {
    throw ConfigError("noise_rate must lie in [0, 1)");
  }
  if (spec.num_tasks == 0 || spec.classes.size() % spec.num_tasks != 0) {
    throw ConfigError(std::to_string(spec.classes.size()) +
                      " classes cannot be split evenly into " + std::to_string(spec.num_tasks) +
                      " tasks");
  }

  EntityLexicon lex;
  for (const auto& e : spec.lexicon) {
    try {
      lex.add(e.surface, e.type);
    } catch (const ValidationError& err) {
      throw ConfigError(std::string("synthetic lexicon: ") + err.what());
    }
  }
  std::set<std::string> names;
  for (const auto& c : spec.classes) {
    if (!names.insert(c.name).second) throw ConfigError("duplicate class name '" + c.name + "'");
    double total = 0.0;
    for (const auto& k : c.keywords) {
      if (lex.find(k.surface) < 0) {
        throw ConfigError("class '" + c.name + "' keyword '" + k.surface + "' not in lexicon");
      }
      if (!(k.weight >= 0.0)) throw ConfigError("negative keyword weight in '" + c.name + "'");
      total += k.weight;
    }
    if (c.keywords.empty() || !(total > 0.0)) {
      throw ConfigError("class '" + c.name + "' has no keywords");
    }
  }
  for (const auto& s : spec.context_entities) {
    if (lex.find(s) < 0) throw ConfigError("context entity '" + s + "' not in lexicon");
  }
  for (const auto& f : spec.filler_words) {
    if (f.empty() || f.find(' ') != std::string::npos) {
      throw ConfigError("filler words must be non-empty single tokens");
    }
    if (!lex.scan(f).empty()) {
      throw ConfigError("filler word '" + f + "' contains a lexicon surface");
    }
  }
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json j;
  j["format"] = "lldx-synth-spec";
  j["version"] = 1;
  j["notes_per_class"] = spec.notes_per_class;
  j["num_tasks"] = spec.num_tasks;
  j["train_ratio"] = spec.train_ratio;
  j["noise_rate"] = spec.noise_rate;
  j["mentions"] = {spec.mentions_min, spec.mentions_max};
  j["context"] = {spec.context_min, spec.context_max};
  j["filler"] = {spec.filler_min, spec.filler_max};
  j["lexicon"] = json::array();
  for (const auto& e : spec.lexicon) j["lexicon"].push_back({{"surface", e.surface}, {"type", e.type}});
  j["context_entities"] = spec.context_entities;
  j["filler_words"] = spec.filler_words;
  j["classes"] = json::array();
  for (const auto& c : spec.classes) {
    json kws = json::array();
    for (const auto& k : c.keywords) kws.push_back({{"surface", k.surface}, {"weight", k.weight}});
    j["classes"].push_back({{"name", c.name}, {"keywords", kws}});
  }
  return j.dump(2) + "\n";
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  SynthSpec spec;
  try {
    const json j = json::parse(json_text);
    auto range = [&](const char* key, std::size_t& lo, std::size_t& hi) {
      if (j.contains(key)) {
        lo = j.at(key).at(0).get<std::size_t>();
        hi = j.at(key).at(1).get<std::size_t>();
      }
    };
    spec.notes_per_class = j.value("notes_per_class", spec.notes_per_class);
    spec.num_tasks = j.value("num_tasks", spec.num_tasks);
    spec.train_ratio = j.value("train_ratio", spec.train_ratio);
    spec.noise_rate = j.value("noise_rate", spec.noise_rate);
    range("mentions", spec.mentions_min, spec.mentions_max);
    range("context", spec.context_min, spec.context_max);
    range("filler", spec.filler_min, spec.filler_max);
    for (const auto& e : j.at("lexicon")) {
      spec.lexicon.push_back({e.at("surface").get<std::string>(), e.value("type", "entity")});
    }
    if (j.contains("context_entities")) {
      spec.context_entities = j.at("context_entities").get<std::vector<std::string>>();
    }
    if (j.contains("filler_words")) {
      spec.filler_words = j.at("filler_words").get<std::vector<std::string>>();
    }
    for (const auto& c : j.at("classes")) {
      SynthClass cls;
      cls.name = c.at("name").get<std::string>();
      for (const auto& k : c.at("keywords")) {
        cls.keywords.push_back({k.at("surface").get<std::string>(), k.value("weight", 1.0)});
      }
      spec.classes.push_back(std::move(cls));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
  }
  validate_synth_spec(spec);
  return spec;
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open synthetic spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_spec(ss.str());
}

LabeledCorpus generate_corpus(const SynthSpec& spec, RngStream rng) {
  validate_synth_spec(spec);
  LabeledCorpus corpus;
  for (const auto& e : spec.lexicon) corpus.lexicon.add(e.surface, e.type);
  for (const auto& c : spec.classes) corpus.label_names.push_back(c.name);

  auto draw_count = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };

  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const SynthClass& cls = spec.classes[c];
    std::vector<double> weights;
    for (const auto& k : cls.keywords) weights.push_back(k.weight);
    for (std::size_t n = 0; n < spec.notes_per_class; ++n) {
      std::vector<std::string> tokens;
      const std::size_t mentions = draw_count(spec.mentions_min, spec.mentions_max);
      for (std::size_t m = 0; m < mentions; ++m) {
        // The noise draw is always consumed so that the token stream does
        // not depend on noise_rate beyond the replaced tokens.
        const bool noisy = rng.uniform() < spec.noise_rate;
        const std::size_t kw = rng.weighted(weights);
        if (noisy) {
          tokens.push_back(spec.filler_words[rng.below(spec.filler_words.size())]);
        } else {
          tokens.push_back(cls.keywords[kw].surface);
        }
      }
      const std::size_t ctx = draw_count(spec.context_min, spec.context_max);
      for (std::size_t m = 0; m < ctx; ++m) {
        tokens.push_back(spec.context_entities[rng.below(spec.context_entities.size())]);
      }
      const std::size_t fill = draw_count(spec.filler_min, spec.filler_max);
      for (std::size_t m = 0; m < fill; ++m) {
        tokens.push_back(spec.filler_words[rng.below(spec.filler_words.size())]);
      }
      rng.shuffle(std::span<std::string>(tokens));

      Note note;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t) note.text.push_back(' ');
        note.text += tokens[t];
      }
      note.entity_ids = extract_entities(note.text, corpus.lexicon);
      note.label = static_cast<Label>(c);
      note.source_id = "synth-" + cls.name + "-" + std::to_string(n);
      corpus.notes.push_back(std::move(note));
    }
  }
  return corpus;
}

TaskStream synthesize_stream(const SynthSpec& spec, RngStream rng) {
  LabeledCorpus corpus = generate_corpus(spec, rng.split("corpus"));
  SplitOptions opts;
  opts.num_tasks = spec.num_tasks;
  opts.train_ratio = spec.train_ratio;
  return split_tasks(corpus, opts, rng.split("split"));
}

}  // namespace lldx
