// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include <functional>
#include <nlohmann/json.hpp>

#include "lldx/error.hpp"
#include "lldx/eval/experiment.hpp"

namespace lldx {
namespace {

using ojson = nlohmann::ordered_json;

enum class Kind { kString, kUint, kDouble, kBool, kSeeds };

struct Key {
  const char* name;
  Kind kind;
  std::function<ojson(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const ojson&)> set;
};

template <typename T>
Key field(const char* name, Kind kind, T ExperimentConfig::*member) {
  return {name, kind, [member](const ExperimentConfig& c) { return ojson(c.*member); },
          [member](ExperimentConfig& c, const ojson& v) { c.*member = v.get<T>(); }};
}

template <typename Get, typename Set>
Key accessor(const char* name, Kind kind, Get get, Set set) {
  return {name, kind, get, set};
}

#define LLDX_NESTED(NAME, KIND, PATH)                                                 \
  accessor(NAME, KIND, [](const ExperimentConfig& c) { return ojson(c.PATH); }, \
           [](ExperimentConfig& c, const ojson& v) { c.PATH = v.get<decltype(c.PATH)>(); })

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      field("strategy", Kind::kString, &ExperimentConfig::strategy),
      field("seeds", Kind::kSeeds, &ExperimentConfig::seeds),
      field("stream.path", Kind::kString, &ExperimentConfig::stream_path),
      field("synth.spec", Kind::kString, &ExperimentConfig::synth_spec_path),
      field("synth.classes", Kind::kUint, &ExperimentConfig::synth_classes),
      field("synth.notes_per_class", Kind::kUint, &ExperimentConfig::synth_notes_per_class),
      field("synth.tasks", Kind::kUint, &ExperimentConfig::synth_tasks),
      LLDX_NESTED("model.embed_dim", Kind::kUint, model.embed_dim),
      LLDX_NESTED("model.hidden", Kind::kUint, model.hidden),
      accessor("model.agg", Kind::kString,
               [](const ExperimentConfig& c) { return ojson(std::string(agg_mode_name(c.model.agg))); },
               [](ExperimentConfig& c, const ojson& v) {
                 c.model.agg = parse_agg_mode(v.get<std::string>());
               }),
      LLDX_NESTED("model.use_entities", Kind::kBool, model.use_entities),
      LLDX_NESTED("model.use_attention", Kind::kBool, model.use_attention),
      LLDX_NESTED("train.lr", Kind::kDouble, options.train.lr_phase1),
      LLDX_NESTED("train.epochs", Kind::kUint, options.train.epochs),
      LLDX_NESTED("train.batch", Kind::kUint, options.train.batch_train),
      LLDX_NESTED("train.replay_batch", Kind::kUint, options.train.replay_batch),
      LLDX_NESTED("train.budget", Kind::kUint, options.train.budget),
      LLDX_NESTED("e2mc.alpha", Kind::kDouble, options.train.alpha),
      LLDX_NESTED("e2mc.beta", Kind::kDouble, options.train.beta),
      LLDX_NESTED("e2mc.lr_align_c", Kind::kDouble, options.train.lr_align_c),
      LLDX_NESTED("e2mc.lr_align_s", Kind::kDouble, options.train.lr_align_s),
      LLDX_NESTED("e2mc.batch_phase2", Kind::kUint, options.train.batch_phase2),
      accessor("e2mc.schedule", Kind::kString,
               [](const ExperimentConfig& c) {
                 return ojson(std::string(schedule_name(c.options.train.schedule)));
               },
               [](ExperimentConfig& c, const ojson& v) {
                 c.options.train.schedule = parse_schedule(v.get<std::string>());
               }),
      LLDX_NESTED("e2mc.probe_steps", Kind::kUint, options.train.probe_steps),
      LLDX_NESTED("ewc.lambda", Kind::kDouble, options.ewc_lambda),
      LLDX_NESTED("ewc.samples", Kind::kUint, options.ewc_samples),
      LLDX_NESTED("agem.ref_batch", Kind::kUint, options.agem_ref_batch),
      field("eval.agg_notes", Kind::kUint, &ExperimentConfig::agg_notes),
      field("output.checkpoints", Kind::kBool, &ExperimentConfig::checkpoints),
      field("output.embeddings", Kind::kBool, &ExperimentConfig::embeddings),
      field("output.train_log", Kind::kBool, &ExperimentConfig::train_log),
  };
  return table;
}

#undef LLDX_NESTED

const Key& find_key(const std::string& name) {
  for (const Key& k : keys()) {
    if (name == k.name) return k;
  }
  std::string valid;
  for (const Key& k : keys()) valid += (valid.empty() ? "" : ", ") + std::string(k.name);
  throw ConfigError("unknown config key '" + name + "'; valid keys: " + valid);
}

bool kind_matches(Kind kind, const ojson& v) {
  switch (kind) {
    case Kind::kString: return v.is_string();
    case Kind::kUint: return v.is_number_unsigned();
    case Kind::kDouble: return v.is_number();
    case Kind::kBool: return v.is_boolean();
    case Kind::kSeeds:
      if (!v.is_array()) return false;
      for (const ojson& s : v) {
        if (!s.is_number_unsigned()) return false;
      }
      return true;
  }
  return false;
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kString: return "a string";
    case Kind::kUint: return "a non-negative integer";
    case Kind::kDouble: return "a number";
    case Kind::kBool: return "true or false";
    case Kind::kSeeds: return "an array of non-negative integers";
  }
  return "?";
}

void apply_value(ExperimentConfig& config, const std::string& name, const ojson& value) {
  const Key& k = find_key(name);
  if (!kind_matches(k.kind, value)) {
    throw ConfigError("config key '" + name + "' must be " + kind_name(k.kind) + ", got " +
                      value.dump());
  }
  k.set(config, value);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  model.embed_dim = 16;
  model.hidden = 16;
  model.agg = AggMode::kMax;
  options.train.lr_phase1 = 1.0;
  options.train.epochs = 5;
  options.train.lr_align_c = 0.01;
  options.train.lr_align_s = 0.01;
  options.train.schedule = Phase2Schedule::kTaskEnd;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) {
      if (seeds[i] == seeds[j]) throw ConfigError("seed " + std::to_string(seeds[i]) + " is repeated");
    }
  }
  if (model.embed_dim == 0 || model.hidden == 0) {
    throw ConfigError("model.embed_dim and model.hidden must be at least 1");
  }
  if (synth_tasks == 0) throw ConfigError("synth.tasks must be at least 1");
  options.train.validate();
  make_strategy(strategy, options);
}

std::string config_to_json(const ExperimentConfig& config) {
  ojson out = ojson::object();
  for (const Key& k : keys()) out[k.name] = k.get(config);
  out["out"] = config.out_dir;
  return out.dump(2);
}

ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object of dotted keys");
  for (const auto& [name, value] : doc.items()) {
    if (name == "out") {
      if (!value.is_string()) throw ConfigError("config key 'out' must be a string");
      base.out_dir = value.get<std::string>();
      continue;
    }
    apply_value(base, name, value);
  }
  return base;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "out") {
    config.out_dir = value;
    return;
  }
  const Key& k = find_key(key);
  if (k.kind == Kind::kString) {
    apply_value(config, key, ojson(value));
    return;
  }
  ojson parsed;
  try {
    parsed = ojson::parse(value);
  } catch (const ojson::parse_error&) {
    throw ConfigError("config key '" + key + "' must be " + kind_name(k.kind) + ", got '" +
                      value + "'");
  }
  apply_value(config, key, parsed);
}

}  // namespace lldx
