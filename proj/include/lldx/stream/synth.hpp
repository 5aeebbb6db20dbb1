// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lldx/numeric/rng.hpp"
#include "lldx/stream/task_stream.hpp"

namespace lldx {

struct SynthKeyword {
  std::string surface;
  double weight = 1.0;
};

struct SynthClass {
  std::string name;
  /// Class-typical entity mentions, drawn proportionally to weight.
  std::vector<SynthKeyword> keywords;
};

/// Declarative description of a synthetic clinical-note corpus. Every note
/// of a class mixes class keywords, class-independent context entities
/// (durations, severities, ...) and filler words shared by all classes.
struct SynthSpec {
  std::vector<LexiconEntry> lexicon;
  std::vector<SynthClass> classes;
  std::vector<std::string> context_entities;
  std::vector<std::string> filler_words;
  std::size_t notes_per_class = 200;
  std::size_t mentions_min = 2;
  std::size_t mentions_max = 3;
  std::size_t context_min = 1;
  std::size_t context_max = 2;
  std::size_t filler_min = 2;
  std::size_t filler_max = 3;
  /// Probability that a class-keyword mention is replaced by a filler word.
  double noise_rate = 0.15;
  std::size_t num_tasks = 10;
  double train_ratio = 0.8;
};

/// The stock corpus: 40 classes split into 10 tasks, 200 notes per class.
/// The lexicon is generated from a fixed internal seed, so the SynthSpec itself
/// never depends on the run seed.
SynthSpec default_synth_spec(std::size_t num_classes = 40, std::size_t notes_per_class = 200,
                             std::size_t num_tasks = 10);

/// Throws ConfigError on degenerate specs.
void validate_synth_spec(const SynthSpec& spec);

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::string& path);

LabeledCorpus generate_corpus(const SynthSpec& spec, RngStream rng);
TaskStream synthesize_stream(const SynthSpec& spec, RngStream rng);

}  // namespace lldx
