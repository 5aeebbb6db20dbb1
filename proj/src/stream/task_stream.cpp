// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/stream/task_stream.hpp"

#include <cmath>
#include <set>

#include "lldx/error.hpp"

namespace lldx {

std::size_t TaskStream::accumulated_labels(std::size_t stage) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < stage && k < tasks.size(); ++k) n += tasks[k].num_labels();
  return n;
}

void TaskStream::validate() const {
  Label expected_begin = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& t = tasks[k];
    if (t.id != k) {
      throw ValidationError("task at position " + std::to_string(k) + " has id " +
                            std::to_string(t.id));
    }
    if (t.label_end <= t.label_begin) {
      throw ValidationError("task " + std::to_string(k) + " has an empty label set");
    }
    if (t.label_begin != expected_begin) {
      throw ValidationError("label sets of task " + std::to_string(k) +
                            " and an earlier task overlap or leave a gap; "
                            "task label sets must be pairwise disjoint");
    }
    expected_begin = t.label_end;
    for (const auto* split : {&t.train, &t.test}) {
      for (const Note& n : *split) {
        if (!t.owns(n.label)) {
          throw ValidationError("note '" + n.source_id + "' has label " +
                                std::to_string(n.label) + " outside task " + std::to_string(k));
        }
        if (n.char_ids.empty()) {
          throw ValidationError("note '" + n.source_id + "' has no characters");
        }
        for (TokenId c : n.char_ids) {
          if (c >= char_vocab.size()) {
            throw ValidationError("note '" + n.source_id + "' has char id out of range");
          }
        }
        for (TokenId e : n.entity_ids) {
          if (e >= lexicon.size()) {
            throw ValidationError("note '" + n.source_id + "' has entity id out of range");
          }
        }
      }
    }
  }
  if (expected_begin != label_names.size()) {
    throw ValidationError("stream declares " + std::to_string(label_names.size()) +
                          " labels but tasks cover " + std::to_string(expected_begin));
  }
  std::set<std::string> names(label_names.begin(), label_names.end());
  if (names.size() != label_names.size()) throw ValidationError("duplicate label names");
}

TaskStream split_tasks(const LabeledCorpus& corpus, const SplitOptions& options, RngStream rng) {
  const std::size_t num_labels = corpus.label_names.size();
  if (options.num_tasks == 0 || num_labels == 0 || num_labels % options.num_tasks != 0) {
    throw ConfigError(std::to_string(num_labels) + " labels cannot be split evenly into " +
                      std::to_string(options.num_tasks) + " tasks");
  }
  if (!(options.train_ratio > 0.0 && options.train_ratio <= 1.0)) {
    throw ConfigError("train ratio must lie in (0, 1]");
  }

  std::vector<std::vector<const Note*>> by_label(num_labels);
  for (const Note& n : corpus.notes) {
    if (n.label >= num_labels) {
      throw ValidationError("note '" + n.source_id + "' has unknown label " +
                            std::to_string(n.label));
    }
    by_label[n.label].push_back(&n);
  }

  RngStream label_rng = rng.split("labels");
  RngStream note_rng = rng.split("notes");
  const std::vector<std::size_t> order = label_rng.permutation(num_labels);

  TaskStream stream;
  stream.lexicon = corpus.lexicon;
  const std::size_t per_task = num_labels / options.num_tasks;

  // Split each class in the new label order, then build the vocabulary from
  // training texts only.
  std::vector<std::vector<Note>> train_by_new(num_labels), test_by_new(num_labels);
  std::vector<std::string> train_texts;
  for (std::size_t new_label = 0; new_label < num_labels; ++new_label) {
    const std::size_t old_label = order[new_label];
    stream.label_names.push_back(corpus.label_names[old_label]);
    auto& notes = by_label[old_label];
    const auto perm = note_rng.permutation(notes.size());
    const auto n_train = static_cast<std::size_t>(
        std::llround(options.train_ratio * static_cast<double>(notes.size())));
    for (std::size_t i = 0; i < perm.size(); ++i) {
      Note copy = *notes[perm[i]];
      copy.label = static_cast<Label>(new_label);
      if (i < n_train) {
        train_texts.push_back(copy.text);
        train_by_new[new_label].push_back(std::move(copy));
      } else {
        test_by_new[new_label].push_back(std::move(copy));
      }
    }
  }
  stream.char_vocab = CharVocab::build(train_texts);

  for (std::size_t k = 0; k < options.num_tasks; ++k) {
    Task t;
    t.id = k;
    t.label_begin = static_cast<Label>(k * per_task);
    t.label_end = static_cast<Label>((k + 1) * per_task);
    for (Label l = t.label_begin; l < t.label_end; ++l) {
      for (auto& n : train_by_new[l]) t.train.push_back(std::move(n));
      for (auto& n : test_by_new[l]) t.test.push_back(std::move(n));
    }
    for (auto* split : {&t.train, &t.test}) {
      for (Note& n : *split) n.char_ids = tokenize_chars(n.text, stream.char_vocab);
    }
    stream.tasks.push_back(std::move(t));
  }
  stream.validate();
  return stream;
}

}  // namespace lldx
