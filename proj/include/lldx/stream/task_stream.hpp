// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lldx/numeric/rng.hpp"
#include "lldx/stream/text.hpp"

namespace lldx {

using Label = std::uint32_t;

/// One labelled clinical note with both token channels.
struct Note {
  std::string source_id;
  std::string text;
  std::vector<TokenId> char_ids;
  std::vector<TokenId> entity_ids;
  Label label = 0;

  bool operator==(const Note&) const = default;
};

struct Task {
  std::size_t id = 0;
  /// Labels of this task form the contiguous range [label_begin, label_end).
  Label label_begin = 0;
  Label label_end = 0;
  std::vector<Note> train;
  std::vector<Note> test;

  std::size_t num_labels() const { return label_end - label_begin; }
  bool owns(Label l) const { return l >= label_begin && l < label_end; }
  bool operator==(const Task&) const = default;
};

/// Ordered tasks with pairwise-disjoint label sets. Labels are numbered so
/// that task k owns the range following task k-1's; the classifier row for
/// a label is the label itself.
struct TaskStream {
  std::vector<Task> tasks;
  std::vector<std::string> label_names;  // indexed by Label
  CharVocab char_vocab;
  EntityLexicon lexicon;

  std::size_t num_tasks() const { return tasks.size(); }
  std::size_t num_labels() const { return label_names.size(); }
  /// |Y_{:k}| for a 1-based stage k: labels of tasks 1..k.
  std::size_t accumulated_labels(std::size_t stage) const;

  /// Throws ValidationError when any stream invariant is broken.
  void validate() const;

  bool operator==(const TaskStream&) const = default;
};

/// A flat labelled corpus before task splitting. Notes carry text and entity
/// ids; char ids are filled in by split_tasks once the vocabulary exists.
struct LabeledCorpus {
  std::vector<std::string> label_names;
  std::vector<Note> notes;
  EntityLexicon lexicon;
};

struct SplitOptions {
  std::size_t num_tasks = 10;
  double train_ratio = 0.8;
};

/// Shuffles labels into equal disjoint groups, splits every class into
/// train/test, builds the character vocabulary from training text only, and
/// renumbers labels into task order.
TaskStream split_tasks(const LabeledCorpus& corpus, const SplitOptions& options, RngStream rng);

}  // namespace lldx
