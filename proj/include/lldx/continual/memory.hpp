// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <vector>

#include "lldx/numeric/rng.hpp"
#include "lldx/stream/task_stream.hpp"

namespace lldx {

/// Per-task stores of at most B training notes, kept as deep copies.
class EpisodicMemory {
 public:
  explicit EpisodicMemory(std::size_t budget = 128) : budget_(budget) {}

  std::size_t budget() const { return budget_; }
  /// Stores min(B, |train|) notes drawn uniformly without replacement.
  /// Throws StageError if the task was already written.
  void write(std::size_t task_id, std::span<const Note> train, RngStream& rng);

  /// Uniform sample without replacement across every stored note; returns
  /// min(size, total) notes and nothing when the memory is empty.
  std::vector<const Note*> sample(std::size_t size, RngStream& rng) const;

  /// |M| summed over all written tasks.
  std::size_t size() const { return flat_.size(); }
  bool empty() const { return flat_.empty(); }
  std::size_t task_size(std::size_t task_id) const;
  std::size_t num_tasks() const { return per_task_.size(); }
  const std::map<std::size_t, std::vector<Note>>& per_task() const { return per_task_; }
  const std::vector<const Note*>& notes() const { return flat_; }

 private:
  void reindex();

  std::size_t budget_;
  std::map<std::size_t, std::vector<Note>> per_task_;
  std::vector<const Note*> flat_;
};

}  // namespace lldx
