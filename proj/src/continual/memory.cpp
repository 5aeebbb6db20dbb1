// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/continual/memory.hpp"

#include <algorithm>
#include <string>

#include "lldx/error.hpp"

namespace lldx {

void EpisodicMemory::write(std::size_t task_id, std::span<const Note> train, RngStream& rng) {
  if (per_task_.count(task_id) != 0) {
    throw StageError("memory for task " + std::to_string(task_id) + " was already written");
  }
  const std::size_t keep = std::min(budget_, train.size());
  std::vector<std::size_t> picks = rng.sample_without_replacement(train.size(), keep);
  std::vector<Note> stored;
  stored.reserve(keep);
  for (std::size_t idx : picks) stored.push_back(train[idx]);
  per_task_.emplace(task_id, std::move(stored));
  reindex();
}

std::vector<const Note*> EpisodicMemory::sample(std::size_t size, RngStream& rng) const {
  std::vector<const Note*> out;
  if (flat_.empty() || size == 0) return out;
  const std::size_t k = std::min(size, flat_.size());
  out.reserve(k);
  for (std::size_t idx : rng.sample_without_replacement(flat_.size(), k)) out.push_back(flat_[idx]);
  return out;
}

std::size_t EpisodicMemory::task_size(std::size_t task_id) const {
  auto it = per_task_.find(task_id);
  return it == per_task_.end() ? 0 : it->second.size();
}

void EpisodicMemory::reindex() {
  flat_.clear();
  for (const auto& [id, notes] : per_task_) {
    for (const Note& n : notes) flat_.push_back(&n);
  }
}

}  // namespace lldx
