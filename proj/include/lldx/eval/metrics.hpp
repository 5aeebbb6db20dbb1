// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "lldx/model/model.hpp"

namespace lldx {

/// Fraction of test notes whose argmax over the full label space is correct.
/// Throws EmptyInputError on an empty test set.
double evaluate_task(const DualEncoderModel& model, std::span<const Note> test);

/// Mean cosine over all unordered row pairs; needs at least two rows.
double mean_pairwise_cosine(const Tensor2& rows);

/// Mean over notes with at least two entities of the mean pairwise cosine of
/// their aligned entity embeddings. Throws UndefinedMetricError when no note
/// qualifies.
double aggregation_degree(const DualEncoderModel& model, std::span<const Note* const> notes);

/// First two principal components of a point cloud.
struct Pca2 {
  Vec mean;            // D
  Tensor2 components;  // [2 x D], orthonormal rows (zero rows when D < 2)
  Tensor2 coords;      // [N x 2]
  Vec variances;       // 2
};

/// Principal components with a deterministic sign: the largest-magnitude
/// entry of every component is positive.
Pca2 pca2(const Tensor2& points);

/// Writes one row per entity occurrence: note id, entity surface, stage, the
/// aligned embedding and its 2-D PCA coordinates. Returns the row count.
std::size_t export_embeddings(const DualEncoderModel& model, std::span<const Note* const> notes,
                              const EntityLexicon& lexicon, std::size_t stage,
                              const std::string& path);

}  // namespace lldx
