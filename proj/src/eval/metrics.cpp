// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/eval/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "lldx/error.hpp"
#include "lldx/eval/csv.hpp"

namespace lldx {

double evaluate_task(const DualEncoderModel& model, std::span<const Note> test) {
  if (test.empty()) throw EmptyInputError("cannot evaluate on an empty test set");
  std::size_t correct = 0;
  for (const Note& n : test) correct += model.predict(n) == n.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double mean_pairwise_cosine(const Tensor2& rows) {
  if (rows.rows() < 2) {
    throw UndefinedMetricError("pairwise cosine needs two rows, got " + std::to_string(rows.rows()));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (std::size_t j = i + 1; j < rows.rows(); ++j) {
      total += guarded_cosine(rows.row(i), rows.row(j));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double aggregation_degree(const DualEncoderModel& model, std::span<const Note* const> notes) {
  double total = 0.0;
  std::size_t used = 0;
  for (const Note* n : notes) {
    if (n->entity_ids.size() < 2) continue;
    total += mean_pairwise_cosine(model.aligned_entity_states(*n));
    ++used;
  }
  if (used == 0) {
    throw UndefinedMetricError("aggregation degree is undefined: no note has two or more entities");
  }
  return total / static_cast<double>(used);
}

Pca2 pca2(const Tensor2& points) {
  const std::size_t n = points.rows(), d = points.cols();
  if (n == 0) throw EmptyInputError("pca needs at least one point");
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = points(i, j);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  Pca2 out;
  out.mean.assign(mu.data(), mu.data() + d);
  out.components = Tensor2(2, d);
  out.coords = Tensor2(n, 2);
  out.variances.assign(2, 0.0);
  for (std::size_t c = 0; c < std::min<std::size_t>(2, d); ++c) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const Eigen::VectorXd proj = x * v;
    for (std::size_t j = 0; j < d; ++j) out.components(c, j) = v(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i) out.coords(i, c) = proj(static_cast<Eigen::Index>(i));
    out.variances[c] = std::max(0.0, eig.eigenvalues()(col));
  }
  return out;
}

std::size_t export_embeddings(const DualEncoderModel& model, std::span<const Note* const> notes,
                              const EntityLexicon& lexicon, std::size_t stage,
                              const std::string& path) {
  std::vector<std::string> ids, surfaces;
  std::vector<Vec> vectors;
  for (const Note* n : notes) {
    const Tensor2 rows = model.aligned_entity_states(*n);
    for (std::size_t m = 0; m < rows.rows(); ++m) {
      ids.push_back(n->source_id);
      surfaces.push_back(lexicon.entry(n->entity_ids[m]).surface);
      vectors.emplace_back(rows.row(m).begin(), rows.row(m).end());
    }
  }
  const std::size_t dim = model.channel_dim();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings to " + path);
  out << "note_id,entity,stage";
  for (std::size_t j = 0; j < dim; ++j) out << ",v" << j;
  out << ",pc1,pc2\n";
  if (vectors.empty()) return 0;
  Tensor2 points(vectors.size(), dim);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) points(i, j) = vectors[i][j];
  const Pca2 pca = pca2(points);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out << ids[i] << ',' << surfaces[i] << ',' << stage;
    for (double v : vectors[i]) out << ',' << format_double(v);
    out << ',' << format_double(pca.coords(i, 0)) << ',' << format_double(pca.coords(i, 1)) << '\n';
  }
  if (!out) throw IoError("failed writing embeddings to " + path);
  return vectors.size();
}

}  // namespace lldx
