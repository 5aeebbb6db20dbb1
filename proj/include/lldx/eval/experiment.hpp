// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lldx/baselines/strategy.hpp"
#include "lldx/stream/task_stream.hpp"

namespace lldx {

struct ExperimentConfig {
  std::string strategy = "e2mc";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Stream file to train on; when empty a synthetic stream is generated per seed.
  std::string stream_path;
  /// Synthetic corpus description; when empty the stock spec is used.
  std::string synth_spec_path;
  std::size_t synth_classes = 40;
  std::size_t synth_notes_per_class = 200;
  std::size_t synth_tasks = 10;
  ModelConfig model;
  StrategyOptions options;
  /// Task-1 test notes (with two or more entities) sampled for the aggregation degree.
  std::size_t agg_notes = 100;
  bool checkpoints = true;
  bool embeddings = true;
  bool train_log = true;
  std::string out_dir;

  ExperimentConfig();
  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// Flat dotted-key JSON object, e.g. {"e2mc.alpha": 1.0, "model.hidden": 16}.
std::string config_to_json(const ExperimentConfig& config);
/// Applies every key of a flat JSON object on top of base. Unknown keys and
/// wrongly typed values throw ConfigError; malformed JSON throws ParseError.
ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& json_text);
/// Applies one key given as text, the form used by command-line overrides.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

struct StageReport {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t stage = 0;
  double acc_first = 0.0;
  double acc_avg = 0.0;
  std::vector<double> per_task_acc;
  std::optional<double> aggregation_degree;
  std::optional<double> omega_before;
  std::optional<double> omega_after;
  std::size_t memory_size = 0;
  double wall_time = 0.0;  // seconds, kept out of reports.csv

  bool operator==(const StageReport&) const = default;
};

/// Callbacks for tests and diagnostics; none are required.
struct RunHooks {
  std::vector<TrainingObserver*> observers;
  std::function<void(const StageReport&, const Strategy&, const DualEncoderModel&)> after_stage;
};

/// The stream a seed trains on: the configured file, or a synthetic stream.
TaskStream build_stream(const ExperimentConfig& config, std::uint64_t seed);

/// Trains one seed through every stage. With an output directory, writes
/// seed-<s>/{reports.csv, timings.csv, train_log.csv, checkpoints/, embeddings/},
/// flushing each stage's row as soon as it is known.
std::vector<StageReport> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                  const RunHooks& hooks = {});

/// Runs every seed in order, then writes the merged files.
std::vector<StageReport> run_experiment(const ExperimentConfig& config, const RunHooks& hooks = {});

/// Merges seed-<s>/reports.csv and timings.csv of the given seeds into
/// reports.csv, timings.csv and summary.csv in out_dir.
std::vector<StageReport> finalize_experiment(const std::string& out_dir,
                                             const std::vector<std::uint64_t>& seeds);

std::string format_reports_csv(const std::vector<StageReport>& reports);
std::vector<StageReport> read_reports_csv(const std::string& path);

struct SummaryRow {
  std::string strategy;
  std::size_t stage = 0;
  std::size_t seeds = 0;
  double acc_first_mean = 0.0;
  double acc_first_std = 0.0;
  double acc_avg_mean = 0.0;
  double acc_avg_std = 0.0;
  std::optional<double> aggregation_mean;
  std::optional<double> aggregation_std;

  bool operator==(const SummaryRow&) const = default;
};

/// Per strategy and stage mean and sample standard deviation across seeds.
std::vector<SummaryRow> summarize(const std::vector<StageReport>& reports);
std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

/// Stage-aligned table of acc_avg means, one column per strategy, with the
/// best strategy other than multitask flagged per stage.
struct CompareTable {
  std::vector<std::string> strategies;
  std::vector<std::size_t> stages;
  std::vector<std::vector<double>> acc_avg;  // [stage][strategy]
  std::vector<std::string> best;             // per stage
};

/// Throws ValidationError when the summaries disagree on stage counts and
/// EmptyInputError when nothing is given.
CompareTable compare_summaries(const std::vector<std::vector<SummaryRow>>& summaries);
std::string format_compare_csv(const CompareTable& table);

}  // namespace lldx
