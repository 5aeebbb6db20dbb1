// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/eval/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "lldx/continual/training_log.hpp"
#include "lldx/error.hpp"
#include "lldx/eval/csv.hpp"
#include "lldx/eval/metrics.hpp"
#include "lldx/model/checkpoint.hpp"
#include "lldx/stream/stream_io.hpp"
#include "lldx/stream/synth.hpp"

namespace lldx {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kReportHeader{
    "strategy",           "seed",         "stage",       "acc_first",  "acc_avg", "per_task_acc",
    "aggregation_degree", "omega_before", "omega_after", "memory_size"};
const std::vector<std::string> kTimingHeader{"strategy", "seed", "stage", "wall_time"};
const std::vector<std::string> kSummaryHeader{
    "strategy",     "stage",       "seeds",           "acc_first_mean", "acc_first_std",
    "acc_avg_mean", "acc_avg_std", "aggregation_mean", "aggregation_std"};

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> optional_value(const std::string& text, std::string_view field) {
  if (text.empty()) return std::nullopt;
  return parse_double(text, field);
}

std::string join(const std::vector<std::string>& fields, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

std::string report_row(const StageReport& r) {
  std::vector<std::string> accs;
  for (double a : r.per_task_acc) accs.push_back(format_double(a));
  return join({r.strategy, std::to_string(r.seed), std::to_string(r.stage),
               format_double(r.acc_first), format_double(r.acc_avg), join(accs, '|'),
               optional_text(r.aggregation_degree), optional_text(r.omega_before),
               optional_text(r.omega_after), std::to_string(r.memory_size)});
}

std::string timing_row(const StageReport& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r.wall_time);
  return join({r.strategy, std::to_string(r.seed), std::to_string(r.stage), buf});
}

std::uint64_t parse_uint(const std::string& text, std::string_view field) {
  const double v = parse_double(text, field);
  if (v < 0 || v != std::floor(v)) throw ParseError("field " + std::string(field) + " is not a count");
  return static_cast<std::uint64_t>(v);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path seed_dir(const std::string& out_dir, std::uint64_t seed) {
  return fs::path(out_dir) / ("seed-" + std::to_string(seed));
}

std::string stage_name(std::size_t stage) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "stage-%02zu", stage);
  return buf;
}

/// Task-1 test notes with at least two entities, in a seed-dependent order.
std::vector<const Note*> aggregation_sample(const TaskStream& stream, std::size_t limit,
                                            RngStream& rng) {
  std::vector<const Note*> pool;
  for (const Note& n : stream.tasks.front().test) {
    if (n.entity_ids.size() >= 2) pool.push_back(&n);
  }
  rng.shuffle(std::span<const Note*>(pool));
  if (pool.size() > limit) pool.resize(limit);
  return pool;
}

}  // namespace

TaskStream build_stream(const ExperimentConfig& config, std::uint64_t seed) {
  if (!config.stream_path.empty()) return load_stream(config.stream_path);
  SynthSpec spec = config.synth_spec_path.empty()
                       ? default_synth_spec(config.synth_classes, config.synth_notes_per_class,
                                            config.synth_tasks)
                       : load_synth_spec(config.synth_spec_path);
  return synthesize_stream(spec, RngStream(seed).split("stream"));
}

std::vector<StageReport> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                  const RunHooks& hooks) {
  config.validate();
  const TaskStream stream = build_stream(config, seed);
  stream.validate();
  std::unique_ptr<Strategy> strategy = make_strategy(config.strategy, config.options);

  RunStreams streams(RngStream(seed).split("run"));
  ModelConfig mc = config.model;
  mc.char_vocab = stream.char_vocab.size();
  mc.entity_vocab = stream.lexicon.size();
  mc = strategy->model_config(mc);
  DualEncoderModel model(mc, streams.init);
  const std::vector<const Note*> agg_sample = aggregation_sample(stream, config.agg_notes, streams.eval);

  const bool write = !config.out_dir.empty();
  const fs::path dir = write ? seed_dir(config.out_dir, seed) : fs::path();
  std::ofstream reports, timings;
  std::unique_ptr<TrainingLog> log;
  if (write) {
    fs::create_directories(dir);
    if (config.checkpoints) fs::create_directories(dir / "checkpoints");
    if (config.embeddings) fs::create_directories(dir / "embeddings");
    reports.open(dir / "reports.csv", std::ios::binary | std::ios::trunc);
    timings.open(dir / "timings.csv", std::ios::binary | std::ios::trunc);
    if (!reports || !timings) throw IoError("cannot write reports under " + dir.string());
    reports << join(kReportHeader) << '\n' << std::flush;
    timings << join(kTimingHeader) << '\n' << std::flush;
    if (config.train_log) {
      fs::remove(dir / "train_log.csv");
      log = std::make_unique<TrainingLog>((dir / "train_log.csv").string());
      strategy->add_observer(log.get());
    }
  }
  for (TrainingObserver* o : hooks.observers) strategy->add_observer(o);

  std::vector<StageReport> out;
  for (std::size_t stage = 1; stage <= stream.num_tasks(); ++stage) {
    const auto t0 = std::chrono::steady_clock::now();
    const Task& task = stream.tasks[stage - 1];
    model.expand_classifier(task.num_labels(), streams.init);
    StageTraining trained = strategy->train_stage(model, stream, stage, streams);

    StageReport r;
    r.strategy = std::string(strategy->name());
    r.seed = seed;
    r.stage = stage;
    for (std::size_t k = 0; k < stage; ++k) r.per_task_acc.push_back(evaluate_task(model, stream.tasks[k].test));
    r.acc_first = r.per_task_acc.front();
    double sum = 0.0;
    for (double a : r.per_task_acc) sum += a;
    r.acc_avg = sum / static_cast<double>(stage);
    if (mc.use_entities && !agg_sample.empty()) r.aggregation_degree = aggregation_degree(model, agg_sample);
    if (trained.probe) {
      r.omega_before = trained.probe->before;
      r.omega_after = trained.probe->after;
    }
    r.memory_size = strategy->memory_size();

    if (write) {
      if (config.checkpoints) {
        save_checkpoint(model, (dir / "checkpoints" / (stage_name(stage) + ".ckpt")).string());
      }
      if (config.embeddings && mc.use_entities) {
        export_embeddings(model, agg_sample, stream.lexicon, stage,
                          (dir / "embeddings" / (stage_name(stage) + ".csv")).string());
      }
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (write) {
      reports << report_row(r) << '\n' << std::flush;
      timings << timing_row(r) << '\n' << std::flush;
      if (!reports || !timings) throw IoError("failed writing reports under " + dir.string());
    }
    if (hooks.after_stage) hooks.after_stage(r, *strategy, model);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StageReport> run_experiment(const ExperimentConfig& config, const RunHooks& hooks) {
  config.validate();
  std::vector<StageReport> all;
  for (std::uint64_t seed : config.seeds) {
    std::vector<StageReport> part = run_seed(config, seed, hooks);
    all.insert(all.end(), part.begin(), part.end());
  }
  if (!config.out_dir.empty()) return finalize_experiment(config.out_dir, config.seeds);
  return all;
}

std::vector<StageReport> finalize_experiment(const std::string& out_dir,
                                             const std::vector<std::uint64_t>& seeds) {
  std::vector<StageReport> all;
  std::string timing_text = join(kTimingHeader) + "\n";
  for (std::uint64_t seed : seeds) {
    const fs::path dir = seed_dir(out_dir, seed);
    std::vector<StageReport> part = read_reports_csv((dir / "reports.csv").string());
    const auto timing_rows = read_csv((dir / "timings.csv").string(), kTimingHeader);
    if (timing_rows.size() != part.size()) {
      throw ValidationError(dir.string() + ": reports and timings disagree on the stage count");
    }
    for (std::size_t k = 0; k < part.size(); ++k) {
      part[k].wall_time = parse_double(timing_rows[k][3], "wall_time");
      timing_text += join(timing_rows[k]) + "\n";
    }
    all.insert(all.end(), part.begin(), part.end());
  }
  write_text(fs::path(out_dir) / "reports.csv", format_reports_csv(all));
  write_text(fs::path(out_dir) / "timings.csv", timing_text);
  write_text(fs::path(out_dir) / "summary.csv", format_summary_csv(summarize(all)));
  return all;
}

std::string format_reports_csv(const std::vector<StageReport>& reports) {
  std::string out = join(kReportHeader) + "\n";
  for (const StageReport& r : reports) out += report_row(r) + "\n";
  return out;
}

std::vector<StageReport> read_reports_csv(const std::string& path) {
  std::vector<StageReport> out;
  for (const auto& f : read_csv(path, kReportHeader)) {
    StageReport r;
    r.strategy = f[0];
    r.seed = parse_uint(f[1], "seed");
    r.stage = parse_uint(f[2], "stage");
    r.acc_first = parse_double(f[3], "acc_first");
    r.acc_avg = parse_double(f[4], "acc_avg");
    for (const std::string& a : split_fields(f[5], '|')) r.per_task_acc.push_back(parse_double(a, "per_task_acc"));
    r.aggregation_degree = optional_value(f[6], "aggregation_degree");
    r.omega_before = optional_value(f[7], "omega_before");
    r.omega_after = optional_value(f[8], "omega_after");
    r.memory_size = parse_uint(f[9], "memory_size");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<StageReport>& reports) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const StageReport*>> groups;
  std::vector<std::string> order;
  for (const StageReport& r : reports) {
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
    groups[{r.strategy, r.stage}].push_back(&r);
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  std::vector<SummaryRow> out;
  for (const std::string& name : order) {
    for (const auto& [key, group] : groups) {
      if (key.first != name) continue;
      SummaryRow row;
      row.strategy = name;
      row.stage = key.second;
      row.seeds = group.size();
      std::vector<double> first, avg, agg;
      for (const StageReport* r : group) {
        first.push_back(r->acc_first);
        avg.push_back(r->acc_avg);
        if (r->aggregation_degree) agg.push_back(*r->aggregation_degree);
      }
      std::tie(row.acc_first_mean, row.acc_first_std) = stats(first);
      std::tie(row.acc_avg_mean, row.acc_avg_std) = stats(avg);
      if (agg.size() == group.size()) {
        auto [m, s] = stats(agg);
        row.aggregation_mean = m;
        row.aggregation_std = s;
      }
      out.push_back(row);
    }
  }
  return out;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = join(kSummaryHeader) + "\n";
  for (const SummaryRow& r : rows) {
    out += join({r.strategy, std::to_string(r.stage), std::to_string(r.seeds),
                 format_double(r.acc_first_mean), format_double(r.acc_first_std),
                 format_double(r.acc_avg_mean), format_double(r.acc_avg_std),
                 optional_text(r.aggregation_mean), optional_text(r.aggregation_std)}) +
           "\n";
  }
  return out;
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::vector<SummaryRow> out;
  for (const auto& f : read_csv(path, kSummaryHeader)) {
    SummaryRow r;
    r.strategy = f[0];
    r.stage = parse_uint(f[1], "stage");
    r.seeds = parse_uint(f[2], "seeds");
    r.acc_first_mean = parse_double(f[3], "acc_first_mean");
    r.acc_first_std = parse_double(f[4], "acc_first_std");
    r.acc_avg_mean = parse_double(f[5], "acc_avg_mean");
    r.acc_avg_std = parse_double(f[6], "acc_avg_std");
    r.aggregation_mean = optional_value(f[7], "aggregation_mean");
    r.aggregation_std = optional_value(f[8], "aggregation_std");
    out.push_back(std::move(r));
  }
  return out;
}

CompareTable compare_summaries(const std::vector<std::vector<SummaryRow>>& summaries) {
  CompareTable t;
  std::map<std::string, std::map<std::size_t, double>> by_strategy;
  for (const auto& summary : summaries) {
    if (summary.empty()) throw EmptyInputError("a summary to compare has no rows");
    for (const SummaryRow& r : summary) {
      if (!by_strategy.count(r.strategy)) t.strategies.push_back(r.strategy);
      by_strategy[r.strategy][r.stage] = r.acc_avg_mean;
    }
  }
  if (t.strategies.empty()) throw EmptyInputError("nothing to compare");
  const auto& reference = by_strategy[t.strategies.front()];
  for (const std::string& s : t.strategies) {
    const auto& stages = by_strategy[s];
    bool same = stages.size() == reference.size();
    for (auto a = stages.begin(), b = reference.begin(); same && a != stages.end(); ++a, ++b) {
      same = a->first == b->first;
    }
    if (!same) {
      throw ValidationError("strategy " + s + " has " + std::to_string(stages.size()) +
                            " stages but " + t.strategies.front() + " has " +
                            std::to_string(reference.size()));
    }
  }
  for (const auto& [stage, unused] : reference) {
    t.stages.push_back(stage);
    std::vector<double> row;
    std::string best;
    double best_value = -1.0;
    for (const std::string& s : t.strategies) {
      const double v = by_strategy[s][stage];
      row.push_back(v);
      if (s != "multitask" && v > best_value) {
        best_value = v;
        best = s;
      }
    }
    t.acc_avg.push_back(std::move(row));
    t.best.push_back(best);
  }
  return t;
}

std::string format_compare_csv(const CompareTable& t) {
  std::string out = "stage";
  for (const std::string& s : t.strategies) out += "," + s;
  out += ",best\n";
  for (std::size_t i = 0; i < t.stages.size(); ++i) {
    out += std::to_string(t.stages[i]);
    for (double v : t.acc_avg[i]) out += "," + format_double(v);
    out += "," + t.best[i] + "\n";
  }
  return out;
}

}  // namespace lldx
