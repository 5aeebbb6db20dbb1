// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "lldx/error.hpp"
#include "lldx/eval/experiment.hpp"
#include "lldx/model/gradcheck_suite.hpp"
#include "lldx/stream/stream_io.hpp"
#include "lldx/stream/synth.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lldx::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw lldx::Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_out(const std::string& leaf) {
  const char* root = std::getenv("LLDX_OUT_ROOT");
  return (fs::path(root && *root ? root : "runs") / leaf).string();
}

/// A manifest stores the resolved config under "config"; plain config files
/// are the flat object itself.
std::string config_text_from_file(const std::string& path) {
  const std::string text = read_file(path);
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw lldx::ParseError(path + " is not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.value("format", "") == "lldx-manifest") {
    if (!doc.contains("config")) throw lldx::ConfigError(path + ": manifest has no config");
    return doc["config"].dump();
  }
  return text;
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t classes = 40;
  std::size_t notes = 200;
  std::size_t tasks = 10;
  std::string write_spec;
};

int cmd_synth(const SynthArgs& a) {
  lldx::SynthSpec spec = a.spec.empty() ? lldx::default_synth_spec(a.classes, a.notes, a.tasks)
                                        : lldx::load_synth_spec(a.spec);
  lldx::validate_synth_spec(spec);
  if (!a.write_spec.empty()) {
    std::ofstream out(a.write_spec, std::ios::binary);
    if (!out) throw lldx::IoError("cannot write " + a.write_spec);
    out << lldx::synth_spec_to_json(spec);
  }
  const std::string out = a.out.empty() ? default_out("stream.jsonl") : a.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  lldx::TaskStream stream = lldx::synthesize_stream(spec, lldx::RngStream(a.seed).split("stream"));
  lldx::save_stream(stream, out);
  std::size_t notes = 0;
  for (const auto& t : stream.tasks) notes += t.train.size() + t.test.size();
  std::printf("wrote %s: %zu tasks, %zu labels, %zu notes\n", out.c_str(), stream.num_tasks(),
              stream.num_labels(), notes);
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string stream;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::vector<std::string> sets;
  std::optional<double> alpha, beta;
  std::optional<std::size_t> budget, epochs;
  std::size_t jobs = 1;
};

lldx::ExperimentConfig resolve_config(const TrainArgs& a) {
  lldx::ExperimentConfig cfg;
  if (!a.config.empty()) cfg = lldx::apply_config_json(cfg, config_text_from_file(a.config));
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lldx::ConfigError("--set expects key=value, got '" + kv + "'");
    lldx::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.stream.empty()) cfg.stream_path = a.stream;
  if (!a.strategy.empty()) cfg.strategy = a.strategy;
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (a.alpha) cfg.options.train.alpha = *a.alpha;
  if (a.beta) cfg.options.train.beta = *a.beta;
  if (a.budget) cfg.options.train.budget = *a.budget;
  if (a.epochs) cfg.options.train.epochs = *a.epochs;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.out_dir.empty()) cfg.out_dir = default_out(cfg.strategy);
  cfg.validate();
  return cfg;
}

ojson make_manifest(const lldx::ExperimentConfig& cfg, const std::string& config_path) {
  ojson m;
  m["format"] = "lldx-manifest";
  m["version"] = 1;
  m["tool_version"] = kVersion;
  m["command"] = "train";
  m["config"] = ojson::parse(lldx::config_to_json(cfg));
  m["seeds"] = cfg.seeds;
  ojson inputs = ojson::object();
  if (!cfg.stream_path.empty()) inputs[cfg.stream_path] = sha256_hex(read_file(cfg.stream_path));
  if (!cfg.synth_spec_path.empty()) inputs[cfg.synth_spec_path] = sha256_hex(read_file(cfg.synth_spec_path));
  if (!config_path.empty()) inputs[config_path] = sha256_hex(read_file(config_path));
  m["inputs"] = inputs;
  m["started_at"] = utc_now();
  m["finished_at"] = nullptr;
  return m;
}

void write_manifest(const ojson& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw lldx::IoError("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

int exit_code_for_current_exception();

/// Runs each seed in its own process, at most jobs at a time.
void run_seeds_forked(const lldx::ExperimentConfig& cfg, std::size_t jobs) {
  std::vector<pid_t> running;
  int worst = 0;
  auto reap = [&] {
    int status = 0;
    const pid_t pid = wait(&status);
    if (pid < 0) throw lldx::Error("wait failed");
    std::erase(running, pid);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitInternal;
    worst = std::max(worst, code);
  };
  for (std::uint64_t seed : cfg.seeds) {
    while (running.size() >= jobs) reap();
    std::cout.flush();
    const pid_t pid = fork();
    if (pid < 0) throw lldx::Error("fork failed");
    if (pid == 0) {
      int code = kExitOk;
      try {
        lldx::run_seed(cfg, seed);
      } catch (...) {
        code = exit_code_for_current_exception();
      }
      std::fflush(nullptr);
      _exit(code);
    }
    running.push_back(pid);
  }
  while (!running.empty()) reap();
  if (worst == kExitUser) throw lldx::UserError("a seed run failed; see messages above");
  if (worst != 0) throw lldx::Error("a seed run failed; see messages above");
}

int cmd_train(const TrainArgs& a) {
  const lldx::ExperimentConfig cfg = resolve_config(a);
  fs::create_directories(cfg.out_dir);
  const fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.json";
  ojson manifest = make_manifest(cfg, a.config);
  write_manifest(manifest, manifest_path);

  std::vector<lldx::StageReport> reports;
  if (a.jobs > 1 && cfg.seeds.size() > 1) {
    run_seeds_forked(cfg, a.jobs);
    reports = lldx::finalize_experiment(cfg.out_dir, cfg.seeds);
  } else {
    reports = lldx::run_experiment(cfg);
  }
  manifest["finished_at"] = utc_now();
  write_manifest(manifest, manifest_path);

  for (const lldx::SummaryRow& r : lldx::summarize(reports)) {
    std::printf("%s stage %2zu  acc_first %.4f +- %.4f  acc_avg %.4f +- %.4f\n", r.strategy.c_str(),
                r.stage, r.acc_first_mean, r.acc_first_std, r.acc_avg_mean, r.acc_avg_std);
  }
  std::printf("reports written to %s\n", cfg.out_dir.c_str());
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out) {
  if (dirs.empty()) throw lldx::EmptyInputError("compare needs at least one run directory");
  std::vector<std::vector<lldx::SummaryRow>> summaries;
  for (const std::string& d : dirs) {
    const fs::path p = fs::path(d) / "summary.csv";
    if (!fs::exists(p)) throw lldx::IoError(d + " has no summary.csv");
    summaries.push_back(lldx::read_summary_csv(p.string()));
  }
  const std::string table = lldx::format_compare_csv(lldx::compare_summaries(summaries));
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw lldx::IoError("cannot write " + out);
    f << table;
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::size_t seeds, bool fault) {
  lldx::GradcheckScope s;
  if (scope == "layer") {
    s = lldx::GradcheckScope::kLayer;
  } else if (scope == "model") {
    s = lldx::GradcheckScope::kModel;
  } else {
    throw lldx::ConfigError("scope must be layer or model, got '" + scope + "'");
  }
  if (std::getenv("LLDX_GRADCHECK_FAULT") != nullptr) fault = true;
  bool ok = true;
  for (std::uint64_t k = 0; k < seeds; ++k) {
    lldx::GradcheckOptions o;
    o.seed = seed + k;
    o.inject_fault = fault;
    for (const lldx::GradcheckCase& c : lldx::run_gradcheck_suite(s, o)) {
      const bool pass = c.report.passed();
      ok = ok && pass;
      std::printf("%s seed=%llu %-26s max_rel_error=%.3e\n", pass ? "PASS" : "FAIL",
                  static_cast<unsigned long long>(o.seed), c.name.c_str(), c.report.max_rel_error());
    }
  }
  return ok ? kExitOk : kExitUser;
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const lldx::UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual clinical-note classification with embedding consolidation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic task stream");
  s->add_option("--spec", synth.spec, "Synthetic corpus spec (JSON); default is the stock spec");
  s->add_option("--out", synth.out, "Stream file to write");
  s->add_option("--seed", synth.seed, "Generation seed");
  s->add_option("--classes", synth.classes, "Classes in the stock spec");
  s->add_option("--notes-per-class", synth.notes, "Notes per class in the stock spec");
  s->add_option("--tasks", synth.tasks, "Tasks in the stock spec");
  s->add_option("--write-spec", synth.write_spec, "Also write the resolved spec as JSON");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a strategy over the task stream");
  t->add_option("--config", train.config, "Flat dotted-key JSON config or a run manifest");
  t->add_option("--stream", train.stream, "Stream file; default synthesizes one per seed");
  t->add_option("--strategy", train.strategy, "finetune, multitask, ewc, agem, e2mc, e2mc-no-entity, e2mc-no-attention");
  t->add_option("--seed", train.seeds, "Seed; repeat for several");
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--set", train.sets, "Override one config key: key=value");
  t->add_option("--alpha", train.alpha, "Context consolidation weight");
  t->add_option("--beta", train.beta, "Entity consolidation weight");
  t->add_option("--budget", train.budget, "Memory notes per task");
  t->add_option("--epochs", train.epochs, "Epochs per task");
  t->add_option("--jobs", train.jobs, "Seeds run in parallel processes")->check(CLI::PositiveNumber);

  std::vector<std::string> dirs;
  std::string compare_out;
  auto* c = app.add_subcommand("compare", "Merge run summaries into one table");
  c->add_option("dirs", dirs, "Run directories");
  c->add_option("--out", compare_out, "Also write the table to this file");

  std::string scope = "layer";
  std::uint64_t gc_seed = 1;
  std::size_t gc_seeds = 1;
  bool fault = false;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  g->add_option("--scope", scope, "layer or model");
  g->add_option("--seed", gc_seed, "First seed");
  g->add_option("--seeds", gc_seeds, "Number of consecutive seeds");
  g->add_flag("--inject-fault", fault, "Corrupt one analytic gradient (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }
  try {
    if (*s) return cmd_synth(synth);
    if (*t) return cmd_train(train);
    if (*c) return cmd_compare(dirs, compare_out);
    if (*g) return cmd_gradcheck(scope, gc_seed, gc_seeds, fault);
  } catch (...) {
    return exit_code_for_current_exception();
  }
  return kExitInternal;
}
