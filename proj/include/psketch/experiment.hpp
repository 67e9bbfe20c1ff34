#pragma once

// Experiment specs, resumable training runs with metrics/checkpoint/summary
// output, and the mode pipelines behind the command-line driver.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "psketch/baselines.hpp"
#include "psketch/trainer.hpp"

namespace psketch {

enum class ExperimentMode {
  multitask,
  ablation_critic,
  ablation_curriculum,
  zero_shot,
  adaptation,
  baseline_joint,
  baseline_independent,
};

std::string_view experiment_mode_name(ExperimentMode m);
ExperimentMode parse_experiment_mode(std::string_view name);

struct TaskFilter {
  std::vector<std::string> names;  // empty: every registry task
  std::optional<std::size_t> max_len;
  std::optional<env::EnvKind> env;
  bool exclude_held_out = false;  // drop the tasks marked held out in the registry
};

TaskList apply_filter(const TaskFilter& filter);

struct ExperimentSpec {
  std::string name = "experiment";
  ExperimentMode mode = ExperimentMode::multitask;
  TrainerConfig trainer;
  TaskFilter filter;
  std::vector<std::string> heldout;   // excluded from training, evaluated zero-shot or by adaptation
  std::vector<std::string> variants;  // ablation arms; empty means all of them
  std::string checkpoint;             // pretrained modular checkpoint for zero_shot/adaptation
  std::size_t eval_episodes = 500;
  std::uint64_t adaptation_episodes = 100'000;
  std::size_t checkpoint_every = 50;  // train_steps between periodic checkpoints
  std::filesystem::path output_dir = "runs/experiment";

  /// Canonical JSON form; the spec hash is computed over its dump.
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  std::string hash() const;
};

ExperimentSpec load_spec(const std::filesystem::path& path);
/// Applies "a.b=value" overrides to a spec document. Values are parsed as
/// JSON when possible and taken as strings otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct Provenance {
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::string version;

  std::string comment_line() const;  // "# psketch ..." header for CSV files
  void put(Checkpoint& ckpt) const;
};

Provenance provenance_of(const ExperimentSpec& spec);

struct CurvePoint {
  std::uint64_t episodes = 0;
  double mean_estimate = 0.0;
};

/// Trapezoid area under mean reward estimate vs episodes, divided by the
/// final episode count (so a run that scores 1 throughout gets 1).
double curve_auc(const std::vector<CurvePoint>& curve);

struct RunResult {
  std::uint64_t episodes = 0;
  std::uint64_t train_steps = 0;
  std::optional<std::uint64_t> mastery_episodes;
  std::vector<std::pair<std::string, double>> final_estimates;
  std::vector<CurvePoint> curve;
  double seconds = 0.0;
};

struct RunOptions {
  std::filesystem::path dir;
  Provenance provenance;
  std::size_t checkpoint_every = 50;
  bool resume = false;
  std::function<void(const StepReport&)> on_step;
};

/// Drives a trainer to completion, writing metrics.csv, checkpoint.bin and
/// summary.json into options.dir. With resume set and a checkpoint present,
/// training continues from it and metrics rows written after that
/// checkpoint are discarded first, so the final files match an
/// uninterrupted run byte for byte.
RunResult run_training(Trainer& trainer, const RunOptions& options);

/// Hidden width recorded in a trainer checkpoint, or fallback for older files.
std::size_t checkpoint_hidden(const Checkpoint& c, std::size_t fallback);

std::unique_ptr<PolicyModel> make_model(std::string_view kind, const TaskList& tasks,
                                        const TrainerConfig& config);

/// Runs a whole experiment and returns its report rows (also written to
/// output_dir/report.csv).
std::vector<ReportRow> run_experiment(const ExperimentSpec& spec, bool resume,
                                      const std::function<void(const std::string&)>& log = {});

}  // namespace psketch
