#pragma once

// Comparison models trained with the same actor-critic machinery, plus the
// zero-shot and adaptation protocols for held-out tasks.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "psketch/trainer.hpp"

namespace psketch {

struct LearnerNet {
  nn::DenseNet net;
  nn::RmsPropState optimizer;

  static LearnerNet random(nn::DenseShape shape, std::mt19937_64& rng, double step_size);
  bool operator==(const LearnerNet&) const = default;
};

/// A separate network over the low-level actions for every task; no
/// parameters are shared and there is no STOP.
class IndependentModel : public PolicyModel {
 public:
  IndependentModel(const TaskList& tasks, std::mt19937_64& rng, std::size_t hidden = nn::kDefaultHidden,
                   double step_size = 0.001);

  std::string_view kind() const override { return "independent"; }
  Rollout rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                  double gamma) const override;
  void update(const Dataset& data, std::span<const double> advantages,
              std::size_t batch_size) override;
  void save(Checkpoint& ckpt) const override;
  void load(const Checkpoint& ckpt) override;

  const LearnerNet& net_for(std::size_t task_id) const;

 private:
  std::vector<std::optional<LearnerNet>> nets_;  // indexed by registry task id
};

inline constexpr std::size_t kSketchPositions = 5;

/// Bag of symbol counts followed by one-hot symbols for the first
/// kSketchPositions sketch positions.
std::vector<double> sketch_encoding(const env::Task& task);
std::size_t sketch_encoding_dim();

/// One network per environment kind whose input is the environment
/// features concatenated with the sketch encoding.
class JointModel : public PolicyModel {
 public:
  JointModel(std::mt19937_64& rng, std::size_t hidden = nn::kDefaultHidden, double step_size = 0.001);

  std::string_view kind() const override { return "joint"; }
  Rollout rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                  double gamma) const override;
  void update(const Dataset& data, std::span<const double> advantages,
              std::size_t batch_size) override;
  void save(Checkpoint& ckpt) const override;
  void load(const Checkpoint& ckpt) override;

  std::vector<double> policy_input(const env::Task& task, std::span<const double> features) const;
  const LearnerNet& net_for(env::EnvKind kind) const { return nets_[static_cast<std::size_t>(kind)]; }

 private:
  std::vector<LearnerNet> nets_;  // craft, maze
};

/// Picks the next symbol at a decision point, or nullopt to end the episode.
class MetaController {
 public:
  virtual ~MetaController() = default;
  virtual std::optional<std::size_t> choose(std::span<const double> features, std::size_t decision,
                                            std::mt19937_64& rng) = 0;
};

/// Runs an episode in which `meta` chooses among the symbols of the task's
/// environment; each chosen frozen subpolicy acts until it emits STOP, the
/// task ends, option_cap low-level steps pass, or the step cap is reached.
/// One transition is logged per decision with the reward accumulated over
/// the option. Subpolicy actions use the same random stream as run_episode,
/// so replaying a task's sketch reproduces run_episode exactly.
Rollout run_meta_episode(const PolicyFamily& family, MetaController& meta, const env::Task& task,
                         std::uint64_t seed, int step_cap, double gamma, std::size_t max_decisions,
                         int option_cap);

/// High-level learner over frozen subpolicies for adaptation to a task
/// without a sketch.
class MetaModel : public PolicyModel {
 public:
  MetaModel(std::shared_ptr<const PolicyFamily> family, env::EnvKind kind, std::mt19937_64& rng,
            std::size_t hidden = nn::kDefaultHidden, double step_size = 0.001,
            std::size_t max_decisions = 10, int option_cap = 100);

  std::string_view kind() const override { return "meta"; }
  Rollout rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                  double gamma) const override;
  void update(const Dataset& data, std::span<const double> advantages,
              std::size_t batch_size) override;
  void save(Checkpoint& ckpt) const override;
  void load(const Checkpoint& ckpt) override;

  const PolicyFamily& family() const { return *family_; }
  const LearnerNet& net() const { return net_; }
  const std::vector<env::SymbolId>& choices() const { return choices_; }

 private:
  std::shared_ptr<const PolicyFamily> family_;
  env::EnvKind env_kind_;
  std::vector<env::SymbolId> choices_;
  LearnerNet net_;
  std::size_t max_decisions_;
  int option_cap_;
};

/// Executes a held-out sketch with frozen subpolicies. Throws ConfigError
/// when the sketch uses a symbol that none of the training tasks contain.
double zero_shot_eval(const PolicyFamily& family, const env::Task& heldout,
                      const TaskList& training_tasks, std::size_t episodes, std::uint64_t seed_base,
                      int step_cap = 100);

struct ReportRow {
  std::string model;
  std::string condition;  // multitask, zero_shot or adaptation
  std::string task;
  double completion_rate = 0.0;
  std::uint64_t episodes = 0;
};

std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace psketch
