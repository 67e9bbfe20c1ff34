#pragma once

// Batched decoupled actor-critic training with a length- and
// reward-weighted task curriculum.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psketch/checkpoint.hpp"
#include "psketch/critic.hpp"
#include "psketch/env/task.hpp"
#include "psketch/nn.hpp"
#include "psketch/policy.hpp"

namespace psketch {

enum class CurriculumMode { length_and_weight, length_only, weight_only, uniform };

std::string_view curriculum_mode_name(CurriculumMode m);
CurriculumMode parse_curriculum_mode(std::string_view name);
bool uses_length_gate(CurriculumMode m);
bool uses_reward_weights(CurriculumMode m);

struct TrainerConfig {
  std::size_t batch_size = 2000;  // transitions per update
  double gamma = 0.9;
  double r_good = 0.8;
  double policy_step = 0.001;
  double critic_step = 0.01;
  int step_cap = 100;
  CurriculumMode curriculum_mode = CurriculumMode::length_and_weight;
  CriticVariant critic_variant = CriticVariant::state_and_task;
  std::uint64_t max_episodes = 3'000'000;
  std::uint64_t seed = 0;
  std::size_t hidden = nn::kDefaultHidden;
  double estimate_decay = 0.99;  // per-episode EMA decay of the reward estimates
  bool stop_at_mastery = true;   // false keeps training at the top level until max_episodes
  std::size_t workers = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

using TaskList = std::vector<const env::Task*>;

struct CurriculumState {
  std::size_t l_max = 1;
  std::vector<double> reward_estimates;       // indexed by registry task id
  std::vector<std::uint64_t> episode_counts;  // indexed by registry task id
  bool fresh_level = true;  // the first batch after l_max changes samples Unif(T')

  static CurriculumState initial();
  bool operator==(const CurriculumState&) const = default;
};

/// T': the tasks eligible for sampling under the current length limit.
TaskList active_tasks(const CurriculumState& cur, const TaskList& tasks, CurriculumMode mode);

/// Sampling probabilities aligned with `tasks`.
std::vector<double> curriculum_distribution(const CurriculumState& cur, const TaskList& tasks,
                                            CurriculumMode mode);

void update_reward_estimates(CurriculumState& cur, std::span<const Rollout> rollouts,
                             double decay = 0.99);

/// min over T' of the reward estimates (+inf for an empty set).
double min_reward_estimate(const CurriculumState& cur, const TaskList& active);

struct Dataset {
  std::vector<Rollout> rollouts;
  std::size_t transitions = 0;
};

/// Anything the batched actor-critic can train: produces rollouts and
/// consumes advantage-weighted datasets.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;
  virtual std::string_view kind() const = 0;
  virtual Rollout rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                          double gamma) const = 0;
  /// One ascent step from advantages[k] (aligned with the dataset's
  /// transitions in order), normalised by batch_size.
  virtual void update(const Dataset& data, std::span<const double> advantages,
                      std::size_t batch_size) = 0;
  virtual void save(Checkpoint& ckpt) const = 0;
  virtual void load(const Checkpoint& ckpt) = 0;
};

class ModularModel : public PolicyModel {
 public:
  explicit ModularModel(PolicyFamily family) : family_(std::move(family)) {}

  std::string_view kind() const override { return "modular"; }
  Rollout rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                  double gamma) const override;
  void update(const Dataset& data, std::span<const double> advantages,
              std::size_t batch_size) override;
  void save(Checkpoint& ckpt) const override;
  void load(const Checkpoint& ckpt) override;

  const PolicyFamily& family() const { return family_; }
  PolicyFamily& family() { return family_; }

 private:
  PolicyFamily family_;
};

/// Per-subpolicy sum over the dataset of (1/batch_size) * (q - c) * grad log pi,
/// before clipping.
std::map<env::SymbolId, nn::GradientBundle> policy_gradients(const PolicyFamily& family,
                                                             const Dataset& data,
                                                             std::span<const double> advantages,
                                                             std::size_t batch_size);

/// Clips each subpolicy's gradient to unit norm and applies RMSProp ascent.
void apply_policy_gradients(PolicyFamily& family,
                            const std::map<env::SymbolId, nn::GradientBundle>& grads);

/// q_i - c_tau(s_i) for every transition, from the critic's current values.
std::vector<double> compute_advantages(const Dataset& data, const CriticParams& critics);

/// Critic ascent step on -1/2 sum (q - c)^2 / batch_size, block by block.
void update_critics(CriticParams& critics, const Dataset& data, std::size_t batch_size);

/// Samples tasks from `probs` and runs episodes until at least batch_size
/// transitions are collected. Episode k of the batch draws all of its
/// randomness from derive_seed(batch_key, k), so results do not depend on
/// the worker count.
Dataset collect_batch(const PolicyModel& model, const TaskList& tasks, std::span<const double> probs,
                      const TrainerConfig& config, std::uint64_t batch_key);

struct MetricsRow {
  std::uint64_t episodes_elapsed = 0;
  std::size_t l_max = 0;
  std::string task_name;
  double reward_estimate = 0.0;
  double curriculum_weight = 0.0;
};

struct StepReport {
  std::uint64_t train_step = 0;
  std::uint64_t episodes_elapsed = 0;
  std::size_t l_max = 0;
  double batch_mean_reward = 0.0;
  double r_min = 0.0;
  std::vector<MetricsRow> rows;
};

/// Curriculum-driven outer loop. Each call to advance() performs one
/// train_step (moving past empty length levels without updates), so the
/// loop can be checkpointed between any two steps.
class Trainer {
 public:
  Trainer(TrainerConfig config, TaskList tasks, std::unique_ptr<PolicyModel> model);

  /// Builds a trainer around a freshly initialised modular family.
  static Trainer modular(TrainerConfig config, TaskList tasks);

  std::optional<StepReport> advance();
  /// Runs until finished; calls on_step after every train_step.
  void run(const std::function<void(const StepReport&)>& on_step = {});

  bool finished() const { return finished_; }
  /// Episode count at which every task first reached r_good at the top level.
  std::optional<std::uint64_t> mastery_episodes() const { return mastery_episodes_; }
  std::uint64_t episodes() const { return episodes_; }
  std::uint64_t train_steps() const { return train_steps_; }

  const TrainerConfig& config() const { return config_; }
  const TaskList& tasks() const { return tasks_; }
  const PolicyModel& model() const { return *model_; }
  PolicyModel& model() { return *model_; }
  const CriticParams& critics() const { return critics_; }
  const CurriculumState& curriculum() const { return curriculum_; }
  std::mt19937_64& rng() { return rng_; }

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  TrainerConfig config_;
  TaskList tasks_;
  std::unique_ptr<PolicyModel> model_;
  CriticParams critics_;
  CurriculumState curriculum_;
  std::mt19937_64 rng_;
  std::uint64_t episodes_ = 0;
  std::uint64_t train_steps_ = 0;
  bool finished_ = false;
  std::optional<std::uint64_t> mastery_episodes_;
};

/// Fraction of `episodes` rollouts that complete the task, with seeds
/// derived from seed_base. Parameters are only read.
double completion_rate(const PolicyModel& model, const env::Task& task, std::size_t episodes,
                       std::uint64_t seed_base, int step_cap);

std::string metrics_csv_header();
std::string metrics_csv_rows(const StepReport& report);

/// Resolves task names; throws ConfigError for unknown names.
TaskList tasks_by_name(const std::vector<std::string>& names);

}  // namespace psketch
