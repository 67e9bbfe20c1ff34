#include "psketch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace psketch {

std::string_view curriculum_mode_name(CurriculumMode m) {
  switch (m) {
    case CurriculumMode::length_and_weight: return "length_and_weight";
    case CurriculumMode::length_only: return "length_only";
    case CurriculumMode::weight_only: return "weight_only";
    case CurriculumMode::uniform: return "uniform";
  }
  return "?";
}

CurriculumMode parse_curriculum_mode(std::string_view name) {
  for (auto m : {CurriculumMode::length_and_weight, CurriculumMode::length_only,
                 CurriculumMode::weight_only, CurriculumMode::uniform}) {
    if (curriculum_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown curriculum mode: " + std::string(name));
}

bool uses_length_gate(CurriculumMode m) {
  return m == CurriculumMode::length_and_weight || m == CurriculumMode::length_only;
}

bool uses_reward_weights(CurriculumMode m) {
  return m == CurriculumMode::length_and_weight || m == CurriculumMode::weight_only;
}

void TrainerConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(r_good >= 0.0 && r_good <= 1.0)) throw ConfigError("r_good must lie in [0, 1]");
  if (!(policy_step > 0.0) || !(critic_step > 0.0)) throw ConfigError("step sizes must be positive");
  if (step_cap <= 0) throw ConfigError("step_cap must be positive");
  if (hidden == 0) throw ConfigError("hidden must be positive");
  if (!(estimate_decay >= 0.0 && estimate_decay < 1.0)) {
    throw ConfigError("estimate_decay must lie in [0, 1)");
  }
  if (workers == 0) throw ConfigError("workers must be positive");
}

CurriculumState CurriculumState::initial() {
  CurriculumState c;
  c.reward_estimates.assign(env::task_registry().size(), 0.0);
  c.episode_counts.assign(env::task_registry().size(), 0);
  return c;
}

TaskList active_tasks(const CurriculumState& cur, const TaskList& tasks, CurriculumMode mode) {
  if (!uses_length_gate(mode)) return tasks;
  TaskList out;
  for (const auto* t : tasks) {
    if (t->sketch.size() <= cur.l_max) out.push_back(t);
  }
  return out;
}

std::vector<double> curriculum_distribution(const CurriculumState& cur, const TaskList& tasks,
                                            CurriculumMode mode) {
  std::vector<double> w(tasks.size(), 0.0);
  std::size_t eligible = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (uses_length_gate(mode) && tasks[k]->sketch.size() > cur.l_max) continue;
    ++eligible;
    w[k] = uses_reward_weights(mode) ? std::max(0.0, 1.0 - cur.reward_estimates.at(tasks[k]->id)) : 1.0;
    total += w[k];
  }
  if (eligible == 0) return w;
  if (total <= 0.0) {
    // Every eligible task is solved perfectly; fall back to uniform over them.
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const bool ok = !uses_length_gate(mode) || tasks[k]->sketch.size() <= cur.l_max;
      w[k] = ok ? 1.0 / static_cast<double>(eligible) : 0.0;
    }
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

void update_reward_estimates(CurriculumState& cur, std::span<const Rollout> rollouts, double decay) {
  for (const auto& r : rollouts) {
    double& est = cur.reward_estimates.at(r.task_id);
    est = decay * est + (1.0 - decay) * r.total_reward;
    ++cur.episode_counts.at(r.task_id);
  }
}

double min_reward_estimate(const CurriculumState& cur, const TaskList& active) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto* t : active) m = std::min(m, cur.reward_estimates.at(t->id));
  return m;
}

Rollout ModularModel::rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                              double gamma) const {
  return run_episode(family_, task, seed, step_cap, gamma);
}

std::map<env::SymbolId, nn::GradientBundle> policy_gradients(const PolicyFamily& family,
                                                             const Dataset& data,
                                                             std::span<const double> advantages,
                                                             std::size_t batch_size) {
  if (advantages.size() != data.transitions) {
    throw nn::ContractViolation("policy_gradients: one advantage per transition required");
  }
  std::map<env::SymbolId, nn::GradientBundle> grads;
  nn::ForwardCache cache;
  const double inv_d = 1.0 / static_cast<double>(batch_size);
  std::size_t k = 0;
  for (const auto& r : data.rollouts) {
    for (const auto& t : r.transitions) {
      const auto& net = family.at(t.symbol).net;
      auto it = grads.find(t.symbol);
      if (it == grads.end()) it = grads.emplace(t.symbol, nn::GradientBundle(net.shape())).first;
      nn::forward_into(net, t.input(), cache);
      nn::accumulate_logprob_gradient(net, cache, t.action, advantages[k] * inv_d, it->second);
      ++k;
    }
  }
  return grads;
}

void apply_policy_gradients(PolicyFamily& family,
                            const std::map<env::SymbolId, nn::GradientBundle>& grads) {
  for (const auto& [symbol, g] : grads) {
    auto clipped = nn::clip_to_unit_norm(g);
    auto& p = family.at(symbol);
    nn::rmsprop_apply(p.net.flat(), clipped.flat(), p.optimizer);
  }
}

void ModularModel::update(const Dataset& data, std::span<const double> advantages,
                          std::size_t batch_size) {
  apply_policy_gradients(family_, policy_gradients(family_, data, advantages, batch_size));
}

void ModularModel::save(Checkpoint& ckpt) const {
  for (auto s : family_.symbols()) {
    const auto& p = family_.at(s);
    const std::string base = "policy/" + std::to_string(s.id) + "/";
    const auto& sh = p.net.shape();
    ckpt.put_u64(base + "shape", {sh.input, sh.hidden, sh.output});
    ckpt.put(base + "params", p.net.flat());
    ckpt.put(base + "rms", p.optimizer.mean_square);
  }
}

void ModularModel::load(const Checkpoint& ckpt) {
  for (auto s : family_.symbols()) {
    auto& p = family_.at(s);
    const std::string base = "policy/" + std::to_string(s.id) + "/";
    const auto& sh = p.net.shape();
    if (ckpt.u64s(base + "shape") != std::vector<std::uint64_t>{sh.input, sh.hidden, sh.output}) {
      throw CheckpointError("checkpoint: subpolicy shape mismatch for symbol " + std::to_string(s.id));
    }
    ckpt.read_into(base + "params", p.net.flat());
    ckpt.read_into(base + "rms", p.optimizer.mean_square);
  }
}

std::vector<double> compute_advantages(const Dataset& data, const CriticParams& critics) {
  std::vector<double> adv;
  adv.reserve(data.transitions);
  for (const auto& r : data.rollouts) {
    for (const auto& t : r.transitions) {
      adv.push_back(t.return_to_go - critics.value(t.task_id, t.features));
    }
  }
  return adv;
}

void update_critics(CriticParams& critics, const Dataset& data, std::size_t batch_size) {
  std::vector<double> grad(critics.params().size(), 0.0);
  std::vector<bool> touched(critics.blocks().size(), false);
  const double inv_d = 1.0 / static_cast<double>(batch_size);
  for (const auto& r : data.rollouts) {
    for (const auto& t : r.transitions) {
      critics.accumulate_gradient(t.task_id, t.features, t.return_to_go, inv_d, grad);
      touched[critics.block_index(t.task_id)] = true;
    }
  }
  critics.apply(grad, touched);
}

namespace {

Rollout batch_episode(const PolicyModel& model, const TaskList& tasks, std::span<const double> probs,
                      const TrainerConfig& config, std::uint64_t batch_key, std::uint64_t k) {
  std::mt19937_64 pick(derive_seed(batch_key, 2 * k));
  const auto* task = tasks[sample_index(probs, pick)];
  return model.rollout(*task, derive_seed(batch_key, 2 * k + 1), config.step_cap, config.gamma);
}

}  // namespace

Dataset collect_batch(const PolicyModel& model, const TaskList& tasks, std::span<const double> probs,
                      const TrainerConfig& config, std::uint64_t batch_key) {
  if (tasks.empty() || probs.size() != tasks.size()) {
    throw ConfigError("collect_batch: need one probability per task");
  }
  Dataset data;
  std::uint64_t next = 0;
  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  while (data.transitions < config.batch_size) {
    // Episodes are generated in waves; the prefix that first reaches the
    // batch size is kept, so the result is the same for any worker count.
    std::vector<Rollout> wave(workers);
    if (workers == 1) {
      wave[0] = batch_episode(model, tasks, probs, config, batch_key, next);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] { wave[w] = batch_episode(model, tasks, probs, config, batch_key, next + w); });
      }
    }
    for (auto& r : wave) {
      if (data.transitions >= config.batch_size) break;
      data.transitions += r.transitions.size();
      data.rollouts.push_back(std::move(r));
    }
    next += workers;
  }
  return data;
}

Trainer::Trainer(TrainerConfig config, TaskList tasks, std::unique_ptr<PolicyModel> model)
    : config_(std::move(config)),
      tasks_(std::move(tasks)),
      model_(std::move(model)),
      critics_(CriticParams::create(config_.critic_variant, config_.critic_step)),
      curriculum_(CurriculumState::initial()),
      rng_(derive_seed(config_.seed, 7)) {
  config_.validate();
  if (tasks_.empty()) throw ConfigError("trainer needs at least one task");
  if (!model_) throw ConfigError("trainer needs a model");
}

Trainer Trainer::modular(TrainerConfig config, TaskList tasks) {
  std::mt19937_64 init(config.seed);
  auto model = std::make_unique<ModularModel>(PolicyFamily::create(init, config.hidden, config.policy_step));
  return Trainer(std::move(config), std::move(tasks), std::move(model));
}

std::optional<StepReport> Trainer::advance() {
  std::size_t longest = 0;
  for (const auto* t : tasks_) longest = std::max(longest, t->sketch.size());

  while (!finished_) {
    const TaskList active = active_tasks(curriculum_, tasks_, config_.curriculum_mode);
    if (active.empty()) {
      // No task this short: move on without any updates.
      if (curriculum_.l_max >= longest) {
        finished_ = true;
        break;
      }
      ++curriculum_.l_max;
      curriculum_.fresh_level = true;
      continue;
    }
    if (episodes_ >= config_.max_episodes) {
      finished_ = true;
      break;
    }

    std::vector<double> probs;
    if (curriculum_.fresh_level) {
      probs.assign(tasks_.size(), 0.0);
      for (std::size_t k = 0; k < tasks_.size(); ++k) {
        if (std::find(active.begin(), active.end(), tasks_[k]) != active.end()) {
          probs[k] = 1.0 / static_cast<double>(active.size());
        }
      }
    } else {
      probs = curriculum_distribution(curriculum_, tasks_, config_.curriculum_mode);
    }

    const std::uint64_t batch_key = rng_();
    Dataset data = collect_batch(*model_, tasks_, probs, config_, batch_key);
    const auto adv = compute_advantages(data, critics_);
    model_->update(data, adv, config_.batch_size);
    update_critics(critics_, data, config_.batch_size);
    update_reward_estimates(curriculum_, data.rollouts, config_.estimate_decay);
    curriculum_.fresh_level = false;
    episodes_ += data.rollouts.size();
    ++train_steps_;

    StepReport report;
    report.train_step = train_steps_;
    report.episodes_elapsed = episodes_;
    report.l_max = curriculum_.l_max;
    double total = 0.0;
    for (const auto& r : data.rollouts) total += r.total_reward;
    report.batch_mean_reward = total / static_cast<double>(data.rollouts.size());
    report.r_min = min_reward_estimate(curriculum_, active);
    const auto weights = curriculum_distribution(curriculum_, tasks_, config_.curriculum_mode);
    for (std::size_t k = 0; k < tasks_.size(); ++k) {
      report.rows.push_back({episodes_, curriculum_.l_max, tasks_[k]->name,
                             curriculum_.reward_estimates[tasks_[k]->id], weights[k]});
    }

    if (report.r_min >= config_.r_good) {
      const bool top = !uses_length_gate(config_.curriculum_mode) || curriculum_.l_max >= longest;
      if (top) {
        if (!mastery_episodes_) mastery_episodes_ = episodes_;
        if (config_.stop_at_mastery) finished_ = true;
      } else {
        ++curriculum_.l_max;
        curriculum_.fresh_level = true;
      }
    }
    return report;
  }
  return std::nullopt;
}

void Trainer::run(const std::function<void(const StepReport&)>& on_step) {
  while (auto report = advance()) {
    if (on_step) on_step(*report);
  }
}

void Trainer::save(Checkpoint& ckpt) const {
  model_->save(ckpt);
  ckpt.put_string("model/kind", std::string(model_->kind()));
  ckpt.put("critic/params", critics_.params());
  ckpt.put("critic/rms", critics_.optimizer().mean_square);
  ckpt.put_string("critic/variant", std::string(critic_variant_name(critics_.variant())));
  ckpt.put("curriculum/estimates", curriculum_.reward_estimates);
  ckpt.put_u64("curriculum/counts", curriculum_.episode_counts);
  ckpt.put_u64("curriculum/l_max", curriculum_.l_max);
  ckpt.put_u64("curriculum/fresh_level", curriculum_.fresh_level ? 1 : 0);
  std::ostringstream rng;
  rng << rng_;
  ckpt.put_string("trainer/rng", rng.str());
  ckpt.put_u64("trainer/episodes", episodes_);
  ckpt.put_u64("trainer/train_steps", train_steps_);
  ckpt.put_u64("trainer/hidden", config_.hidden);
  ckpt.put_u64("trainer/finished", finished_ ? 1 : 0);
  ckpt.put_u64("trainer/mastery", mastery_episodes_ ? std::vector<std::uint64_t>{*mastery_episodes_}
                                                    : std::vector<std::uint64_t>{});
  std::string names;
  for (const auto* t : tasks_) names += t->name + "\n";
  ckpt.put_string("trainer/tasks", names);
}

void Trainer::load(const Checkpoint& ckpt) {
  if (ckpt.string("model/kind") != model_->kind()) {
    throw CheckpointError("checkpoint holds a " + ckpt.string("model/kind") + " model, expected " +
                          std::string(model_->kind()));
  }
  if (ckpt.string("critic/variant") != critic_variant_name(critics_.variant())) {
    throw CheckpointError("checkpoint critic variant does not match the configuration");
  }
  std::string names;
  for (const auto* t : tasks_) names += t->name + "\n";
  if (ckpt.string("trainer/tasks") != names) {
    throw CheckpointError("checkpoint was trained on a different task set");
  }
  model_->load(ckpt);
  ckpt.read_into("critic/params", critics_.params());
  ckpt.read_into("critic/rms", critics_.optimizer().mean_square);
  ckpt.read_into("curriculum/estimates", curriculum_.reward_estimates);
  curriculum_.episode_counts = ckpt.u64s("curriculum/counts");
  if (curriculum_.episode_counts.size() != curriculum_.reward_estimates.size()) {
    throw CheckpointError("checkpoint: curriculum counts have the wrong size");
  }
  curriculum_.l_max = ckpt.u64("curriculum/l_max");
  curriculum_.fresh_level = ckpt.u64("curriculum/fresh_level") != 0;
  std::istringstream rng(ckpt.string("trainer/rng"));
  rng >> rng_;
  if (!rng) throw CheckpointError("checkpoint: unreadable rng state");
  episodes_ = ckpt.u64("trainer/episodes");
  train_steps_ = ckpt.u64("trainer/train_steps");
  finished_ = ckpt.u64("trainer/finished") != 0;
  const auto& mastery = ckpt.u64s("trainer/mastery");
  mastery_episodes_ = mastery.empty() ? std::nullopt : std::optional<std::uint64_t>(mastery[0]);
}

double completion_rate(const PolicyModel& model, const env::Task& task, std::size_t episodes,
                       std::uint64_t seed_base, int step_cap) {
  if (episodes == 0) return 0.0;
  std::size_t done = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    if (model.rollout(task, derive_seed(seed_base, k), step_cap, 0.9).completed) ++done;
  }
  return static_cast<double>(done) / static_cast<double>(episodes);
}

std::string metrics_csv_header() {
  return "episodes_elapsed,l_max,task_name,reward_estimate,curriculum_weight\n";
}

std::string metrics_csv_rows(const StepReport& report) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (const auto& row : report.rows) {
    os << row.episodes_elapsed << ',' << row.l_max << ',' << row.task_name << ','
       << row.reward_estimate << ',' << row.curriculum_weight << '\n';
  }
  return os.str();
}

TaskList tasks_by_name(const std::vector<std::string>& names) {
  TaskList out;
  for (const auto& n : names) {
    try {
      out.push_back(&env::find_task(n));
    } catch (const std::invalid_argument&) {
      throw ConfigError("unknown task: " + n);
    }
  }
  return out;
}

}  // namespace psketch
