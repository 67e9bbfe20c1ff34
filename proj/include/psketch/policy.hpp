#pragma once

// Modular policies: one subpolicy network per sketch symbol, concatenated
// along a task's sketch with STOP handing control to the next symbol.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psketch/env/task.hpp"
#include "psketch/env/world.hpp"
#include "psketch/nn.hpp"

namespace psketch {

/// Raised for unknown symbols, tasks, or malformed experiment settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr env::SymbolId kNoSymbol{0xffff};

struct Subpolicy {
  nn::DenseNet net;  // output_dim == kNumActions + 1, STOP last
  nn::RmsPropState optimizer;

  bool operator==(const Subpolicy&) const = default;
};

class PolicyFamily {
 public:
  PolicyFamily() = default;

  /// One randomly initialised subpolicy for every symbol in the vocabulary,
  /// sized for the feature dimension of the symbol's environment.
  static PolicyFamily create(std::mt19937_64& rng, std::size_t hidden = nn::kDefaultHidden,
                             double step_size = 0.001);

  bool contains(env::SymbolId s) const;
  const Subpolicy& at(env::SymbolId s) const;
  Subpolicy& at(env::SymbolId s);
  std::vector<env::SymbolId> symbols() const;

  void insert(env::SymbolId s, Subpolicy p);

  bool operator==(const PolicyFamily&) const = default;

 private:
  std::vector<std::optional<Subpolicy>> slots_;
};

std::vector<double> action_distribution(const PolicyFamily& family, env::SymbolId symbol,
                                        std::span<const double> features);

struct Transition {
  std::vector<double> features;      // critic input, environment features
  std::vector<double> policy_input;  // empty unless the policy sees more than `features`
  std::uint16_t action = 0;          // index into the acting network's outputs
  env::SymbolId symbol = kNoSymbol;  // sketch symbol active when acting
  double reward = 0.0;               // reward received as a result of this action
  double return_to_go = 0.0;
  std::size_t task_id = 0;
  std::uint32_t step_index = 0;

  std::span<const double> input() const {
    return policy_input.empty() ? std::span<const double>(features) : policy_input;
  }
};

struct Rollout {
  std::size_t task_id = 0;
  std::vector<Transition> transitions;
  double total_reward = 0.0;
  bool completed = false;
  std::vector<std::size_t> subpolicy_boundaries;  // transition indices where STOP fired
};

/// q_i = sum_{j >= i} gamma^{j-i} rewards[j], where rewards[j] is the reward
/// received on the transition out of step j.
std::vector<double> empirical_returns(std::span<const double> rewards, double gamma);
void fill_returns(Rollout& rollout, double gamma);

/// Chooses among A+ for the active symbol. Returning kStopIndex emits STOP.
class SubpolicyController {
 public:
  virtual ~SubpolicyController() = default;
  virtual void begin_symbol(const env::World&, env::SymbolId) {}
  virtual std::size_t choose(env::SymbolId symbol, std::span<const double> features,
                             const env::World& world, std::mt19937_64& rng) = 0;
};

/// Executes a sketch under `controller`. STOP advances the symbol index
/// without touching the environment but counts toward step_cap; STOP on the
/// last symbol ends the episode.
Rollout run_sketch(SubpolicyController& controller, const env::Task& task, std::uint64_t seed,
                   int step_cap, double gamma);

/// Samples actions from the family's subpolicies.
Rollout run_episode(const PolicyFamily& family, const env::Task& task, std::uint64_t seed,
                    int step_cap, double gamma = 0.9);

/// Drives the scripted oracle through the same rollout machinery.
class OracleController : public SubpolicyController {
 public:
  void begin_symbol(const env::World& world, env::SymbolId s) override;
  std::size_t choose(env::SymbolId, std::span<const double>, const env::World& world,
                     std::mt19937_64&) override;

 private:
  env::ScriptedOracle oracle_;
};

/// Index drawn from a categorical distribution with one uniform draw.
std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng);

/// Separate stream for action sampling so environment layout and policy
/// randomness never share draws.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// One line per transition: step, symbol, action, reward, return-to-go.
std::string rollout_trace(const Rollout& rollout);

}  // namespace psketch
