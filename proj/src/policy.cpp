#include "psketch/policy.hpp"

#include <iomanip>
#include <sstream>

namespace psketch {

PolicyFamily PolicyFamily::create(std::mt19937_64& rng, std::size_t hidden, double step_size) {
  PolicyFamily family;
  for (std::uint16_t i = 0; i < env::vocabulary_size(); ++i) {
    const env::SymbolId s{i};
    const nn::DenseShape shape{env::feature_dim(env::symbol_kind(s)), hidden, env::kNumActions + 1};
    Subpolicy p{nn::DenseNet::random(shape, rng), nn::RmsPropState(shape.total(), step_size)};
    family.insert(s, std::move(p));
  }
  return family;
}

bool PolicyFamily::contains(env::SymbolId s) const {
  return s.id < slots_.size() && slots_[s.id].has_value();
}

const Subpolicy& PolicyFamily::at(env::SymbolId s) const {
  if (!contains(s)) throw ConfigError("no subpolicy for symbol id " + std::to_string(s.id));
  return *slots_[s.id];
}

Subpolicy& PolicyFamily::at(env::SymbolId s) {
  if (!contains(s)) throw ConfigError("no subpolicy for symbol id " + std::to_string(s.id));
  return *slots_[s.id];
}

std::vector<env::SymbolId> PolicyFamily::symbols() const {
  std::vector<env::SymbolId> out;
  for (std::uint16_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i]) out.push_back({i});
  }
  return out;
}

void PolicyFamily::insert(env::SymbolId s, Subpolicy p) {
  if (p.net.output_dim() != env::kNumActions + 1) {
    throw ConfigError("subpolicy output must cover the augmented action set");
  }
  if (slots_.size() <= s.id) slots_.resize(s.id + 1u);
  slots_[s.id] = std::move(p);
}

std::vector<double> action_distribution(const PolicyFamily& family, env::SymbolId symbol,
                                        std::span<const double> features) {
  const auto cache = nn::forward(family.at(symbol).net, features);
  return nn::softmax(cache.logits);
}

std::vector<double> empirical_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  std::vector<double> q(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    q[i] = acc;
  }
  return q;
}

void fill_returns(Rollout& rollout, double gamma) {
  std::vector<double> rewards;
  rewards.reserve(rollout.transitions.size());
  for (const auto& t : rollout.transitions) rewards.push_back(t.reward);
  const auto q = empirical_returns(rewards, gamma);
  for (std::size_t i = 0; i < q.size(); ++i) rollout.transitions[i].return_to_go = q[i];
}

std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  // Rounding left u above the running sum; take the last nonzero entry.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  return probs.size() - 1;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rollout run_sketch(SubpolicyController& controller, const env::Task& task, std::uint64_t seed,
                   int step_cap, double gamma) {
  Rollout rollout;
  rollout.task_id = task.id;
  if (task.sketch.empty()) throw ConfigError("task " + task.name + " has an empty sketch");

  env::World world = env::World::reset(task, seed);
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::vector<double> features(world.feature_dim());
  std::size_t index = 0;
  controller.begin_symbol(world, task.sketch[index]);

  for (int step = 0; step < step_cap; ++step) {
    const env::SymbolId symbol = task.sketch[index];
    world.features_into(features);
    const std::size_t action = controller.choose(symbol, features, world, rng);

    Transition t;
    t.features = features;
    t.action = static_cast<std::uint16_t>(action);
    t.symbol = symbol;
    t.task_id = task.id;
    t.step_index = static_cast<std::uint32_t>(step);

    if (action == env::kStopIndex) {
      rollout.subpolicy_boundaries.push_back(rollout.transitions.size());
      rollout.transitions.push_back(std::move(t));
      if (++index == task.sketch.size()) break;
      controller.begin_symbol(world, task.sketch[index]);
      continue;
    }
    const auto [reward, done] = world.step(static_cast<env::Action>(action));
    t.reward = reward;
    rollout.total_reward += reward;
    rollout.transitions.push_back(std::move(t));
    if (done) break;
  }
  rollout.completed = rollout.total_reward > 0.0;
  fill_returns(rollout, gamma);
  return rollout;
}

namespace {

class SamplingController : public SubpolicyController {
 public:
  explicit SamplingController(const PolicyFamily& family) : family_(family) {}

  std::size_t choose(env::SymbolId symbol, std::span<const double> features, const env::World&,
                     std::mt19937_64& rng) override {
    nn::forward_into(family_.at(symbol).net, features, cache_);
    nn::softmax_into(cache_.logits, probs_);
    return sample_index(probs_, rng);
  }

 private:
  const PolicyFamily& family_;
  nn::ForwardCache cache_;
  std::vector<double> probs_;
};

}  // namespace

Rollout run_episode(const PolicyFamily& family, const env::Task& task, std::uint64_t seed,
                    int step_cap, double gamma) {
  for (auto s : task.sketch) {
    if (!family.contains(s)) {
      throw ConfigError("task " + task.name + " uses untrained symbol " +
                        std::string(env::symbol_name(s)));
    }
  }
  SamplingController controller(family);
  return run_sketch(controller, task, seed, step_cap, gamma);
}

void OracleController::begin_symbol(const env::World& world, env::SymbolId s) {
  oracle_.begin_symbol(world, s);
}

std::size_t OracleController::choose(env::SymbolId, std::span<const double>,
                                     const env::World& world, std::mt19937_64&) {
  const auto a = oracle_.act(world);
  return a ? static_cast<std::size_t>(*a) : env::kStopIndex;
}

std::string rollout_trace(const Rollout& rollout) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (const auto& t : rollout.transitions) {
    os << t.step_index << '\t'
       << (t.symbol == kNoSymbol ? std::string_view("-") : env::symbol_name(t.symbol)) << '\t'
       << env::action_name(t.action) << '\t' << t.reward << '\t' << t.return_to_go << '\n';
  }
  return os.str();
}

}  // namespace psketch
