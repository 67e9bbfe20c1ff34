#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "psketch/policy.hpp"

using namespace psketch;
using env::find_task;

namespace {

// Plays a fixed list of augmented actions, then repeats the last one.
class Script : public SubpolicyController {
 public:
  explicit Script(std::vector<std::size_t> actions) : actions_(std::move(actions)) {}
  std::size_t choose(env::SymbolId symbol, std::span<const double>, const env::World&,
                     std::mt19937_64&) override {
    seen.push_back(symbol);
    const std::size_t a = actions_[std::min(next_, actions_.size() - 1)];
    ++next_;
    return a;
  }
  std::vector<env::SymbolId> seen;

 private:
  std::vector<std::size_t> actions_;
  std::size_t next_ = 0;
};

constexpr std::size_t kStop = env::kStopIndex;
constexpr std::size_t kLeft = static_cast<std::size_t>(env::Action::left);

}  // namespace

TEST(Returns, MatchBruteForceSums) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> len(0, 60);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double gamma = trial % 10 == 0 ? 1.0 : 0.05 + 0.9 * std::abs(u(rng));
    std::vector<double> r(static_cast<std::size_t>(len(rng)));
    for (auto& v : r) v = u(rng);
    const auto q = empirical_returns(r, gamma);
    ASSERT_EQ(q.size(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      double brute = 0;
      for (std::size_t j = i; j < r.size(); ++j) brute += std::pow(gamma, static_cast<double>(j - i)) * r[j];
      worst = std::max(worst, std::abs(brute - q[i]));
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Returns, TerminalRewardDiscountsBackwards) {
  const auto q = empirical_returns(std::vector<double>{0, 0, 1}, 0.9);
  EXPECT_DOUBLE_EQ(q[2], 1.0);
  EXPECT_DOUBLE_EQ(q[1], 0.9);
  EXPECT_DOUBLE_EQ(q[0], 0.81);
  EXPECT_TRUE(empirical_returns(std::vector<double>{}, 0.9).empty());
}

TEST(Returns, RejectsGammaOutsideUnitInterval) {
  EXPECT_THROW(empirical_returns(std::vector<double>{1}, 0.0), ConfigError);
  EXPECT_THROW(empirical_returns(std::vector<double>{1}, 1.5), ConfigError);
}

TEST(Family, HoldsOneSixWayNetPerSymbol) {
  std::mt19937_64 rng(0);
  const auto family = PolicyFamily::create(rng, 16);
  EXPECT_EQ(family.symbols().size(), env::vocabulary_size());
  for (auto s : family.symbols()) {
    const auto& net = family.at(s).net;
    EXPECT_EQ(net.output_dim(), env::kNumActions + 1);
    EXPECT_EQ(net.input_dim(), env::feature_dim(env::symbol_kind(s)));
  }
  EXPECT_THROW(family.at(env::SymbolId{200}), ConfigError);
}

TEST(Family, RejectsNetsWithoutStop) {
  PolicyFamily family;
  std::mt19937_64 rng(0);
  Subpolicy p{nn::DenseNet::random({4, 8, env::kNumActions}, rng), {}};
  EXPECT_THROW(family.insert(env::SymbolId{0}, p), ConfigError);
}

TEST(Family, ActionDistributionIsNormalised) {
  std::mt19937_64 rng(1);
  const auto family = PolicyFamily::create(rng, 16);
  const auto world = env::World::reset(find_task("make plank"), 2);
  const auto p = action_distribution(family, env::symbol_by_name("get wood"), world.features());
  ASSERT_EQ(p.size(), 6u);
  double sum = 0;
  for (double v : p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(RunSketch, StopAdvancesSymbolWithoutMovingTheAgent) {
  const auto& task = find_task("make plank");
  Script script({kStop, kLeft, kStop});
  const Rollout r = run_sketch(script, task, 5, 100, 0.9);
  ASSERT_EQ(r.transitions.size(), 3u);
  EXPECT_EQ(script.seen[0], task.sketch[0]);
  EXPECT_EQ(script.seen[1], task.sketch[1]);
  EXPECT_EQ(script.seen[2], task.sketch[1]);
  EXPECT_EQ(r.subpolicy_boundaries, (std::vector<std::size_t>{0, 2}));
  // First STOP left the world untouched: the next transition saw the same features.
  EXPECT_EQ(r.transitions[0].features, r.transitions[1].features);
  EXPECT_FALSE(r.completed);
}

TEST(RunSketch, StopCountsTowardTheStepCap) {
  const auto& task = find_task("room 1");
  Script script({kLeft});
  EXPECT_EQ(run_sketch(script, task, 0, 7, 0.9).transitions.size(), 7u);
  Script stopper({kStop, kLeft});
  const Rollout r = run_sketch(stopper, task, 0, 7, 0.9);
  EXPECT_EQ(r.transitions.size(), 7u);
  EXPECT_EQ(r.transitions.back().step_index, 6u);
}

TEST(RunSketch, OracleControllerCompletesWithUnitTerminalReward) {
  for (const char* name : {"make plank", "get gem", "room 9"}) {
    OracleController oracle;
    const Rollout r = run_sketch(oracle, find_task(name), 12, 100, 0.9);
    ASSERT_TRUE(r.completed) << name;
    EXPECT_EQ(r.total_reward, 1.0);
    EXPECT_EQ(r.transitions.back().reward, 1.0);
    EXPECT_EQ(r.transitions.back().return_to_go, 1.0);
    for (std::size_t i = 0; i + 1 < r.transitions.size(); ++i) {
      EXPECT_EQ(r.transitions[i].reward, 0.0);
      EXPECT_GT(r.transitions[i].return_to_go, 0.0);
      EXPECT_LT(r.transitions[i].return_to_go, 1.0);
    }
    EXPECT_EQ(r.subpolicy_boundaries.size(), find_task(name).sketch.size() - 1);
  }
}

TEST(RunEpisode, SameSeedSameRollout) {
  std::mt19937_64 rng(3);
  const auto family = PolicyFamily::create(rng, 16);
  const auto& task = find_task("make bridge");
  const Rollout a = run_episode(family, task, 99, 100);
  const Rollout b = run_episode(family, task, 99, 100);
  ASSERT_EQ(a.transitions.size(), b.transitions.size());
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    EXPECT_EQ(a.transitions[i].action, b.transitions[i].action);
    EXPECT_EQ(a.transitions[i].features, b.transitions[i].features);
  }
  EXPECT_EQ(rollout_trace(a), rollout_trace(b));
  EXPECT_NE(rollout_trace(a), rollout_trace(run_episode(family, task, 100, 100)));
}

TEST(RunEpisode, ActionsFollowTheSymbolsNetwork) {
  // A net that always emits STOP ends a length-2 sketch after two decisions.
  std::mt19937_64 rng(3);
  auto family = PolicyFamily::create(rng, 8);
  for (auto s : family.symbols()) {
    auto& net = family.at(s).net;
    std::ranges::fill(net.flat(), 0.0);
    net.b2()[env::kStopIndex] = 50.0;
  }
  const Rollout r = run_episode(family, find_task("make cloth"), 4, 100);
  ASSERT_EQ(r.transitions.size(), 2u);
  EXPECT_EQ(r.transitions[0].symbol, env::symbol_by_name("get grass"));
  EXPECT_EQ(r.transitions[1].symbol, env::symbol_by_name("use factory"));
}

TEST(Sampling, EmpiricalFrequenciesMatchProbabilities) {
  const std::vector<double> p = {0.1, 0.0, 0.25, 0.65};
  std::mt19937_64 rng(8);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) ++counts[sample_index(p, rng)];
  EXPECT_EQ(counts[1], 0);
  for (std::size_t k = 0; k < 4; ++k) {
    const double sigma = std::sqrt(n * p[k] * (1 - p[k]));
    EXPECT_LE(std::abs(counts[k] - n * p[k]), 4 * sigma + 1e-9);
  }
}

TEST(Sampling, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t k = 0; k < 50; ++k) seen.insert(derive_seed(s, k));
  EXPECT_EQ(seen.size(), 2500u);
}
