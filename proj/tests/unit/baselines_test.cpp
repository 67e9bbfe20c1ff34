#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "psketch/baselines.hpp"

using namespace psketch;
using env::find_task;

namespace {

// Chooses the task's own sketch symbols in order, then ends the episode.
class SketchReplay : public MetaController {
 public:
  explicit SketchReplay(const env::Task& task) : task_(task), choices_(env::symbols_of(task.kind)) {}
  std::optional<std::size_t> choose(std::span<const double>, std::size_t decision,
                                    std::mt19937_64&) override {
    if (decision >= task_.sketch.size()) return std::nullopt;
    const auto it = std::ranges::find(choices_, task_.sketch[decision]);
    return static_cast<std::size_t>(it - choices_.begin());
  }

 private:
  const env::Task& task_;
  std::vector<env::SymbolId> choices_;
};

Dataset dataset_of(std::vector<Rollout> rollouts) {
  Dataset d;
  for (auto& r : rollouts) d.transitions += r.transitions.size();
  d.rollouts = std::move(rollouts);
  return d;
}

}  // namespace

TEST(SketchEncoding, DistinguishesTasksThatShareSymbols) {
  const auto bed = sketch_encoding(find_task("make bed"));
  const auto axe = sketch_encoding(find_task("make axe"));
  const auto shears = sketch_encoding(find_task("make shears"));
  EXPECT_EQ(bed.size(), sketch_encoding_dim());
  EXPECT_NE(bed, axe);
  EXPECT_NE(axe, shears);
  double bag = 0;
  for (std::size_t k = 0; k < env::vocabulary_size(); ++k) bag += axe[k];
  EXPECT_EQ(bag, 4.0);
}

TEST(IndependentModel, UpdatesOnlyTheSampledTasksNetwork) {
  std::mt19937_64 rng(0);
  const TaskList tasks = {&find_task("make plank"), &find_task("make rope")};
  IndependentModel model(tasks, rng, 16);
  const auto rope_before = model.net_for(find_task("make rope").id);
  const auto plank_before = model.net_for(find_task("make plank").id);
  const Rollout r = model.rollout(find_task("make plank"), 3, 100, 0.9);
  for (const auto& t : r.transitions) EXPECT_LT(t.action, env::kNumActions);
  model.update(dataset_of({r}), std::vector<double>(r.transitions.size(), 1.0), 100);
  EXPECT_EQ(model.net_for(find_task("make rope").id), rope_before);
  EXPECT_NE(model.net_for(find_task("make plank").id), plank_before);
  EXPECT_THROW(model.net_for(find_task("get gem").id), ConfigError);
}

TEST(JointModel, InputCarriesTheSketch) {
  std::mt19937_64 rng(1);
  JointModel model(rng, 16);
  const auto& plank = find_task("make plank");
  const Rollout r = model.rollout(plank, 2, 100, 0.9);
  ASSERT_FALSE(r.transitions.empty());
  const auto& x = r.transitions[0].policy_input;
  EXPECT_EQ(x.size(), env::feature_dim(plank.kind) + sketch_encoding_dim());
  const auto enc = sketch_encoding(plank);
  EXPECT_TRUE(std::equal(enc.begin(), enc.end(), x.end() - static_cast<std::ptrdiff_t>(enc.size())));
}

TEST(MetaEpisode, ReplayingTheSketchReproducesRunEpisode) {
  std::mt19937_64 rng(2);
  PolicyFamily family = PolicyFamily::create(rng, 16);
  // Bias every subpolicy toward STOP so options end quickly and several
  // sketch positions get visited.
  for (auto s : family.symbols()) family.at(s).net.b2()[env::kStopIndex] = 1.5;
  for (const char* name : {"make bed", "get gem", "room 7"}) {
    const auto& task = find_task(name);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SketchReplay replay(task);
      const Rollout meta = run_meta_episode(family, replay, task, seed, 100, 0.9, 10, 100);
      const Rollout base = run_episode(family, task, seed, 100);
      EXPECT_EQ(meta.completed, base.completed) << name << " " << seed;
      EXPECT_EQ(meta.total_reward, base.total_reward);
    }
  }
}

TEST(MetaModel, LearningLeavesSubpoliciesFrozen) {
  std::mt19937_64 rng(3);
  auto family = std::make_shared<const PolicyFamily>(PolicyFamily::create(rng, 16));
  const PolicyFamily before = *family;
  MetaModel meta(family, env::EnvKind::craft, rng, 16);
  EXPECT_EQ(meta.choices().size(), env::symbols_of(env::EnvKind::craft).size());
  const auto net_before = meta.net();
  const Rollout r = meta.rollout(find_task("make bed"), 5, 100, 0.9);
  ASSERT_FALSE(r.transitions.empty());
  EXPECT_LE(r.transitions.size(), 10u);
  meta.update(dataset_of({r}), std::vector<double>(r.transitions.size(), 0.5), 100);
  EXPECT_NE(meta.net(), net_before);
  for (auto s : before.symbols()) EXPECT_EQ(meta.family().at(s).net, before.at(s).net);
}

TEST(ZeroShot, RequiresEveryHeldOutSymbolToBeTrained) {
  std::mt19937_64 rng(4);
  const auto family = PolicyFamily::create(rng, 16);
  const TaskList no_iron = {&find_task("make plank"), &find_task("make stick")};
  EXPECT_THROW(zero_shot_eval(family, find_task("make axe"), no_iron, 10, 0), ConfigError);
  const TaskList enough = {&find_task("make plank"), &find_task("make stick"), &find_task("make rope")};
  const double rate = zero_shot_eval(family, find_task("make bed"), enough, 10, 0);
  EXPECT_GE(rate, 0.0);
  EXPECT_LE(rate, 1.0);
}

TEST(Report, CsvHasOneRowPerEntry) {
  const std::vector<ReportRow> rows = {{"modular", "multitask", "make plank", 0.9, 1000},
                                       {"joint", "zero_shot", "make bed", 0.0, 1000}};
  EXPECT_EQ(report_csv(rows),
            "model,condition,task,completion_rate,episodes\n"
            "modular,multitask,make plank,0.9,1000\n"
            "joint,zero_shot,make bed,0,1000\n");
}
