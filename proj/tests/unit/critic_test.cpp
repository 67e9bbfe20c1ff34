#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "psketch/critic.hpp"
#include "psketch/policy.hpp"

using namespace psketch;
using env::find_task;

namespace {

std::vector<double> random_features(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> f(n);
  for (auto& v : f) v = u(rng);
  return f;
}

void randomise(CriticParams& c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 0.5);
  for (auto& p : c.params()) p = n(rng);
}

}  // namespace

TEST(Critic, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CriticParams c = CriticParams::create(CriticVariant::state_and_task);
    randomise(c, rng);
    const auto& task = env::task_by_id(static_cast<std::size_t>(trial) % env::task_registry().size());
    const auto f = random_features(env::feature_dim(task.kind), rng);
    const double q = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto g = c.gradient(task.id, f, q);
    const auto& b = c.block_for(task.id);
    // Objective -1/2 (q - c)^2; its gradient is (q - c) grad c.
    auto objective = [&] {
      const double d = q - c.value(task.id, f);
      return -0.5 * d * d;
    };
    for (std::size_t k = b.offset; k < b.offset + b.size(); ++k) {
      const double keep = c.params()[k];
      const double eps = 1e-3;
      c.params()[k] = keep + eps;
      const double up = objective();
      c.params()[k] = keep - eps;
      const double down = objective();
      c.params()[k] = keep;
      const double fd = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(g[k] - fd) / std::max(1e-3, std::abs(g[k]) + std::abs(fd)));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Critic, GradientIsZeroOutsideTheTasksBlock) {
  std::mt19937_64 rng(1);
  CriticParams c = CriticParams::create(CriticVariant::state_and_task);
  randomise(c, rng);
  const auto& task = find_task("make rope");
  const auto g = c.gradient(task.id, random_features(env::feature_dim(task.kind), rng), 0.7);
  const auto& b = c.block_for(task.id);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k < b.offset || k >= b.offset + b.size()) EXPECT_EQ(g[k], 0.0);
  }
}

TEST(Critic, VariantsShareBlocksAsDescribed) {
  const auto& plank = find_task("make plank");
  const auto& gem = find_task("get gem");
  const auto& room = find_task("room 3");

  const auto full = CriticParams::create(CriticVariant::state_and_task);
  EXPECT_NE(full.block_index(plank.id), full.block_index(gem.id));
  EXPECT_EQ(full.block_for(plank.id).feature_dim, env::feature_dim(env::EnvKind::craft));

  const auto task_only = CriticParams::create(CriticVariant::task_only);
  EXPECT_NE(task_only.block_index(plank.id), task_only.block_index(gem.id));
  EXPECT_EQ(task_only.block_for(plank.id).feature_dim, 0u);

  const auto state_only = CriticParams::create(CriticVariant::state_only);
  EXPECT_EQ(state_only.block_index(plank.id), state_only.block_index(gem.id));
  EXPECT_NE(state_only.block_index(plank.id), state_only.block_index(room.id));

  const auto constant = CriticParams::create(CriticVariant::constant);
  EXPECT_EQ(constant.block_index(plank.id), constant.block_index(gem.id));
  EXPECT_EQ(constant.block_for(plank.id).size(), 1u);
}

TEST(Critic, StateFreeVariantsIgnoreFeatures) {
  std::mt19937_64 rng(2);
  CriticParams c = CriticParams::create(CriticVariant::task_only);
  randomise(c, rng);
  const auto& t = find_task("make stick");
  const double a = c.value(t.id, random_features(env::feature_dim(t.kind), rng));
  const double b = c.value(t.id, random_features(env::feature_dim(t.kind), rng));
  EXPECT_EQ(a, b);
}

TEST(Critic, ParseRoundTrip) {
  for (auto v : {CriticVariant::constant, CriticVariant::state_only, CriticVariant::task_only,
                 CriticVariant::state_and_task})
    EXPECT_EQ(parse_critic_variant(critic_variant_name(v)), v);
  EXPECT_THROW(parse_critic_variant("oracle"), ConfigError);
}

TEST(Critic, ConvergesTowardLeastSquaresFit) {
  // Targets are linear in a handful of features plus noise; repeated batch
  // updates should land near the ordinary least-squares solution, computed
  // here by normal equations over the active coordinates.
  std::mt19937_64 rng(4);
  const auto& task = find_task("room 4");
  const std::size_t dim = env::feature_dim(task.kind);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::normal_distribution<double> noise(0, 0.01);
  for (int k = 0; k < 200; ++k) {
    auto f = random_features(dim, rng);
    ys.push_back(0.3 + 0.2 * f[0] - 0.1 * f[5] + noise(rng));
    xs.push_back(std::move(f));
  }
  CriticParams c = CriticParams::create(CriticVariant::state_and_task, 0.01);
  const auto& b = c.block_for(task.id);
  std::vector<bool> touched(c.blocks().size(), false);
  touched[c.block_index(task.id)] = true;
  for (int step = 0; step < 4000; ++step) {
    std::vector<double> g(c.params().size(), 0.0);
    for (std::size_t k = 0; k < xs.size(); ++k) c.accumulate_gradient(task.id, xs[k], ys[k], 1.0 / 200, g);
    c.apply(g, touched);
  }

  // Normal equations over [features, 1] solved by Gaussian elimination.
  const std::size_t n = dim + 1;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::vector<double> z(xs[k]);
    z.push_back(1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] += z[i] * z[j];
      a[i][n] += z[i] * ys[k];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t piv = i;
    for (std::size_t r = i + 1; r < n; ++r)
      if (std::abs(a[r][i]) > std::abs(a[piv][i])) piv = r;
    std::swap(a[i], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == i) continue;
      const double m = a[r][i] / a[i][i];
      for (std::size_t j = i; j <= n; ++j) a[r][j] -= m * a[i][j];
    }
  }
  double mse_fit = 0, mse_ols = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double ols = a[n - 1][n] / a[n - 1][n - 1];
    for (std::size_t i = 0; i < dim; ++i) ols += xs[k][i] * a[i][n] / a[i][i];
    mse_fit += std::pow(c.value(task.id, xs[k]) - ys[k], 2);
    mse_ols += std::pow(ols - ys[k], 2);
  }
  EXPECT_EQ(b.feature_dim, dim);
  EXPECT_LT(mse_fit / 200, mse_ols / 200 + 1e-3);
}
