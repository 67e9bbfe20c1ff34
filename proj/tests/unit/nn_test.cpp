#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "psketch/nn.hpp"

using namespace psketch::nn;

namespace {

// Straightforward row-major reference: h = relu(W1 x + b1), y = W2 h + b2.
std::vector<double> naive_forward(const DenseNet& net, const std::vector<double>& x) {
  const auto& s = net.shape();
  std::vector<double> h(s.hidden), y(s.output);
  for (std::size_t j = 0; j < s.hidden; ++j) {
    double acc = net.b1()[j];
    for (std::size_t i = 0; i < s.input; ++i) acc += net.w1(j, i) * x[i];
    h[j] = acc > 0 ? acc : 0;
  }
  for (std::size_t o = 0; o < s.output; ++o) {
    double acc = net.b2()[o];
    for (std::size_t j = 0; j < s.hidden; ++j) acc += net.w2(o, j) * h[j];
    y[o] = acc;
  }
  return y;
}

double log_prob(const DenseNet& net, const std::vector<double>& x, std::size_t a) {
  const auto y = naive_forward(net, x);
  double m = y[0];
  for (double v : y) m = std::max(m, v);
  double z = 0;
  for (double v : y) z += std::exp(v - m);
  return y[a] - m - std::log(z);
}

DenseNet random_net(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  DenseNet net = DenseNet::random({in, hidden, out}, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& b : net.b1()) b = n(rng);
  for (auto& b : net.b2()) b = n(rng);
  return net;
}

}  // namespace

TEST(Forward, MatchesNaiveMatmul) {
  std::mt19937_64 rng(3);
  DenseNet net = random_net(3, 4, 2, rng);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x = {n(rng), n(rng), n(rng)};
    const auto cache = forward(net, x);
    const auto ref = naive_forward(net, x);
    for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(cache.logits[o], ref[o], 1e-12);
  }
}

TEST(Forward, ZeroNetGivesZeroLogits) {
  DenseNet net({4, 8, 3});
  const auto cache = forward(net, std::vector<double>{1, -2, 3, 0.5});
  for (double v : cache.logits) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ReluCutsNegativePreactivation) {
  DenseNet net({3, 3, 1});
  for (std::size_t i = 0; i < 3; ++i) net.w1(i, i) = 1.0;
  const auto cache = forward(net, std::vector<double>{1.0, -2.0, 0.5});
  EXPECT_EQ(cache.hidden[0], 1.0);
  EXPECT_EQ(cache.hidden[1], 0.0);
  EXPECT_EQ(cache.hidden[2], 0.5);
}

TEST(Forward, RejectsWrongInputSize) {
  DenseNet net({3, 4, 2});
  EXPECT_THROW(forward(net, std::vector<double>{1, 2}), ContractViolation);
}

TEST(Forward, RandomInitIsBoundedByFanIn) {
  std::mt19937_64 rng(1);
  DenseNet net = DenseNet::random({16, 32, 6}, rng);
  const double b1 = 1.0 / std::sqrt(16.0), b2 = 1.0 / std::sqrt(32.0);
  for (std::size_t h = 0; h < 32; ++h)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_LE(std::abs(net.w1(h, i)), b1);
  for (std::size_t o = 0; o < 6; ++o)
    for (std::size_t h = 0; h < 32; ++h) EXPECT_LE(std::abs(net.w2(o, h)), b2);
  for (double b : net.b1()) EXPECT_EQ(b, 0.0);
  EXPECT_TRUE(net.all_finite());
}

TEST(Softmax, UniformForEqualLogits) {
  const auto p = softmax(std::vector<double>{0, 0, 0});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(6), b(6);
    const double c = n(rng) * 10;
    for (std::size_t k = 0; k < 6; ++k) {
      a[k] = n(rng);
      b[k] = a[k] + c;
    }
    const auto pa = softmax(a), pb = softmax(b);
    double sum = 0;
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_NEAR(pa[k], pb[k], 1e-12);
      EXPECT_GT(pa[k], 0.0);
      sum += pa[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax(std::vector<double>{1000, 0});
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_GE(p[1], 0.0);
  EXPECT_TRUE(std::isfinite(p[1]));
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{0, std::numeric_limits<double>::quiet_NaN()}), ContractViolation);
  EXPECT_THROW(softmax(std::vector<double>{0, std::numeric_limits<double>::infinity()}), ContractViolation);
}

TEST(LogprobGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 2 + trial % 5, hid = 3 + trial % 7, out = 2 + trial % 5;
    DenseNet net = random_net(in, hid, out, rng);
    std::vector<double> x(in);
    for (auto& v : x) v = n(rng);
    const std::size_t a = trial % out;
    const double scale = 0.5 + std::abs(n(rng));
    const auto g = logprob_gradient(net, x, a, scale);
    auto flat = net.flat();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double keep = flat[k];
      const double eps = 1e-6;
      flat[k] = keep + eps;
      const double up = log_prob(net, x, a);
      flat[k] = keep - eps;
      const double down = log_prob(net, x, a);
      flat[k] = keep;
      const double fd = scale * (up - down) / (2 * eps);
      const double an = g.flat()[k];
      const double err = std::abs(an - fd) / std::max(1e-3, std::abs(an) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(LogprobGradient, ActionOutOfRangeIsRejected) {
  std::mt19937_64 rng(2);
  DenseNet net = random_net(3, 4, 2, rng);
  EXPECT_THROW(logprob_gradient(net, std::vector<double>{1, 2, 3}, 2, 1.0), ContractViolation);
}

TEST(LogprobGradient, AccumulateAddsScaledGradient) {
  std::mt19937_64 rng(5);
  DenseNet net = random_net(4, 6, 3, rng);
  std::vector<double> x = {0.0, 1.0, 0.0, -0.5};
  GradientBundle acc(net.shape());
  const auto cache = forward(net, x);
  accumulate_logprob_gradient(net, cache, 1, 0.25, acc);
  accumulate_logprob_gradient(net, cache, 1, 0.75, acc);
  const auto ref = logprob_gradient(net, x, 1, 1.0);
  for (std::size_t k = 0; k < acc.flat().size(); ++k) EXPECT_NEAR(acc.flat()[k], ref.flat()[k], 1e-14);
}

TEST(Clip, LeavesShortVectorsAlone) {
  std::vector<double> g = {0.3, 0.4};
  EXPECT_NEAR(clip_to_unit_norm(g), 0.5, 1e-15);
  EXPECT_EQ(g[0], 0.3);
  EXPECT_EQ(g[1], 0.4);
}

TEST(Clip, RescalesLongVectorsToUnitNorm) {
  std::vector<double> g = {3.0, 4.0};
  EXPECT_NEAR(clip_to_unit_norm(g), 5.0, 1e-15);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
}

TEST(RmsProp, MatchesHandComputedSteps) {
  std::vector<double> p = {1.0, -1.0};
  RmsPropState st(2, 0.1);
  const std::vector<double> g1 = {0.5, -2.0};
  rmsprop_apply(p, g1, st);
  // ms = 0.05 g^2, p += 0.1 g / (sqrt(ms) + 1e-8)
  for (std::size_t k = 0; k < 2; ++k) {
    const double ms = 0.05 * g1[k] * g1[k];
    EXPECT_NEAR(st.mean_square[k], ms, 1e-15);
  }
  EXPECT_NEAR(p[0], 1.0 + 0.1 * 0.5 / (std::sqrt(0.05 * 0.25) + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -1.0 - 0.1 * 2.0 / (std::sqrt(0.05 * 4.0) + 1e-8), 1e-12);

  const std::vector<double> g2 = {0.0, 1.0};
  const double ms0 = st.mean_square[0], ms1 = st.mean_square[1];
  const double p0 = p[0], p1 = p[1];
  rmsprop_apply(p, g2, st);
  EXPECT_NEAR(st.mean_square[0], 0.95 * ms0, 1e-15);
  EXPECT_EQ(p[0], p0);
  EXPECT_NEAR(p[1], p1 + 0.1 / (std::sqrt(0.95 * ms1 + 0.05) + 1e-8), 1e-12);
}

TEST(RmsProp, BlockTouchesOnlyItsRange) {
  std::vector<double> p(6, 1.0);
  RmsPropState st(6, 0.01);
  std::vector<double> g = {1.0, 1.0};
  rmsprop_apply_block(std::span<double>(p).subspan(2, 2), g, st, 2);
  for (std::size_t k : {0u, 1u, 4u, 5u}) {
    EXPECT_EQ(p[k], 1.0);
    EXPECT_EQ(st.mean_square[k], 0.0);
  }
  EXPECT_GT(p[2], 1.0);
  EXPECT_GT(st.mean_square[3], 0.0);
}

TEST(LogprobGradient, SingleOutputIsDegenerate) {
  std::mt19937_64 rng(6);
  DenseNet net = random_net(3, 4, 1, rng);
  const std::vector<double> x = {0.2, -1.0, 3.0};
  EXPECT_EQ(log_prob(net, x, 0), 0.0);
  const auto grad = logprob_gradient(net, x, 0, 1.0);
  for (double g : grad.flat()) EXPECT_EQ(g, 0.0);
}

TEST(Forward, IsBitwiseRepeatable) {
  std::mt19937_64 rng(10);
  DenseNet net = random_net(12, 32, 6, rng);
  std::normal_distribution<double> n;
  std::vector<double> x(12);
  for (auto& v : x) v = n(rng);
  const auto a = forward(net, x), b = forward(net, x);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.hidden, b.hidden);
}

TEST(Clip, IsIdempotentAndNeverGrows) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(1 + trial % 9);
    for (auto& v : g) v = n(rng);
    const double before = global_norm(g);
    clip_to_unit_norm(g);
    EXPECT_LE(global_norm(g), std::min(before, 1.0) + 1e-12);
    const auto once = g;
    clip_to_unit_norm(g);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], once[k], 1e-15);
  }
}
