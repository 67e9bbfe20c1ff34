#include "psketch/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace psketch::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace

DenseNet DenseNet::random(DenseShape shape, std::mt19937_64& rng) {
  DenseNet net(shape);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(shape.input));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  std::uniform_real_distribution<double> u1(-r1, r1);
  std::uniform_real_distribution<double> u2(-r2, r2);
  auto p = net.flat();
  for (std::size_t k = 0; k < shape.w1_size(); ++k) p[shape.w1_offset() + k] = u1(rng);
  for (std::size_t k = 0; k < shape.w2_size(); ++k) p[shape.w2_offset() + k] = u2(rng);
  return net;
}

bool DenseNet::all_finite() const {
  return std::ranges::all_of(flat(), [](double v) { return std::isfinite(v); });
}

void GradientBundle::set_zero() { std::ranges::fill(flat(), 0.0); }

GradientBundle& GradientBundle::operator+=(const GradientBundle& other) {
  require(shape() == other.shape(), "gradient bundle shape mismatch");
  auto a = flat();
  auto b = other.flat();
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return *this;
}

GradientBundle& GradientBundle::operator*=(double s) {
  for (double& v : flat()) v *= s;
  return *this;
}

void forward_into(const DenseNet& net, std::span<const double> x, ForwardCache& cache) {
  const auto& s = net.shape();
  if (x.size() != s.input) {
    throw ContractViolation("forward: input has " + std::to_string(x.size()) +
                            " features, network expects " + std::to_string(s.input));
  }
  cache.input.assign(x.begin(), x.end());
  auto b1 = net.b1();
  cache.hidden.assign(b1.begin(), b1.end());
  for (std::size_t i = 0; i < s.input; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto col = net.w1_col(i);
    for (std::size_t h = 0; h < s.hidden; ++h) cache.hidden[h] += col[h] * xi;
  }
  for (double& h : cache.hidden) h = std::max(0.0, h);

  auto b2 = net.b2();
  cache.logits.assign(b2.begin(), b2.end());
  for (std::size_t h = 0; h < s.hidden; ++h) {
    const double hv = cache.hidden[h];
    if (hv == 0.0) continue;
    auto col = net.w2_col(h);
    for (std::size_t o = 0; o < s.output; ++o) cache.logits[o] += col[o] * hv;
  }
}

ForwardCache forward(const DenseNet& net, std::span<const double> x) {
  ForwardCache cache;
  forward_into(net, x, cache);
  return cache;
}

void softmax_into(std::span<const double> logits, std::vector<double>& out) {
  require(!logits.empty(), "softmax: empty logits");
  for (double v : logits) require(std::isfinite(v), "softmax: non-finite logit");
  const double mx = *std::ranges::max_element(logits);
  out.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    z += out[k];
  }
  for (double& p : out) p /= z;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out;
  softmax_into(logits, out);
  return out;
}

void accumulate_logprob_gradient(const DenseNet& net, const ForwardCache& cache,
                                 std::size_t action, double scale, GradientBundle& into) {
  const auto& s = net.shape();
  require(action < s.output, "logprob_gradient: action index out of range");
  require(into.shape() == s, "logprob_gradient: gradient bundle shape mismatch");
  if (scale == 0.0) return;

  // d log softmax(z)[a] / dz = onehot(a) - softmax(z)
  thread_local std::vector<double> dlogit;
  thread_local std::vector<double> dhidden;
  softmax_into(cache.logits, dlogit);
  for (double& v : dlogit) v = -v * scale;
  dlogit[action] += scale;

  auto b2 = into.b2();
  for (std::size_t o = 0; o < s.output; ++o) b2[o] += dlogit[o];

  dhidden.assign(s.hidden, 0.0);
  for (std::size_t h = 0; h < s.hidden; ++h) {
    const double hv = cache.hidden[h];
    if (hv <= 0.0) continue;  // ReLU gate; also no w2 gradient when hv == 0
    auto gcol = into.w2_col(h);
    auto wcol = net.w2_col(h);
    double acc = 0.0;
    for (std::size_t o = 0; o < s.output; ++o) {
      gcol[o] += dlogit[o] * hv;
      acc += wcol[o] * dlogit[o];
    }
    dhidden[h] = acc;
  }

  auto b1 = into.b1();
  for (std::size_t h = 0; h < s.hidden; ++h) b1[h] += dhidden[h];
  for (std::size_t i = 0; i < s.input; ++i) {
    const double xi = cache.input[i];
    if (xi == 0.0) continue;
    auto gcol = into.w1_col(i);
    for (std::size_t h = 0; h < s.hidden; ++h) gcol[h] += dhidden[h] * xi;
  }
}

GradientBundle logprob_gradient(const DenseNet& net, std::span<const double> x,
                                std::size_t action, double scale) {
  GradientBundle g(net.shape());
  require(action < net.output_dim(), "logprob_gradient: action index out of range");
  const ForwardCache cache = forward(net, x);
  accumulate_logprob_gradient(net, cache, action, scale, g);
  return g;
}

double global_norm(std::span<const double> g) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  return std::sqrt(sq);
}

double clip_to_unit_norm(std::span<double> g) {
  const double norm = global_norm(g);
  if (norm > 1.0) {
    const double s = 1.0 / norm;
    for (double& v : g) v *= s;
  }
  return norm;
}

GradientBundle clip_to_unit_norm(GradientBundle g) {
  clip_to_unit_norm(g.flat());
  return g;
}

void rmsprop_apply_block(std::span<double> params, std::span<const double> grad,
                         RmsPropState& state, std::size_t offset) {
  require(params.size() == grad.size(), "rmsprop: parameter/gradient size mismatch");
  require(offset + grad.size() <= state.mean_square.size(), "rmsprop: state too small");
  const double keep = state.decay;
  const double mix = 1.0 - state.decay;
  double* ms = state.mean_square.data() + offset;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const double g = grad[k];
    ms[k] = keep * ms[k] + mix * g * g;
    params[k] += state.step_size * g / (std::sqrt(ms[k]) + state.epsilon);
  }
}

void rmsprop_apply(std::span<double> params, std::span<const double> grad, RmsPropState& state) {
  require(state.mean_square.size() == params.size(), "rmsprop: state size mismatch");
  rmsprop_apply_block(params, grad, state, 0);
}

}  // namespace psketch::nn
