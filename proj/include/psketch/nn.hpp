#pragma once

// Two-layer ReLU networks with hand-written backprop, softmax heads,
// RMSProp and global-norm clipping. Everything is double precision.

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace psketch::nn {

/// Thrown when a caller breaks a shape or finiteness precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct DenseShape {
  std::size_t input = 0;
  std::size_t hidden = 128;
  std::size_t output = 0;

  std::size_t w1_size() const { return hidden * input; }
  std::size_t w2_size() const { return output * hidden; }
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return w1_size(); }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + w2_size(); }
  std::size_t total() const { return b2_offset() + output; }

  bool operator==(const DenseShape&) const = default;
};

inline constexpr std::size_t kDefaultHidden = 128;

// Parameters live in one flat buffer laid out as [w1 | b1 | w2 | b2].
// Both matrices are column-major: w1(h, i) sits at i * hidden + h, so the
// column touched by a single input feature is contiguous. Sparse one-hot
// inputs only ever visit a few columns.
class FlatParams {
 public:
  FlatParams() = default;
  explicit FlatParams(DenseShape shape) : shape_(shape), values_(shape.total(), 0.0) {}

  const DenseShape& shape() const { return shape_; }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  double& w1(std::size_t h, std::size_t i) { return values_[i * shape_.hidden + h]; }
  double w1(std::size_t h, std::size_t i) const { return values_[i * shape_.hidden + h]; }
  double& w2(std::size_t o, std::size_t h) {
    return values_[shape_.w2_offset() + h * shape_.output + o];
  }
  double w2(std::size_t o, std::size_t h) const {
    return values_[shape_.w2_offset() + h * shape_.output + o];
  }

  std::span<double> w1_col(std::size_t i) {
    return {values_.data() + i * shape_.hidden, shape_.hidden};
  }
  std::span<const double> w1_col(std::size_t i) const {
    return {values_.data() + i * shape_.hidden, shape_.hidden};
  }
  std::span<double> w2_col(std::size_t h) {
    return {values_.data() + shape_.w2_offset() + h * shape_.output, shape_.output};
  }
  std::span<const double> w2_col(std::size_t h) const {
    return {values_.data() + shape_.w2_offset() + h * shape_.output, shape_.output};
  }
  std::span<double> b1() { return {values_.data() + shape_.b1_offset(), shape_.hidden}; }
  std::span<const double> b1() const {
    return {values_.data() + shape_.b1_offset(), shape_.hidden};
  }
  std::span<double> b2() { return {values_.data() + shape_.b2_offset(), shape_.output}; }
  std::span<const double> b2() const {
    return {values_.data() + shape_.b2_offset(), shape_.output};
  }

  bool operator==(const FlatParams&) const = default;

 private:
  DenseShape shape_;
  std::vector<double> values_;
};

class DenseNet : public FlatParams {
 public:
  DenseNet() = default;
  explicit DenseNet(DenseShape shape) : FlatParams(shape) {}

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static DenseNet random(DenseShape shape, std::mt19937_64& rng);

  std::size_t input_dim() const { return shape().input; }
  std::size_t hidden_dim() const { return shape().hidden; }
  std::size_t output_dim() const { return shape().output; }

  bool all_finite() const;
};

/// Gradient arrays with the exact layout of the network they belong to.
class GradientBundle : public FlatParams {
 public:
  GradientBundle() = default;
  explicit GradientBundle(DenseShape shape) : FlatParams(shape) {}

  void set_zero();
  GradientBundle& operator+=(const GradientBundle& other);
  GradientBundle& operator*=(double s);
};

struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden;
  std::vector<double> logits;
};

ForwardCache forward(const DenseNet& net, std::span<const double> x);
/// Same as forward() but reuses the cache's buffers.
void forward_into(const DenseNet& net, std::span<const double> x, ForwardCache& cache);

std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::vector<double>& out);

/// scale * d/dtheta log softmax(forward(net, x))[action].
GradientBundle logprob_gradient(const DenseNet& net, std::span<const double> x,
                                std::size_t action, double scale);

/// Adds scale * d log pi(action | x) into `into`, using an already computed
/// forward pass. Only input columns with nonzero features are touched.
void accumulate_logprob_gradient(const DenseNet& net, const ForwardCache& cache,
                                 std::size_t action, double scale, GradientBundle& into);

double global_norm(std::span<const double> g);
/// Rescales g in place so its L2 norm is at most 1. Returns the pre-clip norm.
double clip_to_unit_norm(std::span<double> g);
GradientBundle clip_to_unit_norm(GradientBundle g);

struct RmsPropState {
  std::vector<double> mean_square;
  double decay = 0.95;
  double step_size = 0.001;
  double epsilon = 1e-8;

  RmsPropState() = default;
  RmsPropState(std::size_t n, double step, double decay_ = 0.95, double eps = 1e-8)
      : mean_square(n, 0.0), decay(decay_), step_size(step), epsilon(eps) {}

  bool operator==(const RmsPropState&) const = default;
};

/// Gradient-ascent RMSProp step: params += step * g / (sqrt(ms) + eps).
void rmsprop_apply(std::span<double> params, std::span<const double> grad, RmsPropState& state);
/// Applies to the subrange [offset, offset + grad.size()) of params/state.
void rmsprop_apply_block(std::span<double> params, std::span<const double> grad,
                         RmsPropState& state, std::size_t offset);

}  // namespace psketch::nn
