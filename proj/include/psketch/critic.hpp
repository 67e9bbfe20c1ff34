#pragma once

// Linear state-value baselines c_tau(s), one per task in the full variant.
// The ablation variants drop the state dependence, the task dependence, or
// both. Shared variants keep one block per environment kind because the two
// worlds have different feature sizes.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "psketch/env/task.hpp"
#include "psketch/nn.hpp"

namespace psketch {

enum class CriticVariant { constant, state_only, task_only, state_and_task };

std::string_view critic_variant_name(CriticVariant v);
CriticVariant parse_critic_variant(std::string_view name);

class CriticParams {
 public:
  struct Block {
    std::size_t offset = 0;
    std::size_t feature_dim = 0;  // 0 for scalar blocks
    std::size_t size() const { return feature_dim + 1; }  // weights then bias
    bool operator==(const Block&) const = default;
  };

  CriticParams() = default;
  /// Zero-initialised critic covering every task in the registry.
  static CriticParams create(CriticVariant variant, double step_size = 0.01);

  CriticVariant variant() const { return variant_; }
  const Block& block_for(std::size_t task_id) const;
  std::size_t block_index(std::size_t task_id) const;
  const std::vector<Block>& blocks() const { return blocks_; }

  double value(std::size_t task_id, std::span<const double> features) const;

  /// (q - c) * grad c, the ascent direction of -1/2 (q - c)^2, as a full-size
  /// vector that is zero outside the task's block.
  std::vector<double> gradient(std::size_t task_id, std::span<const double> features,
                               double q) const;
  /// Adds scale * (q - c) * grad c into `into` (full-size).
  void accumulate_gradient(std::size_t task_id, std::span<const double> features, double q,
                           double scale, std::span<double> into) const;

  /// Clips each block's gradient to unit norm and applies RMSProp to the
  /// blocks that received any samples.
  void apply(std::span<const double> gradient, const std::vector<bool>& touched_blocks);

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  nn::RmsPropState& optimizer() { return optimizer_; }
  const nn::RmsPropState& optimizer() const { return optimizer_; }

  bool operator==(const CriticParams&) const = default;

 private:
  CriticVariant variant_ = CriticVariant::state_and_task;
  std::vector<Block> blocks_;
  std::vector<std::size_t> task_block_;
  std::vector<double> params_;
  nn::RmsPropState optimizer_;
};

/// Free-function forms.
double critic_value(const CriticParams& critic, std::size_t task_id,
                    std::span<const double> features);
std::vector<double> critic_gradient(const CriticParams& critic, std::size_t task_id,
                                    std::span<const double> features, double q);

}  // namespace psketch
