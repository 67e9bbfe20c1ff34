#include "psketch/critic.hpp"

#include <array>
#include <string>

#include "psketch/env/world.hpp"
#include "psketch/policy.hpp"

namespace psketch {

std::string_view critic_variant_name(CriticVariant v) {
  switch (v) {
    case CriticVariant::constant: return "constant";
    case CriticVariant::state_only: return "state_only";
    case CriticVariant::task_only: return "task_only";
    case CriticVariant::state_and_task: return "state_and_task";
  }
  return "?";
}

CriticVariant parse_critic_variant(std::string_view name) {
  for (auto v : {CriticVariant::constant, CriticVariant::state_only, CriticVariant::task_only,
                 CriticVariant::state_and_task}) {
    if (critic_variant_name(v) == name) return v;
  }
  throw ConfigError("unknown critic variant: " + std::string(name));
}

CriticParams CriticParams::create(CriticVariant variant, double step_size) {
  CriticParams c;
  c.variant_ = variant;
  const bool per_task = variant == CriticVariant::task_only || variant == CriticVariant::state_and_task;
  const bool with_state = variant == CriticVariant::state_only || variant == CriticVariant::state_and_task;

  std::size_t offset = 0;
  auto add_block = [&](std::size_t dim) {
    c.blocks_.push_back({offset, dim});
    offset += dim + 1;
    return c.blocks_.size() - 1;
  };
  std::array<std::size_t, 2> shared_block{};
  if (!per_task) {
    for (auto kind : {env::EnvKind::craft, env::EnvKind::maze}) {
      shared_block[static_cast<std::size_t>(kind)] = add_block(with_state ? env::feature_dim(kind) : 0);
    }
  }
  for (const auto& task : env::task_registry()) {
    const std::size_t dim = with_state ? env::feature_dim(task.kind) : 0;
    c.task_block_.push_back(per_task ? add_block(dim)
                                     : shared_block[static_cast<std::size_t>(task.kind)]);
  }
  c.params_.assign(offset, 0.0);
  c.optimizer_ = nn::RmsPropState(offset, step_size);
  return c;
}

std::size_t CriticParams::block_index(std::size_t task_id) const {
  if (task_id >= task_block_.size()) throw ConfigError("critic: unknown task id " + std::to_string(task_id));
  return task_block_[task_id];
}

const CriticParams::Block& CriticParams::block_for(std::size_t task_id) const {
  return blocks_[block_index(task_id)];
}

double CriticParams::value(std::size_t task_id, std::span<const double> features) const {
  const Block& b = block_for(task_id);
  const double* w = params_.data() + b.offset;
  if (b.feature_dim == 0) return w[0];
  if (features.size() != b.feature_dim) throw nn::ContractViolation("critic: feature size mismatch");
  double v = w[b.feature_dim];
  for (std::size_t k = 0; k < b.feature_dim; ++k) {
    if (features[k] != 0.0) v += w[k] * features[k];
  }
  return v;
}

void CriticParams::accumulate_gradient(std::size_t task_id, std::span<const double> features,
                                       double q, double scale, std::span<double> into) const {
  const Block& b = block_for(task_id);
  const double delta = scale * (q - value(task_id, features));
  double* g = into.data() + b.offset;
  for (std::size_t k = 0; k < b.feature_dim; ++k) g[k] += delta * features[k];
  g[b.feature_dim] += delta;
}

std::vector<double> CriticParams::gradient(std::size_t task_id, std::span<const double> features,
                                           double q) const {
  std::vector<double> g(params_.size(), 0.0);
  accumulate_gradient(task_id, features, q, 1.0, g);
  return g;
}

void CriticParams::apply(std::span<const double> gradient, const std::vector<bool>& touched_blocks) {
  std::vector<double> block_grad;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (!touched_blocks[k]) continue;
    const Block& b = blocks_[k];
    block_grad.assign(gradient.begin() + static_cast<std::ptrdiff_t>(b.offset),
                      gradient.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()));
    nn::clip_to_unit_norm(block_grad);
    nn::rmsprop_apply_block(std::span<double>(params_).subspan(b.offset, b.size()), block_grad,
                            optimizer_, b.offset);
  }
}

double critic_value(const CriticParams& critic, std::size_t task_id, std::span<const double> features) {
  return critic.value(task_id, features);
}

std::vector<double> critic_gradient(const CriticParams& critic, std::size_t task_id,
                                    std::span<const double> features, double q) {
  return critic.gradient(task_id, features, q);
}

}  // namespace psketch
