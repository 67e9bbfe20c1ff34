#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "psketch/env/craft.hpp"
#include "psketch/env/maze.hpp"
#include "psketch/env/task.hpp"

namespace psketch::env {

std::size_t feature_dim(EnvKind kind);
int step_cap(EnvKind kind);

/// Either world behind one interface, so rollouts need not care which.
class World {
 public:
  explicit World(CraftState s) : state_(std::move(s)) {}
  explicit World(MazeState s) : state_(std::move(s)) {}

  static World reset(const Task& task, std::uint64_t seed);

  /// Applies a low-level action; returns (reward, done).
  std::pair<double, bool> step(Action a);

  EnvKind kind() const { return state_.index() == 0 ? EnvKind::craft : EnvKind::maze; }
  std::size_t feature_dim() const { return env::feature_dim(kind()); }
  void features_into(std::span<double> out) const;
  std::vector<double> features() const;
  std::string render() const;

  const CraftState* craft() const { return std::get_if<CraftState>(&state_); }
  const MazeState* maze() const { return std::get_if<MazeState>(&state_); }

  bool operator==(const World&) const = default;

 private:
  std::variant<CraftState, MazeState> state_;
};

/// Hand-written controller that executes a sketch symbol by symbol using
/// BFS navigation. Used as a solvability check and as a reference policy.
class ScriptedOracle {
 public:
  /// Call when control passes to a new sketch symbol.
  void begin_symbol(const World& world, SymbolId symbol);
  /// Next low-level action, or nullopt to emit STOP.
  std::optional<Action> act(const World& world) const;

 private:
  std::optional<Action> act_craft(const CraftState& s) const;
  std::optional<Action> act_maze(const MazeState& s) const;

  SymbolId symbol_;
  std::array<int, kNumItems> inventory_at_start_{};
  Room room_at_start_;
};

struct OracleRun {
  bool completed = false;
  int decisions = 0;
};

/// Runs the scripted oracle through a task's sketch under the shared step cap
/// (STOP decisions count toward it).
OracleRun run_oracle(const Task& task, std::uint64_t seed);

}  // namespace psketch::env
