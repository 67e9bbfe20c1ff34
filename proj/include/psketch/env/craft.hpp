#pragma once

// Minecraft-style crafting gridworld. The agent faces one of four headings
// and interacts with the faced cell through USE. Every layout contains all
// raw materials, all three stations, a gold cell walled off by water and a
// gem cell walled off by stone, so any task's recipe chain is available.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psketch/env/task.hpp"

namespace psketch::env {

enum class Cell : std::uint8_t {
  empty, boundary, water, stone,
  wood, grass, iron, gold, gem,
  toolshed, workbench, factory,
};
inline constexpr std::size_t kNumCellKinds = 12;

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos&) const = default;
};

inline Pos operator+(Pos p, Offset o) { return {p.row + o.drow, p.col + o.dcol}; }

inline constexpr int kCraftSize = 10;
inline constexpr int kCraftStepCap = 100;
inline constexpr int kCraftWindow = 5;
inline constexpr int kInventoryCap = 2;
/// Copies of each raw material (wood, grass, iron) scattered per layout.
inline constexpr int kCraftMaterialCopies = 2;

// Window one-hot skips `empty`, so an empty neighbourhood encodes as zeros.
inline constexpr std::size_t kCraftWindowFeatures =
    kCraftWindow * kCraftWindow * (kNumCellKinds - 1);
inline constexpr std::size_t kCraftFeatureDim = kCraftWindowFeatures + kNumItems + 4;

struct CraftState {
  std::array<Cell, kCraftSize * kCraftSize> grid{};
  Pos agent;
  Dir facing = Dir::up;
  std::array<int, kNumItems> inventory{};
  int steps_elapsed = 0;
  Item goal = Item::plank;

  Cell at(Pos p) const;
  Cell& at(Pos p) { return grid[static_cast<std::size_t>(p.row * kCraftSize + p.col)]; }
  int count(Item i) const { return inventory[static_cast<std::size_t>(i)]; }

  bool operator==(const CraftState&) const = default;
};

struct Recipe {
  Item output;
  Cell station;
  std::vector<Item> inputs;
};

/// Recipes in registry order (ties between equally large matches go to the
/// earlier entry).
const std::vector<Recipe>& craft_recipes();

CraftState craft_reset(const Task& task, std::uint64_t seed);

struct CraftStep {
  CraftState state;
  double reward = 0.0;
  bool done = false;
};

CraftStep craft_step(const CraftState& state, Action action);
/// In-place variant used on the hot path. Returns (reward, done).
std::pair<double, bool> craft_step_inplace(CraftState& state, Action action);

std::vector<double> craft_features(const CraftState& state);
void craft_features_into(const CraftState& state, std::span<double> out);

bool craft_passable(Cell c);
std::optional<Item> raw_item(Cell c);

/// Cells from which the agent can reach by walking over empty cells.
std::vector<bool> craft_reachable(const CraftState& state);

std::string craft_render(const CraftState& state);

}  // namespace psketch::env
