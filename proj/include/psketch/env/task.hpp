#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace psketch::env {

enum class EnvKind : std::uint8_t { craft, maze };

/// Low-level action set A, shared by both worlds.
enum class Action : std::uint8_t { up, down, left, right, use };
inline constexpr std::size_t kNumActions = 5;
/// Index of STOP in the augmented action set A+.
inline constexpr std::size_t kStopIndex = kNumActions;

enum class Dir : std::uint8_t { up, down, left, right };

struct Offset {
  int drow;
  int dcol;
};

constexpr Offset offset_of(Dir d) {
  switch (d) {
    case Dir::up: return {-1, 0};
    case Dir::down: return {1, 0};
    case Dir::left: return {0, -1};
    case Dir::right: return {0, 1};
  }
  return {0, 0};
}

std::string_view action_name(std::size_t action_index);  // includes "stop"
std::string_view env_kind_name(EnvKind kind);

struct SymbolId {
  std::uint16_t id = 0;
  auto operator<=>(const SymbolId&) const = default;
};

/// Inventory items of the crafting world.
enum class Item : std::uint8_t {
  wood, grass, iron, gold, gem,
  plank, stick, cloth, rope, bridge, bed, axe, shears,
};
inline constexpr std::size_t kNumItems = 13;
std::string_view item_name(Item item);

struct CraftGoal {
  Item item;
};
/// Maze goals are the room offset reached by following the route.
struct MazeGoal {
  std::vector<Dir> route;
};

struct Task {
  std::size_t id = 0;
  std::string name;
  std::vector<SymbolId> sketch;
  EnvKind kind = EnvKind::craft;
  std::variant<CraftGoal, MazeGoal> goal;
  bool held_out = false;
};

/// All crafting and maze tasks with their sketches, in listing order
/// (crafting ids 0..9, maze ids 10..19).
const std::vector<Task>& task_registry();

const Task& find_task(std::string_view name);
const Task& task_by_id(std::size_t id);

std::size_t vocabulary_size();
std::string_view symbol_name(SymbolId s);
SymbolId symbol_by_name(std::string_view name);
EnvKind symbol_kind(SymbolId s);
/// Symbols that occur in some task of the given kind, in id order.
std::vector<SymbolId> symbols_of(EnvKind kind);

std::size_t max_sketch_length(const std::vector<const Task*>& tasks);

/// Plain-text table of the registry: name, environment, held-out flag, sketch.
std::string registry_table();

}  // namespace psketch::env
