#pragma once

// Room-and-door maze in the spirit of the "light world": a 3x3 grid of
// 5x5 rooms separated by one-cell walls. Neighbouring rooms are joined by a
// door cell in the middle of the shared wall, which may be open, locked or
// absent. Keys lie on floor cells and are picked up with USE.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psketch/env/craft.hpp"
#include "psketch/env/task.hpp"

namespace psketch::env {

enum class MazeCell : std::uint8_t { wall, floor, open_door, locked_door };

inline constexpr int kRoomsPerSide = 3;
inline constexpr int kRoomSize = 5;
inline constexpr int kMazeSize = kRoomsPerSide * (kRoomSize + 1) + 1;  // 19
inline constexpr int kMazeStepCap = 100;
/// Sensor range: one more than the largest in-room Manhattan distance.
inline constexpr int kMazeSensorRange = 9;
/// 4 sides x (key, closed door, open door), then has_key, then key-underfoot.
inline constexpr std::size_t kMazeFeatureDim = 4 * 3 + 2;

struct Room {
  int row = 0;
  int col = 0;
  bool operator==(const Room&) const = default;
};

struct MazeState {
  std::array<MazeCell, kMazeSize * kMazeSize> grid{};
  std::array<bool, kMazeSize * kMazeSize> keys{};
  Pos agent;
  Dir facing = Dir::up;
  bool has_key = false;
  Room current_room;  // last room whose interior the agent stood in
  Room goal_room;
  int steps_elapsed = 0;

  MazeCell at(Pos p) const;
  MazeCell& at(Pos p) { return grid[static_cast<std::size_t>(p.row * kMazeSize + p.col)]; }
  bool key_at(Pos p) const;
  bool& key_at(Pos p) { return keys[static_cast<std::size_t>(p.row * kMazeSize + p.col)]; }

  bool operator==(const MazeState&) const = default;
};

/// Room whose interior contains p; nullopt on walls and door cells.
std::optional<Room> room_of(Pos p);
/// Door cell between a room and its neighbour in direction d.
Pos door_between(Room r, Dir d);
/// Top-left interior cell of a room.
Pos room_origin(Room r);
bool maze_passable(MazeCell c);

MazeState maze_reset(const Task& task, std::uint64_t seed);

struct MazeStep {
  MazeState state;
  double reward = 0.0;
  bool done = false;
};

MazeStep maze_step(const MazeState& state, Action action);
std::pair<double, bool> maze_step_inplace(MazeState& state, Action action);

std::vector<double> maze_features(const MazeState& state);
void maze_features_into(const MazeState& state, std::span<double> out);

std::string maze_render(const MazeState& state);

}  // namespace psketch::env
