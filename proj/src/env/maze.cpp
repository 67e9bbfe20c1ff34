#include "psketch/env/maze.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>

namespace psketch::env {

namespace {

constexpr std::size_t idx(Pos p) { return static_cast<std::size_t>(p.row * kMazeSize + p.col); }

bool in_maze(Pos p) { return p.row >= 0 && p.row < kMazeSize && p.col >= 0 && p.col < kMazeSize; }

bool room_exists(Room r) {
  return r.row >= 0 && r.row < kRoomsPerSide && r.col >= 0 && r.col < kRoomsPerSide;
}

Room neighbour(Room r, Dir d) {
  const Offset o = offset_of(d);
  return {r.row + o.drow, r.col + o.dcol};
}

Pos random_cell_in(Room r, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, kRoomSize - 1);
  const Pos o = room_origin(r);
  const int dr = u(rng);
  const int dc = u(rng);
  return {o.row + dr, o.col + dc};
}

// Partitions nonzero offsets into the four sensor cones; diagonals count as
// vertical.
Dir side_of(int dr, int dc) {
  if (std::abs(dc) <= std::abs(dr)) return dr < 0 ? Dir::up : Dir::down;
  return dc < 0 ? Dir::left : Dir::right;
}

}  // namespace

MazeCell MazeState::at(Pos p) const {
  if (!in_maze(p)) return MazeCell::wall;
  return grid[idx(p)];
}

bool MazeState::key_at(Pos p) const { return in_maze(p) && keys[idx(p)]; }

std::optional<Room> room_of(Pos p) {
  if (!in_maze(p) || p.row % (kRoomSize + 1) == 0 || p.col % (kRoomSize + 1) == 0) {
    return std::nullopt;
  }
  return Room{(p.row - 1) / (kRoomSize + 1), (p.col - 1) / (kRoomSize + 1)};
}

Pos room_origin(Room r) { return {1 + r.row * (kRoomSize + 1), 1 + r.col * (kRoomSize + 1)}; }

Pos door_between(Room r, Dir d) {
  const Pos o = room_origin(r);
  constexpr int mid = kRoomSize / 2;
  switch (d) {
    case Dir::up: return {o.row - 1, o.col + mid};
    case Dir::down: return {o.row + kRoomSize, o.col + mid};
    case Dir::left: return {o.row + mid, o.col - 1};
    case Dir::right: return {o.row + mid, o.col + kRoomSize};
  }
  return o;
}

bool maze_passable(MazeCell c) { return c == MazeCell::floor || c == MazeCell::open_door; }

MazeState maze_reset(const Task& task, std::uint64_t seed) {
  if (task.kind != EnvKind::maze) throw std::invalid_argument("maze_reset: not a maze task");
  const auto& route = std::get<MazeGoal>(task.goal).route;
  std::mt19937_64 rng(seed);

  // Start rooms from which the whole route stays on the board.
  std::vector<Room> starts;
  for (int r = 0; r < kRoomsPerSide; ++r) {
    for (int c = 0; c < kRoomsPerSide; ++c) {
      Room cur{r, c};
      bool ok = true;
      for (Dir d : route) {
        cur = neighbour(cur, d);
        ok = ok && room_exists(cur);
      }
      if (ok) starts.push_back({r, c});
    }
  }
  if (starts.empty()) throw std::logic_error("maze_reset: route does not fit on the board");
  const Room start = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];

  MazeState s;
  s.grid.fill(MazeCell::wall);
  for (int r = 0; r < kRoomsPerSide; ++r) {
    for (int c = 0; c < kRoomsPerSide; ++c) {
      const Pos o = room_origin({r, c});
      for (int dr = 0; dr < kRoomSize; ++dr) {
        for (int dc = 0; dc < kRoomSize; ++dc) s.at({o.row + dr, o.col + dc}) = MazeCell::floor;
      }
    }
  }

  // Off-route connections: wall, open door or locked door with equal odds.
  std::uniform_int_distribution<int> three(0, 2);
  for (int r = 0; r < kRoomsPerSide; ++r) {
    for (int c = 0; c < kRoomsPerSide; ++c) {
      for (Dir d : {Dir::right, Dir::down}) {
        if (!room_exists(neighbour({r, c}, d))) continue;
        static constexpr std::array<MazeCell, 3> kinds = {MazeCell::wall, MazeCell::open_door,
                                                          MazeCell::locked_door};
        s.at(door_between({r, c}, d)) = kinds[static_cast<std::size_t>(three(rng))];
      }
    }
  }

  s.agent = random_cell_in(start, rng);
  s.facing = Dir::up;
  s.current_room = start;

  // Route doors are always doors; a locked one gets its key in the room just
  // before it.
  std::bernoulli_distribution coin(0.5);
  Room cur = start;
  for (Dir d : route) {
    const bool locked = coin(rng);
    s.at(door_between(cur, d)) = locked ? MazeCell::locked_door : MazeCell::open_door;
    if (locked) {
      Pos k = random_cell_in(cur, rng);
      while (k == s.agent) k = random_cell_in(cur, rng);
      s.key_at(k) = true;
    }
    cur = neighbour(cur, d);
  }
  s.goal_room = cur;
  return s;
}

std::pair<double, bool> maze_step_inplace(MazeState& s, Action action) {
  if (action == Action::use) {
    const Pos ahead = s.agent + offset_of(s.facing);
    if (s.key_at(s.agent) && !s.has_key) {
      s.key_at(s.agent) = false;
      s.has_key = true;
    } else if (s.at(ahead) == MazeCell::locked_door && s.has_key) {
      s.at(ahead) = MazeCell::open_door;
      s.has_key = false;
    }
  } else {
    const Dir d = static_cast<Dir>(action);
    s.facing = d;
    const Pos target = s.agent + offset_of(d);
    if (maze_passable(s.at(target))) {
      s.agent = target;
      if (auto r = room_of(target)) s.current_room = *r;
    }
  }
  ++s.steps_elapsed;
  const auto room = room_of(s.agent);
  if (room && *room == s.goal_room) return {1.0, true};
  return {0.0, s.steps_elapsed >= kMazeStepCap};
}

MazeStep maze_step(const MazeState& state, Action action) {
  MazeStep out{state, 0.0, false};
  std::tie(out.reward, out.done) = maze_step_inplace(out.state, action);
  return out;
}

void maze_features_into(const MazeState& s, std::span<double> out) {
  if (out.size() != kMazeFeatureDim) throw std::invalid_argument("maze_features: bad buffer size");
  std::ranges::fill(out, 0.0);
  auto sense = [&](Pos obj, std::size_t kind) {
    const int dr = obj.row - s.agent.row;
    const int dc = obj.col - s.agent.col;
    if (dr == 0 && dc == 0) return;
    const int dist = std::abs(dr) + std::abs(dc);
    const double value = 1.0 - static_cast<double>(dist) / kMazeSensorRange;
    double& slot = out[static_cast<std::size_t>(side_of(dr, dc)) * 3 + kind];
    slot = std::max(slot, value);
  };

  const Room room = s.current_room;
  const Pos o = room_origin(room);
  for (int dr = 0; dr < kRoomSize; ++dr) {
    for (int dc = 0; dc < kRoomSize; ++dc) {
      const Pos p{o.row + dr, o.col + dc};
      if (s.key_at(p)) sense(p, 0);
    }
  }
  for (Dir d : {Dir::up, Dir::down, Dir::left, Dir::right}) {
    if (!room_exists(neighbour(room, d))) continue;
    const Pos door = door_between(room, d);
    if (s.at(door) == MazeCell::locked_door) sense(door, 1);
    if (s.at(door) == MazeCell::open_door) sense(door, 2);
  }
  out[12] = s.has_key ? 1.0 : 0.0;
  out[13] = s.key_at(s.agent) ? 1.0 : 0.0;
}

std::vector<double> maze_features(const MazeState& s) {
  std::vector<double> out(kMazeFeatureDim);
  maze_features_into(s, out);
  return out;
}

std::string maze_render(const MazeState& s) {
  static constexpr std::array<char, 4> agent_glyph = {'^', 'v', '<', '>'};
  std::ostringstream os;
  for (int r = 0; r < kMazeSize; ++r) {
    for (int c = 0; c < kMazeSize; ++c) {
      const Pos p{r, c};
      if (p == s.agent) {
        os << agent_glyph[static_cast<std::size_t>(s.facing)];
        continue;
      }
      if (s.key_at(p)) {
        os << 'k';
        continue;
      }
      switch (s.at(p)) {
        case MazeCell::wall: os << '#'; break;
        case MazeCell::floor: os << '.'; break;
        case MazeCell::open_door: os << '/'; break;
        case MazeCell::locked_door: os << '+'; break;
      }
    }
    os << '\n';
  }
  os << "has_key " << (s.has_key ? 1 : 0) << " goal room (" << s.goal_room.row << ','
     << s.goal_room.col << ") step " << s.steps_elapsed << '\n';
  return os.str();
}

}  // namespace psketch::env
