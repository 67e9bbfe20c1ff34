#include "psketch/env/world.hpp"

#include <deque>
#include <functional>

namespace psketch::env {

std::size_t feature_dim(EnvKind kind) {
  return kind == EnvKind::craft ? kCraftFeatureDim : kMazeFeatureDim;
}

int step_cap(EnvKind kind) { return kind == EnvKind::craft ? kCraftStepCap : kMazeStepCap; }

World World::reset(const Task& task, std::uint64_t seed) {
  if (task.kind == EnvKind::craft) return World(craft_reset(task, seed));
  return World(maze_reset(task, seed));
}

std::pair<double, bool> World::step(Action a) {
  if (auto* c = std::get_if<CraftState>(&state_)) return craft_step_inplace(*c, a);
  return maze_step_inplace(std::get<MazeState>(state_), a);
}

void World::features_into(std::span<double> out) const {
  if (const auto* c = craft()) {
    craft_features_into(*c, out);
  } else {
    maze_features_into(*maze(), out);
  }
}

std::vector<double> World::features() const {
  std::vector<double> out(feature_dim());
  features_into(out);
  return out;
}

std::string World::render() const {
  if (const auto* c = craft()) return craft_render(*c);
  return maze_render(*maze());
}

namespace {

constexpr std::array<Dir, 4> kDirs = {Dir::up, Dir::down, Dir::left, Dir::right};

Action move(Dir d) { return static_cast<Action>(d); }

// Breadth-first search from `from` over passable cells. Returns the first move
// toward the nearest cell satisfying `goal`, or nullopt if none is reachable.
// If `from` already satisfies `goal`, returns nullopt with *arrived = true.
template <class Passable, class Goal>
std::optional<Dir> first_step(Pos from, int size, Passable passable, Goal goal, bool* arrived) {
  *arrived = goal(from);
  if (*arrived) return std::nullopt;
  const auto n = static_cast<std::size_t>(size * size);
  std::vector<int> first(n, -1);
  std::vector<bool> seen(n, false);
  auto id = [size](Pos p) { return static_cast<std::size_t>(p.row * size + p.col); };
  std::deque<Pos> queue{from};
  seen[id(from)] = true;
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    for (Dir d : kDirs) {
      const Pos q = p + offset_of(d);
      if (q.row < 0 || q.col < 0 || q.row >= size || q.col >= size) continue;
      if (seen[id(q)] || !passable(q)) continue;
      seen[id(q)] = true;
      first[id(q)] = p == from ? static_cast<int>(d) : first[id(p)];
      if (goal(q)) return static_cast<Dir>(first[id(q)]);
      queue.push_back(q);
    }
  }
  return std::nullopt;
}

// Walk next to a cell satisfying `target`, face it, and USE it.
std::optional<Action> fetch(const CraftState& s, const std::function<bool(Cell)>& target) {
  if (target(s.at(s.agent + offset_of(s.facing)))) return Action::use;
  auto adjacent_dir = [&](Pos p) -> std::optional<Dir> {
    for (Dir d : kDirs) {
      if (target(s.at(p + offset_of(d)))) return d;
    }
    return std::nullopt;
  };
  if (auto d = adjacent_dir(s.agent)) return move(*d);  // blocked move only turns
  bool arrived = false;
  auto step = first_step(
      s.agent, kCraftSize, [&](Pos p) { return craft_passable(s.at(p)); },
      [&](Pos p) { return adjacent_dir(p).has_value(); }, &arrived);
  if (step) return move(*step);
  return Action::use;
}

bool any_adjacent_reachable(const CraftState& s, Cell kind) {
  const auto reach = craft_reachable(s);
  for (int r = 0; r < kCraftSize; ++r) {
    for (int c = 0; c < kCraftSize; ++c) {
      if (s.at({r, c}) != kind) continue;
      for (Dir d : kDirs) {
        const Pos n = Pos{r, c} + offset_of(d);
        if (n.row >= 0 && n.col >= 0 && n.row < kCraftSize && n.col < kCraftSize &&
            reach[static_cast<std::size_t>(n.row * kCraftSize + n.col)]) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

void ScriptedOracle::begin_symbol(const World& world, SymbolId symbol) {
  symbol_ = symbol;
  if (const auto* c = world.craft()) inventory_at_start_ = c->inventory;
  if (const auto* m = world.maze()) room_at_start_ = m->current_room;
}

std::optional<Action> ScriptedOracle::act(const World& world) const {
  if (const auto* c = world.craft()) return act_craft(*c);
  return act_maze(*world.maze());
}

std::optional<Action> ScriptedOracle::act_craft(const CraftState& s) const {
  const std::string_view name = symbol_name(symbol_);
  auto gained = [&](Item i) {
    return s.count(i) > inventory_at_start_[static_cast<std::size_t>(i)];
  };
  auto is = [](Cell want) { return [want](Cell c) { return c == want; }; };

  if (name.starts_with("get ")) {
    const Cell want = name == "get wood" ? Cell::wood : name == "get grass" ? Cell::grass : Cell::iron;
    if (gained(*raw_item(want))) return std::nullopt;
    return fetch(s, is(want));
  }
  if (name == "use bridge" || name == "use axe") {
    const bool bridge = name == "use bridge";
    const Cell treasure = bridge ? Cell::gold : Cell::gem;
    const Cell barrier = bridge ? Cell::water : Cell::stone;
    if (gained(*raw_item(treasure))) return std::nullopt;
    if (any_adjacent_reachable(s, treasure)) return fetch(s, is(treasure));
    return fetch(s, is(barrier));
  }
  // use <station>: done once anything new appears in the inventory
  for (std::size_t i = 0; i < kNumItems; ++i) {
    if (s.inventory[i] > inventory_at_start_[i]) return std::nullopt;
  }
  const Cell station = name == "use toolshed"    ? Cell::toolshed
                       : name == "use workbench" ? Cell::workbench
                                                 : Cell::factory;
  return fetch(s, is(station));
}

std::optional<Action> ScriptedOracle::act_maze(const MazeState& s) const {
  const std::string_view name = symbol_name(symbol_);
  const Dir d = name == "left" ? Dir::left : name == "right" ? Dir::right : name == "up" ? Dir::up : Dir::down;
  const Room from = room_at_start_;
  const Room to{from.row + offset_of(d).drow, from.col + offset_of(d).dcol};
  if (const auto r = room_of(s.agent); r && *r == to) return std::nullopt;

  const Pos door = door_between(from, d);
  auto passable = [&](Pos p) { return maze_passable(s.at(p)); };
  bool arrived = false;

  if (s.at(door) == MazeCell::locked_door) {
    if (!s.has_key) {
      if (s.key_at(s.agent)) return Action::use;
      auto step = first_step(s.agent, kMazeSize, passable, [&](Pos p) { return s.key_at(p); }, &arrived);
      return step ? move(*step) : Action::use;
    }
    const Pos front = door + offset_of(d == Dir::up ? Dir::down : d == Dir::down ? Dir::up
                                       : d == Dir::left ? Dir::right : Dir::left);
    auto step = first_step(s.agent, kMazeSize, passable, [&](Pos p) { return p == front; }, &arrived);
    if (arrived) return s.facing == d ? Action::use : move(d);
    return step ? move(*step) : Action::use;
  }
  const Pos beyond = door + offset_of(d);
  auto step = first_step(s.agent, kMazeSize, passable, [&](Pos p) { return p == beyond; }, &arrived);
  return step ? move(*step) : Action::use;
}

OracleRun run_oracle(const Task& task, std::uint64_t seed) {
  World world = World::reset(task, seed);
  ScriptedOracle oracle;
  std::size_t index = 0;
  oracle.begin_symbol(world, task.sketch[index]);
  OracleRun run;
  const int cap = step_cap(task.kind);
  while (run.decisions < cap) {
    ++run.decisions;
    const auto action = oracle.act(world);
    if (!action) {
      if (++index == task.sketch.size()) break;
      oracle.begin_symbol(world, task.sketch[index]);
      continue;
    }
    const auto [reward, done] = world.step(*action);
    if (reward > 0.0) run.completed = true;
    if (done) break;
  }
  return run;
}

}  // namespace psketch::env
