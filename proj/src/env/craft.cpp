#include "psketch/env/craft.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <sstream>
#include <stdexcept>

namespace psketch::env {

namespace {

constexpr std::size_t idx(Pos p) { return static_cast<std::size_t>(p.row * kCraftSize + p.col); }

bool in_grid(Pos p) { return p.row >= 0 && p.row < kCraftSize && p.col >= 0 && p.col < kCraftSize; }

constexpr std::array<Dir, 4> kDirs = {Dir::up, Dir::down, Dir::left, Dir::right};

// Objects that must be usable from the start region: every raw material,
// station, and the barrier cells guarding gold and gem.
bool needs_access(Cell c) {
  switch (c) {
    case Cell::water: case Cell::stone: case Cell::wood: case Cell::grass: case Cell::iron:
    case Cell::toolshed: case Cell::workbench: case Cell::factory:
      return true;
    default:
      return false;
  }
}

bool layout_is_solvable(const CraftState& s) {
  const auto reach = craft_reachable(s);
  for (int r = 0; r < kCraftSize; ++r) {
    for (int c = 0; c < kCraftSize; ++c) {
      const Pos p{r, c};
      const Cell cell = s.at(p);
      if (!needs_access(cell) && cell != Cell::gold && cell != Cell::gem) continue;
      bool touched = false;
      for (Dir d : kDirs) {
        const Pos n = p + offset_of(d);
        if (in_grid(n) && reach[idx(n)]) touched = true;
      }
      if (needs_access(cell) && !touched) return false;
      if ((cell == Cell::gold || cell == Cell::gem) && touched) return false;
    }
  }
  return true;
}

Cell station_cell_for(Item i) {
  switch (i) {
    case Item::plank: case Item::rope: case Item::axe: return Cell::toolshed;
    case Item::stick: case Item::bed: case Item::shears: return Cell::workbench;
    default: return Cell::factory;
  }
}

}  // namespace

Cell CraftState::at(Pos p) const {
  if (!in_grid(p)) return Cell::boundary;
  return grid[idx(p)];
}

const std::vector<Recipe>& craft_recipes() {
  static const std::vector<Recipe> recipes = [] {
    std::vector<Recipe> r;
    auto add = [&](Item out, std::vector<Item> in) {
      r.push_back({out, station_cell_for(out), std::move(in)});
    };
    add(Item::plank, {Item::wood});
    add(Item::stick, {Item::wood});
    add(Item::cloth, {Item::grass});
    add(Item::rope, {Item::grass});
    add(Item::bridge, {Item::wood, Item::iron});
    add(Item::bed, {Item::plank, Item::grass});
    add(Item::axe, {Item::stick, Item::iron});
    add(Item::shears, {Item::stick, Item::iron});
    return r;
  }();
  return recipes;
}

bool craft_passable(Cell c) { return c == Cell::empty; }

std::optional<Item> raw_item(Cell c) {
  switch (c) {
    case Cell::wood: return Item::wood;
    case Cell::grass: return Item::grass;
    case Cell::iron: return Item::iron;
    case Cell::gold: return Item::gold;
    case Cell::gem: return Item::gem;
    default: return std::nullopt;
  }
}

std::vector<bool> craft_reachable(const CraftState& s) {
  std::vector<bool> seen(s.grid.size(), false);
  std::deque<Pos> queue{s.agent};
  seen[idx(s.agent)] = true;
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    for (Dir d : kDirs) {
      const Pos n = p + offset_of(d);
      if (!in_grid(n) || seen[idx(n)] || !craft_passable(s.at(n))) continue;
      seen[idx(n)] = true;
      queue.push_back(n);
    }
  }
  return seen;
}

CraftState craft_reset(const Task& task, std::uint64_t seed) {
  if (task.kind != EnvKind::craft) throw std::invalid_argument("craft_reset: not a crafting task");
  std::mt19937_64 rng(seed);
  const Item goal = std::get<CraftGoal>(task.goal).item;

  constexpr int lo = 1;
  constexpr int hi = kCraftSize - 2;
  for (;;) {
    CraftState s;
    s.goal = goal;
    for (int r = 0; r < kCraftSize; ++r) {
      for (int c = 0; c < kCraftSize; ++c) {
        const bool edge = r == 0 || c == 0 || r == kCraftSize - 1 || c == kCraftSize - 1;
        s.at({r, c}) = edge ? Cell::boundary : Cell::empty;
      }
    }

    // Gold and gem each sit in an interior corner, sealed by their barrier.
    std::array<Pos, 4> corners = {Pos{lo, lo}, Pos{lo, hi}, Pos{hi, lo}, Pos{hi, hi}};
    std::shuffle(corners.begin(), corners.end(), rng);
    auto seal = [&](Pos corner, Cell treasure, Cell barrier) {
      s.at(corner) = treasure;
      for (Dir d : kDirs) {
        const Pos n = corner + offset_of(d);
        if (s.at(n) == Cell::empty) s.at(n) = barrier;
      }
    };
    seal(corners[0], Cell::gold, Cell::water);
    seal(corners[1], Cell::gem, Cell::stone);

    std::vector<Pos> free;
    for (int r = lo; r <= hi; ++r) {
      for (int c = lo; c <= hi; ++c) {
        if (s.at({r, c}) == Cell::empty) free.push_back({r, c});
      }
    }
    std::shuffle(free.begin(), free.end(), rng);
    std::size_t next = 0;
    for (Cell material : {Cell::wood, Cell::grass, Cell::iron}) {
      for (int k = 0; k < kCraftMaterialCopies; ++k) s.at(free[next++]) = material;
    }
    for (Cell station : {Cell::toolshed, Cell::workbench, Cell::factory}) {
      s.at(free[next++]) = station;
    }
    s.agent = free[next++];
    s.facing = kDirs[std::uniform_int_distribution<int>(0, 3)(rng)];
    if (layout_is_solvable(s)) return s;
  }
}

std::pair<double, bool> craft_step_inplace(CraftState& s, Action action) {
  const int goal_before = s.count(s.goal);
  if (action == Action::use) {
    const Pos target = s.agent + offset_of(s.facing);
    const Cell cell = s.at(target);
    if (auto item = raw_item(cell)) {
      ++s.inventory[static_cast<std::size_t>(*item)];
      s.at(target) = Cell::empty;
    } else if (cell == Cell::toolshed || cell == Cell::workbench || cell == Cell::factory) {
      const Recipe* best = nullptr;
      for (const Recipe& r : craft_recipes()) {
        if (r.station != cell) continue;
        const bool ok = std::ranges::all_of(r.inputs, [&](Item i) { return s.count(i) > 0; });
        if (ok && (best == nullptr || r.inputs.size() > best->inputs.size())) best = &r;
      }
      if (best != nullptr) {
        for (Item i : best->inputs) --s.inventory[static_cast<std::size_t>(i)];
        ++s.inventory[static_cast<std::size_t>(best->output)];
      }
    } else if (cell == Cell::water && s.count(Item::bridge) > 0) {
      --s.inventory[static_cast<std::size_t>(Item::bridge)];
      s.at(target) = Cell::empty;
    } else if (cell == Cell::stone && s.count(Item::axe) > 0) {
      s.at(target) = Cell::empty;
    }
  } else {
    const Dir d = static_cast<Dir>(action);
    s.facing = d;
    const Pos target = s.agent + offset_of(d);
    if (craft_passable(s.at(target))) s.agent = target;
  }
  ++s.steps_elapsed;
  if (s.count(s.goal) > goal_before) return {1.0, true};
  return {0.0, s.steps_elapsed >= kCraftStepCap};
}

CraftStep craft_step(const CraftState& state, Action action) {
  CraftStep out{state, 0.0, false};
  std::tie(out.reward, out.done) = craft_step_inplace(out.state, action);
  return out;
}

void craft_features_into(const CraftState& s, std::span<double> out) {
  if (out.size() != kCraftFeatureDim) throw std::invalid_argument("craft_features: bad buffer size");
  std::ranges::fill(out, 0.0);
  constexpr int half = kCraftWindow / 2;
  constexpr std::size_t kinds = kNumCellKinds - 1;
  for (int wr = 0; wr < kCraftWindow; ++wr) {
    for (int wc = 0; wc < kCraftWindow; ++wc) {
      const Cell c = s.at({s.agent.row + wr - half, s.agent.col + wc - half});
      if (c == Cell::empty) continue;
      const auto cell_index = static_cast<std::size_t>(wr * kCraftWindow + wc);
      out[cell_index * kinds + static_cast<std::size_t>(c) - 1] = 1.0;
    }
  }
  for (std::size_t i = 0; i < kNumItems; ++i) {
    out[kCraftWindowFeatures + i] =
        static_cast<double>(std::min(s.inventory[i], kInventoryCap)) / kInventoryCap;
  }
  out[kCraftWindowFeatures + kNumItems + static_cast<std::size_t>(s.facing)] = 1.0;
}

std::vector<double> craft_features(const CraftState& s) {
  std::vector<double> out(kCraftFeatureDim);
  craft_features_into(s, out);
  return out;
}

std::string craft_render(const CraftState& s) {
  static constexpr std::array<char, kNumCellKinds> glyph = {'.', '#', '~', '%', 'w', 'g',
                                                             'i', '$', '*', 'T', 'W', 'F'};
  static constexpr std::array<char, 4> agent_glyph = {'^', 'v', '<', '>'};
  std::ostringstream os;
  for (int r = 0; r < kCraftSize; ++r) {
    for (int c = 0; c < kCraftSize; ++c) {
      if (s.agent == Pos{r, c}) {
        os << agent_glyph[static_cast<std::size_t>(s.facing)];
      } else {
        os << glyph[static_cast<std::size_t>(s.at({r, c}))];
      }
    }
    os << '\n';
  }
  os << "inventory:";
  for (std::size_t i = 0; i < kNumItems; ++i) {
    if (s.inventory[i] > 0) os << ' ' << item_name(static_cast<Item>(i)) << '=' << s.inventory[i];
  }
  os << "\nstep " << s.steps_elapsed << " goal " << item_name(s.goal) << '\n';
  return os.str();
}

}  // namespace psketch::env
