#include "psketch/env/task.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace psketch::env {

namespace {

constexpr std::array<std::string_view, 12> kVocabulary = {
    "get wood",  "get grass",  "get iron",   "use toolshed", "use workbench", "use factory",
    "use bridge", "use axe",   "left",       "right",        "up",            "down",
};
constexpr std::size_t kFirstMazeSymbol = 8;

std::vector<SymbolId> sketch_of(std::initializer_list<std::string_view> names) {
  std::vector<SymbolId> out;
  for (auto n : names) out.push_back(symbol_by_name(n));
  return out;
}

Dir dir_of_symbol(std::string_view name) {
  if (name == "left") return Dir::left;
  if (name == "right") return Dir::right;
  if (name == "up") return Dir::up;
  return Dir::down;
}

std::vector<Task> build_registry() {
  std::vector<Task> tasks;
  auto craft = [&](std::string name, Item item, std::initializer_list<std::string_view> sk,
                   bool held_out = false) {
    Task t;
    t.id = tasks.size();
    t.name = std::move(name);
    t.sketch = sketch_of(sk);
    t.kind = EnvKind::craft;
    t.goal = CraftGoal{item};
    t.held_out = held_out;
    tasks.push_back(std::move(t));
  };
  auto maze = [&](std::string name, std::initializer_list<std::string_view> sk) {
    Task t;
    t.id = tasks.size();
    t.name = std::move(name);
    t.sketch = sketch_of(sk);
    t.kind = EnvKind::maze;
    MazeGoal g;
    for (auto s : sk) g.route.push_back(dir_of_symbol(s));
    t.goal = std::move(g);
    tasks.push_back(std::move(t));
  };

  craft("make plank", Item::plank, {"get wood", "use toolshed"});
  craft("make stick", Item::stick, {"get wood", "use workbench"});
  craft("make cloth", Item::cloth, {"get grass", "use factory"});
  craft("make rope", Item::rope, {"get grass", "use toolshed"});
  craft("make bridge", Item::bridge, {"get iron", "get wood", "use factory"});
  craft("make bed", Item::bed, {"get wood", "use toolshed", "get grass", "use workbench"}, true);
  craft("make axe", Item::axe, {"get wood", "use workbench", "get iron", "use toolshed"}, true);
  craft("make shears", Item::shears, {"get wood", "use workbench", "get iron", "use workbench"});
  craft("get gold", Item::gold, {"get iron", "get wood", "use factory", "use bridge"});
  craft("get gem", Item::gem,
        {"get wood", "use workbench", "get iron", "use toolshed", "use axe"});

  maze("room 1", {"left", "left"});
  maze("room 2", {"left", "down"});
  maze("room 3", {"right", "down"});
  maze("room 4", {"up", "left"});
  maze("room 5", {"up", "right"});
  maze("room 6", {"up", "right", "up"});
  maze("room 7", {"down", "right", "up"});
  maze("room 8", {"left", "left", "down"});
  maze("room 9", {"right", "down", "down"});
  maze("room 10", {"left", "up", "right"});
  return tasks;
}

}  // namespace

std::string_view action_name(std::size_t action_index) {
  static constexpr std::array<std::string_view, kNumActions + 1> names = {
      "up", "down", "left", "right", "use", "stop"};
  return action_index < names.size() ? names[action_index] : "?";
}

std::string_view env_kind_name(EnvKind kind) { return kind == EnvKind::craft ? "craft" : "maze"; }

std::string_view item_name(Item item) {
  static constexpr std::array<std::string_view, kNumItems> names = {
      "wood",  "grass",  "iron",  "gold", "gem", "plank", "stick",
      "cloth", "rope",   "bridge", "bed", "axe", "shears"};
  return names[static_cast<std::size_t>(item)];
}

const std::vector<Task>& task_registry() {
  static const std::vector<Task> tasks = build_registry();
  return tasks;
}

const Task& find_task(std::string_view name) {
  for (const auto& t : task_registry()) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("unknown task: " + std::string(name));
}

const Task& task_by_id(std::size_t id) {
  const auto& reg = task_registry();
  if (id >= reg.size()) throw std::out_of_range("task id out of range");
  return reg[id];
}

std::size_t vocabulary_size() { return kVocabulary.size(); }

std::string_view symbol_name(SymbolId s) {
  if (s.id >= kVocabulary.size()) throw std::out_of_range("symbol id out of range");
  return kVocabulary[s.id];
}

SymbolId symbol_by_name(std::string_view name) {
  auto it = std::ranges::find(kVocabulary, name);
  if (it == kVocabulary.end()) throw std::invalid_argument("unknown symbol: " + std::string(name));
  return SymbolId{static_cast<std::uint16_t>(it - kVocabulary.begin())};
}

EnvKind symbol_kind(SymbolId s) {
  return s.id < kFirstMazeSymbol ? EnvKind::craft : EnvKind::maze;
}

std::vector<SymbolId> symbols_of(EnvKind kind) {
  std::vector<SymbolId> out;
  for (std::uint16_t i = 0; i < kVocabulary.size(); ++i) {
    if (symbol_kind(SymbolId{i}) == kind) out.push_back(SymbolId{i});
  }
  return out;
}

std::size_t max_sketch_length(const std::vector<const Task*>& tasks) {
  std::size_t m = 0;
  for (const Task* t : tasks) m = std::max(m, t->sketch.size());
  return m;
}

std::string registry_table() {
  std::ostringstream os;
  os << "id\tgoal\tenv\theld_out\tsketch\n";
  for (const auto& t : task_registry()) {
    os << t.id << '\t' << t.name << '\t' << env_kind_name(t.kind) << '\t'
       << (t.held_out ? "yes" : "no") << '\t';
    for (std::size_t i = 0; i < t.sketch.size(); ++i) {
      if (i) os << ", ";
      os << symbol_name(t.sketch[i]);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace psketch::env
