// Command-line driver: train, eval and report over experiment specs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "psketch/experiment.hpp"

namespace fs = std::filesystem;
using namespace psketch;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Report files carry a leading "# ..." provenance line.
std::vector<ReportRow> parse_report(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<ReportRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw ConfigError("malformed report row in " + p.string() + ": " + line);
    rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stoull(f[4])});
  }
  return rows;
}

int cmd_train(const std::string& spec_path, const std::vector<std::string>& overrides,
              std::optional<std::uint64_t> seed, const std::string& out, std::optional<std::size_t> workers,
              bool deterministic, bool resume) {
  nlohmann::json doc = nlohmann::json::parse(read_file(spec_path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError(spec_path + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["seed"] = *seed;
  if (!out.empty()) doc["output_dir"] = out;
  if (workers) doc["trainer"]["workers"] = *workers;
  if (deterministic) doc["trainer"]["workers"] = 1;
  const ExperimentSpec spec = ExperimentSpec::from_json(doc);

  std::cerr << "spec " << spec.name << " (" << experiment_mode_name(spec.mode) << "), hash "
            << spec.hash() << ", seed " << spec.trainer.seed << "\n";
  const auto rows = run_experiment(spec, resume, [](const std::string& m) { std::cerr << m << "\n"; });
  std::cout << provenance_of(spec).comment_line();
  std::cout << report_csv(rows);
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::vector<std::string>& task_names,
             std::size_t episodes, std::uint64_t seed, const std::string& condition) {
  const Checkpoint c = Checkpoint::load(ckpt_path);
  const std::string kind = c.string("model/kind");
  std::vector<std::string> trained;
  {
    std::istringstream in(c.string("trainer/tasks"));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) trained.push_back(line);
    }
  }
  const TaskList trained_tasks = tasks_by_name(trained);
  const TaskList eval_tasks = task_names.empty() ? trained_tasks : tasks_by_name(task_names);

  TrainerConfig config;
  config.seed = c.contains("provenance/seed") ? c.u64("provenance/seed") : 0;
  config.hidden = checkpoint_hidden(c, config.hidden);
  auto model = make_model(kind, trained_tasks, config);
  model->load(c);

  std::vector<ReportRow> rows;
  const std::uint64_t trained_episodes = c.u64("trainer/episodes");
  for (const auto* t : eval_tasks) {
    double rate = 0.0;
    if (kind == "modular") {
      const auto& family = static_cast<const ModularModel&>(*model).family();
      const bool is_trained = std::find(trained_tasks.begin(), trained_tasks.end(), t) != trained_tasks.end();
      rate = is_trained ? completion_rate(*model, *t, episodes, seed, 100)
                        : zero_shot_eval(family, *t, trained_tasks, episodes, seed);
    } else {
      rate = completion_rate(*model, *t, episodes, seed, 100);
    }
    rows.push_back({kind, condition, t->name, rate, trained_episodes});
  }
  if (c.contains("provenance/spec_hash")) {
    const Provenance prov{c.string("provenance/spec_hash"), c.u64("provenance/seed"), c.string("provenance/version")};
    std::cout << prov.comment_line();
  }
  std::cout << report_csv(rows);
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  // One row per (model, condition): mean completion over tasks and runs.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> cells;
  std::vector<ReportRow> all;
  for (const auto& r : runs) {
    const fs::path p = fs::is_directory(r) ? fs::path(r) / "report.csv" : fs::path(r);
    for (auto& row : parse_report(p)) {
      auto& cell = cells[{row.model, row.condition}];
      cell.first += row.completion_rate;
      cell.second += 1;
      all.push_back(std::move(row));
    }
  }
  std::ostringstream os;
  os << std::setprecision(3) << std::fixed;
  os << "model,condition,mean_completion,rows\n";
  for (const auto& [key, cell] : cells) {
    os << key.first << ',' << key.second << ',' << cell.first / cell.second << ',' << cell.second << '\n';
  }
  std::cout << os.str();
  if (!out.empty()) std::ofstream(out) << report_csv(all);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular multitask policies from policy sketches"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run an experiment spec");
  std::string spec_path, out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool deterministic = false, resume = false;
  train->add_option("--spec", spec_path, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "override the spec's seed");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--workers", workers, "episode collection threads");
  train->add_flag("--deterministic", deterministic, "single worker");
  train->add_flag("--resume", resume, "continue from checkpoints in the output directory");
  train->add_option("--set", overrides, "override spec fields, e.g. trainer.max_episodes=100000");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt;
  std::vector<std::string> tasks;
  std::size_t episodes = 500;
  std::uint64_t eval_seed = 1;
  std::string condition = "multitask";
  eval->add_option("--checkpoint", ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--task", tasks, "task name (repeatable; default: the trained tasks)");
  eval->add_option("--episodes", episodes, "episodes per task");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--condition", condition, "condition label for the report")
      ->check(CLI::IsMember({"multitask", "zero_shot", "adaptation"}));

  auto* report = app.add_subcommand("report", "summarise report.csv files into a table");
  std::vector<std::string> runs;
  std::string report_out;
  report->add_option("runs", runs, "run directories or report files")->required();
  report->add_option("--out", report_out, "also write the concatenated rows here");

  auto* list = app.add_subcommand("tasks", "print the task registry");
  auto* render = app.add_subcommand("render", "print an initial layout");
  std::string render_task;
  std::uint64_t render_seed = 0;
  render->add_option("--task", render_task, "task name")->required();
  render->add_option("--seed", render_seed, "layout seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(spec_path, overrides, seed, out_dir, workers, deterministic, resume);
    if (*eval) return cmd_eval(ckpt, tasks, episodes, eval_seed, condition);
    if (*report) return cmd_report(runs, report_out);
    if (*list) {
      std::cout << env::registry_table();
      return 0;
    }
    if (*render) {
      std::cout << env::World::reset(env::find_task(render_task), render_seed).render();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
