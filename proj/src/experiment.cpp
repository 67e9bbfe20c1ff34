#include "psketch/experiment.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace psketch {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view experiment_mode_name(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::multitask: return "multitask";
    case ExperimentMode::ablation_critic: return "ablation_critic";
    case ExperimentMode::ablation_curriculum: return "ablation_curriculum";
    case ExperimentMode::zero_shot: return "zero_shot";
    case ExperimentMode::adaptation: return "adaptation";
    case ExperimentMode::baseline_joint: return "baseline_joint";
    case ExperimentMode::baseline_independent: return "baseline_independent";
  }
  return "?";
}

ExperimentMode parse_experiment_mode(std::string_view name) {
  for (auto m : {ExperimentMode::multitask, ExperimentMode::ablation_critic,
                 ExperimentMode::ablation_curriculum, ExperimentMode::zero_shot,
                 ExperimentMode::adaptation, ExperimentMode::baseline_joint,
                 ExperimentMode::baseline_independent}) {
    if (experiment_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown mode: " + std::string(name));
}

TaskList apply_filter(const TaskFilter& filter) {
  TaskList base;
  if (filter.names.empty()) {
    for (const auto& t : env::task_registry()) base.push_back(&t);
  } else {
    base = tasks_by_name(filter.names);
  }
  TaskList out;
  for (const auto* t : base) {
    if (filter.max_len && t->sketch.size() > *filter.max_len) continue;
    if (filter.env && t->kind != *filter.env) continue;
    if (filter.exclude_held_out && t->held_out) continue;
    out.push_back(t);
  }
  return out;
}

namespace {

env::EnvKind parse_env(const std::string& s) {
  if (s == "craft") return env::EnvKind::craft;
  if (s == "maze") return env::EnvKind::maze;
  throw ConfigError("unknown environment: " + s);
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json trainer_json(const TrainerConfig& c) {
  return {{"batch_size", c.batch_size},
          {"gamma", c.gamma},
          {"r_good", c.r_good},
          {"policy_step", c.policy_step},
          {"critic_step", c.critic_step},
          {"step_cap", c.step_cap},
          {"curriculum", curriculum_mode_name(c.curriculum_mode)},
          {"critic", critic_variant_name(c.critic_variant)},
          {"max_episodes", c.max_episodes},
          {"hidden", c.hidden},
          {"estimate_decay", c.estimate_decay},
          {"stop_at_mastery", c.stop_at_mastery},
          {"workers", c.workers}};
}

TrainerConfig trainer_from_json(const json& j) {
  reject_unknown(j, {"batch_size", "gamma", "r_good", "policy_step", "critic_step", "step_cap",
                     "curriculum", "critic", "max_episodes", "hidden", "estimate_decay",
                     "stop_at_mastery", "workers"},
                 "trainer");
  TrainerConfig c;
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "r_good", c.r_good);
  read_opt(j, "policy_step", c.policy_step);
  read_opt(j, "critic_step", c.critic_step);
  read_opt(j, "step_cap", c.step_cap);
  if (j.contains("curriculum")) c.curriculum_mode = parse_curriculum_mode(j.at("curriculum").get<std::string>());
  if (j.contains("critic")) c.critic_variant = parse_critic_variant(j.at("critic").get<std::string>());
  read_opt(j, "max_episodes", c.max_episodes);
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "estimate_decay", c.estimate_decay);
  read_opt(j, "stop_at_mastery", c.stop_at_mastery);
  read_opt(j, "workers", c.workers);
  return c;
}

}  // namespace

json ExperimentSpec::to_json() const {
  json tasks = json::object();
  if (!filter.names.empty()) tasks["names"] = filter.names;
  if (filter.max_len) tasks["max_len"] = *filter.max_len;
  if (filter.env) tasks["env"] = env::env_kind_name(*filter.env);
  tasks["exclude_held_out"] = filter.exclude_held_out;
  return {{"name", name},
          {"mode", experiment_mode_name(mode)},
          {"seed", trainer.seed},
          {"trainer", trainer_json(trainer)},
          {"tasks", tasks},
          {"heldout", heldout},
          {"variants", variants},
          {"checkpoint", checkpoint},
          {"eval_episodes", eval_episodes},
          {"adaptation_episodes", adaptation_episodes},
          {"checkpoint_every", checkpoint_every},
          {"output_dir", output_dir.string()}};
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  reject_unknown(j, {"name", "mode", "seed", "trainer", "tasks", "heldout", "variants", "checkpoint",
                     "eval_episodes", "adaptation_episodes", "checkpoint_every", "output_dir", "provenance"},
                 "spec");
  ExperimentSpec s;
  try {
    read_opt(j, "name", s.name);
    if (!j.contains("mode")) throw ConfigError("spec is missing 'mode'");
    s.mode = parse_experiment_mode(j.at("mode").get<std::string>());
    if (j.contains("trainer")) s.trainer = trainer_from_json(j.at("trainer"));
    read_opt(j, "seed", s.trainer.seed);
    if (j.contains("tasks")) {
      const auto& t = j.at("tasks");
      reject_unknown(t, {"names", "max_len", "env", "exclude_held_out"}, "tasks");
      read_opt(t, "names", s.filter.names);
      if (t.contains("max_len")) s.filter.max_len = t.at("max_len").get<std::size_t>();
      if (t.contains("env")) s.filter.env = parse_env(t.at("env").get<std::string>());
      read_opt(t, "exclude_held_out", s.filter.exclude_held_out);
    }
    read_opt(j, "heldout", s.heldout);
    read_opt(j, "variants", s.variants);
    read_opt(j, "checkpoint", s.checkpoint);
    read_opt(j, "eval_episodes", s.eval_episodes);
    read_opt(j, "adaptation_episodes", s.adaptation_episodes);
    read_opt(j, "checkpoint_every", s.checkpoint_every);
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed spec: ") + e.what());
  }

  s.trainer.validate();
  tasks_by_name(s.heldout);
  if (apply_filter(s.filter).empty()) throw ConfigError("task filter selects no tasks");
  const bool needs_heldout = s.mode == ExperimentMode::zero_shot || s.mode == ExperimentMode::adaptation;
  if (needs_heldout && s.heldout.empty()) {
    throw ConfigError(std::string(experiment_mode_name(s.mode)) + " mode needs 'heldout' tasks");
  }
  if (s.checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
  for (const auto& v : s.variants) {
    if (s.mode == ExperimentMode::ablation_critic) parse_critic_variant(v);
    else if (s.mode == ExperimentMode::ablation_curriculum) parse_curriculum_mode(v);
    else throw ConfigError("'variants' only applies to ablation modes");
  }
  return s;
}

std::string ExperimentSpec::hash() const {
  // Output location and worker count do not affect results, so they are
  // left out of the hash.
  json j = to_json();
  j.erase("output_dir");
  j["trainer"].erase("workers");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open spec " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentSpec::from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string Provenance::comment_line() const {
  return "# psketch " + version + " spec=" + spec_hash + " seed=" + std::to_string(seed) + "\n";
}

void Provenance::put(Checkpoint& ckpt) const {
  ckpt.put_string("provenance/spec_hash", spec_hash);
  ckpt.put_u64("provenance/seed", seed);
  ckpt.put_string("provenance/version", version);
}

Provenance provenance_of(const ExperimentSpec& spec) {
  return {spec.hash(), spec.trainer.seed, PSKETCH_VERSION};
}

double curve_auc(const std::vector<CurvePoint>& curve) {
  if (curve.empty() || curve.back().episodes == 0) return 0.0;
  double area = 0.0;
  std::uint64_t prev_ep = 0;
  double prev_v = 0.0;
  for (const auto& p : curve) {
    area += 0.5 * (prev_v + p.mean_estimate) * static_cast<double>(p.episodes - prev_ep);
    prev_ep = p.episodes;
    prev_v = p.mean_estimate;
  }
  return area / static_cast<double>(curve.back().episodes);
}

namespace {

void save_run_checkpoint(const Trainer& trainer, const RunOptions& o, std::uint64_t metrics_bytes,
                         const std::vector<CurvePoint>& curve) {
  Checkpoint c;
  trainer.save(c);
  o.provenance.put(c);
  c.put_u64("run/metrics_bytes", metrics_bytes);
  std::vector<std::uint64_t> eps;
  std::vector<double> vals;
  for (const auto& p : curve) {
    eps.push_back(p.episodes);
    vals.push_back(p.mean_estimate);
  }
  c.put_u64("run/curve_episodes", eps);
  c.put("run/curve_values", vals);
  c.save(o.dir / "checkpoint.bin");
}

void write_summary(const fs::path& path, const Trainer& trainer, const RunResult& r,
                   const Provenance& prov) {
  json est = json::object();
  for (const auto& [name, v] : r.final_estimates) est[name] = v;
  json j = {{"model", trainer.model().kind()},
            {"spec_hash", prov.spec_hash},
            {"seed", prov.seed},
            {"version", prov.version},
            {"episodes", r.episodes},
            {"train_steps", r.train_steps},
            {"mastery_episodes", r.mastery_episodes ? json(*r.mastery_episodes) : json(nullptr)},
            {"auc", curve_auc(r.curve)},
            {"wall_clock_seconds", r.seconds},
            {"final_reward_estimates", est}};
  std::ofstream f(path);
  f << j.dump(2) << '\n';
}

}  // namespace

RunResult run_training(Trainer& trainer, const RunOptions& o) {
  fs::create_directories(o.dir);
  const fs::path ckpt_path = o.dir / "checkpoint.bin";
  const fs::path metrics_path = o.dir / "metrics.csv";
  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;

  if (o.resume && fs::exists(ckpt_path)) {
    const Checkpoint c = Checkpoint::load(ckpt_path);
    if (c.string("provenance/spec_hash") != o.provenance.spec_hash) {
      throw CheckpointError("checkpoint in " + o.dir.string() + " was written for a different spec");
    }
    trainer.load(c);
    const auto bytes = c.u64("run/metrics_bytes");
    if (!fs::exists(metrics_path) || fs::file_size(metrics_path) < bytes) {
      throw CheckpointError("metrics file is shorter than the checkpoint expects");
    }
    fs::resize_file(metrics_path, bytes);
    const auto& eps = c.u64s("run/curve_episodes");
    const auto& vals = c.array("run/curve_values").values;
    for (std::size_t k = 0; k < eps.size() && k < vals.size(); ++k) result.curve.push_back({eps[k], vals[k]});
  } else {
    std::ofstream f(metrics_path, std::ios::trunc);
    f << o.provenance.comment_line() << metrics_csv_header();
  }

  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw ConfigError("cannot write " + metrics_path.string());
  while (auto report = trainer.advance()) {
    metrics << metrics_csv_rows(*report);
    metrics.flush();
    double mean = 0.0;
    for (const auto& row : report->rows) mean += row.reward_estimate;
    result.curve.push_back({report->episodes_elapsed, mean / static_cast<double>(report->rows.size())});
    if (o.on_step) o.on_step(*report);
    if (report->train_step % o.checkpoint_every == 0) {
      save_run_checkpoint(trainer, o, static_cast<std::uint64_t>(metrics.tellp()), result.curve);
    }
  }
  metrics.flush();
  save_run_checkpoint(trainer, o, static_cast<std::uint64_t>(metrics.tellp()), result.curve);

  result.episodes = trainer.episodes();
  result.train_steps = trainer.train_steps();
  result.mastery_episodes = trainer.mastery_episodes();
  for (const auto* t : trainer.tasks()) {
    result.final_estimates.emplace_back(t->name, trainer.curriculum().reward_estimates[t->id]);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_summary(o.dir / "summary.json", trainer, result, o.provenance);
  return result;
}

std::size_t checkpoint_hidden(const Checkpoint& c, std::size_t fallback) {
  return c.contains("trainer/hidden") ? c.u64("trainer/hidden") : fallback;
}

std::unique_ptr<PolicyModel> make_model(std::string_view kind, const TaskList& tasks,
                                        const TrainerConfig& config) {
  std::mt19937_64 init(config.seed);
  if (kind == "modular") {
    return std::make_unique<ModularModel>(PolicyFamily::create(init, config.hidden, config.policy_step));
  }
  if (kind == "joint") return std::make_unique<JointModel>(init, config.hidden, config.policy_step);
  if (kind == "independent") {
    return std::make_unique<IndependentModel>(tasks, init, config.hidden, config.policy_step);
  }
  throw ConfigError("unknown model kind: " + std::string(kind));
}

namespace {

std::string slug(const std::string& name) {
  std::string s = name;
  for (auto& ch : s) {
    if (ch == ' ') ch = '_';
  }
  return s;
}

struct Pipeline {
  const ExperimentSpec& spec;
  bool resume;
  const std::function<void(const std::string&)>& log;
  Provenance prov;
  std::vector<ReportRow> rows;

  void say(const std::string& msg) const {
    if (log) log(msg);
  }

  RunOptions options(const fs::path& dir) const {
    RunOptions o;
    o.dir = dir;
    o.provenance = prov;
    o.checkpoint_every = spec.checkpoint_every;
    o.resume = resume;
    return o;
  }

  std::uint64_t eval_seed() const { return derive_seed(spec.trainer.seed, 1000); }

  TaskList training_tasks() const {
    TaskList out;
    for (const auto* t : apply_filter(spec.filter)) {
      if (std::find(spec.heldout.begin(), spec.heldout.end(), t->name) == spec.heldout.end()) out.push_back(t);
    }
    if (out.empty()) throw ConfigError("no training tasks remain after removing held-out tasks");
    return out;
  }

  Trainer train(std::string_view kind, const TrainerConfig& config, const TaskList& tasks,
                const fs::path& dir, RunResult* result = nullptr) {
    Trainer trainer(config, tasks, make_model(kind, tasks, config));
    say("training " + std::string(kind) + " on " + std::to_string(tasks.size()) + " tasks -> " + dir.string());
    RunResult r = run_training(trainer, options(dir));
    say("  " + std::to_string(r.episodes) + " episodes, " + std::to_string(r.train_steps) + " steps");
    if (result) *result = std::move(r);
    return trainer;
  }

  void evaluate(const PolicyModel& model, const TaskList& tasks, const std::string& model_name,
                const std::string& condition, std::uint64_t episodes) {
    for (const auto* t : tasks) {
      const double c = completion_rate(model, *t, spec.eval_episodes, eval_seed(), spec.trainer.step_cap);
      rows.push_back({model_name, condition, t->name, c, episodes});
    }
  }

  std::shared_ptr<const PolicyFamily> pretrained_family(std::uint64_t& episodes) {
    PolicyFamily family;
    if (!spec.checkpoint.empty()) {
      std::mt19937_64 init(spec.trainer.seed);
      const Checkpoint c = Checkpoint::load(spec.checkpoint);
      const std::size_t hidden = checkpoint_hidden(c, spec.trainer.hidden);
      ModularModel model(PolicyFamily::create(init, hidden, spec.trainer.policy_step));
      model.load(c);
      episodes = c.contains("trainer/episodes") ? c.u64("trainer/episodes") : 0;
      say("loaded subpolicies from " + spec.checkpoint);
      return std::make_shared<const PolicyFamily>(model.family());
    }
    Trainer trainer = train("modular", spec.trainer, training_tasks(), spec.output_dir / "train");
    episodes = trainer.episodes();
    return std::make_shared<const PolicyFamily>(static_cast<const ModularModel&>(trainer.model()).family());
  }

  TrainerConfig adaptation_config() const {
    TrainerConfig c = spec.trainer;
    c.max_episodes = spec.adaptation_episodes;
    c.stop_at_mastery = false;
    return c;
  }

  void run() {
    const TaskList heldout = tasks_by_name(spec.heldout);
    switch (spec.mode) {
      case ExperimentMode::multitask: {
        const TaskList tasks = training_tasks();
        Trainer t = train("modular", spec.trainer, tasks, spec.output_dir);
        evaluate(t.model(), tasks, "modular", "multitask", t.episodes());
        break;
      }
      case ExperimentMode::ablation_critic:
      case ExperimentMode::ablation_curriculum: {
        const bool critic = spec.mode == ExperimentMode::ablation_critic;
        std::vector<std::string> arms = spec.variants;
        if (arms.empty()) {
          arms = critic ? std::vector<std::string>{"state_and_task", "state_only", "task_only", "constant"}
                        : std::vector<std::string>{"length_and_weight", "length_only", "weight_only", "uniform"};
        }
        const TaskList tasks = training_tasks();
        std::ostringstream table;
        table << std::setprecision(6) << prov.comment_line()
              << "variant,auc,mastery_episodes,episodes,final_mean_estimate\n";
        for (const auto& arm : arms) {
          TrainerConfig c = spec.trainer;
          if (critic) c.critic_variant = parse_critic_variant(arm);
          else c.curriculum_mode = parse_curriculum_mode(arm);
          RunResult r;
          Trainer t = train("modular", c, tasks, spec.output_dir / arm, &r);
          double mean = 0.0;
          for (const auto& [_, v] : r.final_estimates) mean += v;
          mean /= static_cast<double>(r.final_estimates.size());
          table << arm << ',' << curve_auc(r.curve) << ','
                << (r.mastery_episodes ? std::to_string(*r.mastery_episodes) : std::string()) << ','
                << r.episodes << ',' << mean << '\n';
          evaluate(t.model(), tasks, "modular[" + arm + "]", "multitask", t.episodes());
        }
        std::ofstream(spec.output_dir / "ablation.csv") << table.str();
        break;
      }
      case ExperimentMode::zero_shot: {
        std::uint64_t episodes = 0;
        const auto family = pretrained_family(episodes);
        for (const auto* h : heldout) {
          const double c = zero_shot_eval(*family, *h, training_tasks(), spec.eval_episodes, eval_seed(),
                                          spec.trainer.step_cap);
          rows.push_back({"modular", "zero_shot", h->name, c, episodes});
        }
        break;
      }
      case ExperimentMode::adaptation: {
        std::uint64_t episodes = 0;
        const auto family = pretrained_family(episodes);
        for (const auto* h : heldout) {
          const TrainerConfig c = adaptation_config();
          std::mt19937_64 init(derive_seed(c.seed, 5));
          Trainer t(c, {h}, std::make_unique<MetaModel>(family, h->kind, init, c.hidden, c.policy_step));
          say("adapting to " + h->name);
          run_training(t, options(spec.output_dir / ("adapt_" + slug(h->name))));
          evaluate(t.model(), {h}, "modular", "adaptation", t.episodes());
        }
        break;
      }
      case ExperimentMode::baseline_joint: {
        const TaskList tasks = training_tasks();
        Trainer t = train("joint", spec.trainer, tasks, spec.output_dir);
        evaluate(t.model(), tasks, "joint", "multitask", t.episodes());
        evaluate(t.model(), heldout, "joint", "zero_shot", t.episodes());
        break;
      }
      case ExperimentMode::baseline_independent: {
        const TaskList tasks = training_tasks();
        Trainer t = train("independent", spec.trainer, tasks, spec.output_dir);
        evaluate(t.model(), tasks, "independent", "multitask", t.episodes());
        for (const auto* h : heldout) {
          Trainer a = train("independent", adaptation_config(), {h},
                            spec.output_dir / ("adapt_" + slug(h->name)));
          evaluate(a.model(), {h}, "independent", "adaptation", a.episodes());
        }
        break;
      }
    }
  }
};

}  // namespace

std::vector<ReportRow> run_experiment(const ExperimentSpec& spec, bool resume,
                                      const std::function<void(const std::string&)>& log) {
  fs::create_directories(spec.output_dir);
  Pipeline p{spec, resume, log, provenance_of(spec), {}};
  nlohmann::json doc = spec.to_json();
  doc["provenance"] = {{"spec_hash", p.prov.spec_hash}, {"seed", p.prov.seed}, {"version", p.prov.version}};
  std::ofstream(spec.output_dir / "spec.json") << doc.dump(2) << '\n';
  p.run();
  std::ofstream(spec.output_dir / "report.csv") << p.prov.comment_line() << report_csv(p.rows);
  return p.rows;
}

}  // namespace psketch
