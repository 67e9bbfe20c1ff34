#include "psketch/baselines.hpp"

#include <algorithm>
#include <map>
#include <iomanip>
#include <sstream>

namespace psketch {

namespace {

void save_learner(Checkpoint& ckpt, const std::string& base, const LearnerNet& ln) {
  const auto& sh = ln.net.shape();
  ckpt.put_u64(base + "shape", {sh.input, sh.hidden, sh.output});
  ckpt.put(base + "params", ln.net.flat());
  ckpt.put(base + "rms", ln.optimizer.mean_square);
}

void load_learner(const Checkpoint& ckpt, const std::string& base, LearnerNet& ln) {
  const auto& sh = ln.net.shape();
  if (ckpt.u64s(base + "shape") != std::vector<std::uint64_t>{sh.input, sh.hidden, sh.output}) {
    throw CheckpointError("checkpoint: network shape mismatch at " + base);
  }
  ckpt.read_into(base + "params", ln.net.flat());
  ckpt.read_into(base + "rms", ln.optimizer.mean_square);
}

// Accumulates advantage-weighted log-prob gradients per network, then clips
// and applies each network's step.
template <class NetOf>
void update_learners(const Dataset& data, std::span<const double> advantages, std::size_t batch_size,
                     NetOf&& net_of) {
  if (advantages.size() != data.transitions) {
    throw nn::ContractViolation("update: one advantage per transition required");
  }
  std::map<LearnerNet*, nn::GradientBundle> grads;
  nn::ForwardCache cache;
  const double inv_d = 1.0 / static_cast<double>(batch_size);
  std::size_t k = 0;
  for (const auto& r : data.rollouts) {
    for (const auto& t : r.transitions) {
      LearnerNet& ln = net_of(t);
      auto it = grads.find(&ln);
      if (it == grads.end()) it = grads.emplace(&ln, nn::GradientBundle(ln.net.shape())).first;
      nn::forward_into(ln.net, t.input(), cache);
      nn::accumulate_logprob_gradient(ln.net, cache, t.action, advantages[k] * inv_d, it->second);
      ++k;
    }
  }
  for (auto& [ln, g] : grads) {
    nn::clip_to_unit_norm(g.flat());
    nn::rmsprop_apply(ln->net.flat(), g.flat(), ln->optimizer);
  }
}

class NetController : public SubpolicyController {
 public:
  NetController(const nn::DenseNet& net, std::vector<double> suffix = {})
      : net_(net), suffix_(std::move(suffix)) {}

  std::size_t choose(env::SymbolId, std::span<const double> features, const env::World&,
                     std::mt19937_64& rng) override {
    input_.assign(features.begin(), features.end());
    input_.insert(input_.end(), suffix_.begin(), suffix_.end());
    nn::forward_into(net_, input_, cache_);
    nn::softmax_into(cache_.logits, probs_);
    return sample_index(probs_, rng);
  }

 private:
  const nn::DenseNet& net_;
  std::vector<double> suffix_;
  std::vector<double> input_;
  nn::ForwardCache cache_;
  std::vector<double> probs_;
};

}  // namespace

LearnerNet LearnerNet::random(nn::DenseShape shape, std::mt19937_64& rng, double step_size) {
  return {nn::DenseNet::random(shape, rng), nn::RmsPropState(shape.total(), step_size)};
}

IndependentModel::IndependentModel(const TaskList& tasks, std::mt19937_64& rng, std::size_t hidden,
                                   double step_size)
    : nets_(env::task_registry().size()) {
  for (const auto* t : tasks) {
    if (nets_[t->id]) continue;
    nets_[t->id] = LearnerNet::random({env::feature_dim(t->kind), hidden, env::kNumActions}, rng, step_size);
  }
}

const LearnerNet& IndependentModel::net_for(std::size_t task_id) const {
  if (task_id >= nets_.size() || !nets_[task_id]) {
    throw ConfigError("independent model has no network for task id " + std::to_string(task_id));
  }
  return *nets_[task_id];
}

Rollout IndependentModel::rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                                  double gamma) const {
  NetController controller(net_for(task.id).net);
  return run_sketch(controller, task, seed, step_cap, gamma);
}

void IndependentModel::update(const Dataset& data, std::span<const double> advantages,
                              std::size_t batch_size) {
  update_learners(data, advantages, batch_size, [&](const Transition& t) -> LearnerNet& {
    net_for(t.task_id);
    return *nets_[t.task_id];
  });
}

void IndependentModel::save(Checkpoint& ckpt) const {
  for (std::size_t id = 0; id < nets_.size(); ++id) {
    if (nets_[id]) save_learner(ckpt, "independent/" + std::to_string(id) + "/", *nets_[id]);
  }
}

void IndependentModel::load(const Checkpoint& ckpt) {
  for (std::size_t id = 0; id < nets_.size(); ++id) {
    if (nets_[id]) load_learner(ckpt, "independent/" + std::to_string(id) + "/", *nets_[id]);
  }
}

std::size_t sketch_encoding_dim() { return env::vocabulary_size() * (1 + kSketchPositions); }

std::vector<double> sketch_encoding(const env::Task& task) {
  const std::size_t v = env::vocabulary_size();
  std::vector<double> enc(sketch_encoding_dim(), 0.0);
  for (std::size_t pos = 0; pos < task.sketch.size(); ++pos) {
    const std::size_t s = task.sketch[pos].id;
    enc[s] += 1.0;
    if (pos < kSketchPositions) enc[v * (1 + pos) + s] = 1.0;
  }
  return enc;
}

JointModel::JointModel(std::mt19937_64& rng, std::size_t hidden, double step_size) {
  for (auto kind : {env::EnvKind::craft, env::EnvKind::maze}) {
    nets_.push_back(LearnerNet::random({env::feature_dim(kind) + sketch_encoding_dim(), hidden,
                                        env::kNumActions},
                                       rng, step_size));
  }
}

std::vector<double> JointModel::policy_input(const env::Task& task,
                                             std::span<const double> features) const {
  std::vector<double> x(features.begin(), features.end());
  const auto enc = sketch_encoding(task);
  x.insert(x.end(), enc.begin(), enc.end());
  return x;
}

Rollout JointModel::rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                            double gamma) const {
  NetController controller(net_for(task.kind).net, sketch_encoding(task));
  Rollout r = run_sketch(controller, task, seed, step_cap, gamma);
  for (auto& t : r.transitions) t.policy_input = policy_input(task, t.features);
  return r;
}

void JointModel::update(const Dataset& data, std::span<const double> advantages,
                        std::size_t batch_size) {
  update_learners(data, advantages, batch_size, [&](const Transition& t) -> LearnerNet& {
    return nets_[static_cast<std::size_t>(env::task_by_id(t.task_id).kind)];
  });
}

void JointModel::save(Checkpoint& ckpt) const {
  for (std::size_t k = 0; k < nets_.size(); ++k) save_learner(ckpt, "joint/" + std::to_string(k) + "/", nets_[k]);
}

void JointModel::load(const Checkpoint& ckpt) {
  for (std::size_t k = 0; k < nets_.size(); ++k) load_learner(ckpt, "joint/" + std::to_string(k) + "/", nets_[k]);
}

Rollout run_meta_episode(const PolicyFamily& family, MetaController& meta, const env::Task& task,
                         std::uint64_t seed, int step_cap, double gamma, std::size_t max_decisions,
                         int option_cap) {
  Rollout rollout;
  rollout.task_id = task.id;
  const auto choices = env::symbols_of(task.kind);
  env::World world = env::World::reset(task, seed);
  std::mt19937_64 act_rng(derive_seed(seed, 1));
  std::mt19937_64 meta_rng(derive_seed(seed, 3));
  std::vector<double> features(world.feature_dim());
  nn::ForwardCache cache;
  std::vector<double> probs;
  int steps = 0;
  bool done = false;

  for (std::size_t d = 0; d < max_decisions && steps < step_cap && !done; ++d) {
    world.features_into(features);
    const auto choice = meta.choose(features, d, meta_rng);
    if (!choice) break;
    if (*choice >= choices.size()) throw nn::ContractViolation("meta choice out of range");

    Transition t;
    t.features = features;
    t.action = static_cast<std::uint16_t>(*choice);
    t.task_id = task.id;
    t.step_index = static_cast<std::uint32_t>(steps);
    const auto& net = family.at(choices[*choice]).net;
    for (int k = 0; k < option_cap && steps < step_cap; ++k) {
      world.features_into(features);
      nn::forward_into(net, features, cache);
      nn::softmax_into(cache.logits, probs);
      const std::size_t a = sample_index(probs, act_rng);
      ++steps;
      if (a == env::kStopIndex) break;
      const auto [reward, finished] = world.step(static_cast<env::Action>(a));
      t.reward += reward;
      if (finished) {
        done = true;
        break;
      }
    }
    rollout.total_reward += t.reward;
    rollout.subpolicy_boundaries.push_back(rollout.transitions.size());
    rollout.transitions.push_back(std::move(t));
  }
  rollout.completed = rollout.total_reward > 0.0;
  fill_returns(rollout, gamma);
  return rollout;
}

namespace {

class SampledMeta : public MetaController {
 public:
  explicit SampledMeta(const nn::DenseNet& net) : net_(net) {}
  std::optional<std::size_t> choose(std::span<const double> features, std::size_t,
                                    std::mt19937_64& rng) override {
    nn::forward_into(net_, features, cache_);
    nn::softmax_into(cache_.logits, probs_);
    return sample_index(probs_, rng);
  }

 private:
  const nn::DenseNet& net_;
  nn::ForwardCache cache_;
  std::vector<double> probs_;
};

}  // namespace

MetaModel::MetaModel(std::shared_ptr<const PolicyFamily> family, env::EnvKind kind,
                     std::mt19937_64& rng, std::size_t hidden, double step_size,
                     std::size_t max_decisions, int option_cap)
    : family_(std::move(family)),
      env_kind_(kind),
      choices_(env::symbols_of(kind)),
      max_decisions_(max_decisions),
      option_cap_(option_cap) {
  if (!family_) throw ConfigError("meta model needs a subpolicy family");
  for (auto s : choices_) family_->at(s);
  net_ = LearnerNet::random({env::feature_dim(kind), hidden, choices_.size()}, rng, step_size);
}

Rollout MetaModel::rollout(const env::Task& task, std::uint64_t seed, int step_cap,
                           double gamma) const {
  if (task.kind != env_kind_) throw ConfigError("meta model trained for a different environment");
  SampledMeta meta(net_.net);
  return run_meta_episode(*family_, meta, task, seed, step_cap, gamma, max_decisions_, option_cap_);
}

void MetaModel::update(const Dataset& data, std::span<const double> advantages,
                       std::size_t batch_size) {
  update_learners(data, advantages, batch_size, [&](const Transition&) -> LearnerNet& { return net_; });
}

void MetaModel::save(Checkpoint& ckpt) const { save_learner(ckpt, "meta/", net_); }

void MetaModel::load(const Checkpoint& ckpt) { load_learner(ckpt, "meta/", net_); }

double zero_shot_eval(const PolicyFamily& family, const env::Task& heldout,
                      const TaskList& training_tasks, std::size_t episodes, std::uint64_t seed_base,
                      int step_cap) {
  for (auto s : heldout.sketch) {
    const bool seen = std::ranges::any_of(training_tasks, [&](const env::Task* t) {
      return std::ranges::find(t->sketch, s) != t->sketch.end();
    });
    if (!seen) {
      throw ConfigError("held-out task " + heldout.name + " uses untrained symbol " +
                        std::string(env::symbol_name(s)));
    }
  }
  if (episodes == 0) return 0.0;
  std::size_t done = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    if (run_episode(family, heldout, derive_seed(seed_base, k), step_cap).completed) ++done;
  }
  return static_cast<double>(done) / static_cast<double>(episodes);
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "model,condition,task,completion_rate,episodes\n";
  for (const auto& r : rows) {
    os << r.model << ',' << r.condition << ',' << r.task << ',' << r.completion_rate << ','
       << r.episodes << '\n';
  }
  return os.str();
}

}  // namespace psketch
