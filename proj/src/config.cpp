#include "gflowlab/config.hpp"

#include <limits>
#include <set>
#include <tuple>

#include "json.hpp"

#include "gflowlab/envs/grid.hpp"
#include "gflowlab/envs/sequence.hpp"
#include "gflowlab/envs/toy_dag.hpp"
#include "gflowlab/error.hpp"
#include "gflowlab/reward_table.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {
namespace {

using nlohmann::json;

// Sequence reward (after the exponent) at which an object counts as a mode.
constexpr double kSequenceModeThreshold = 0.5;

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
    }
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <typename T>
void read(const json& obj, const std::string& path, const std::string& key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string where = join(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(where + ": expected a boolean");
    out = it->get<bool>();
  } else if constexpr (std::is_same_v<T, int>) {
    if (!it->is_number_integer()) throw ConfigError(where + ": expected an integer");
    const auto v = it->get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError(where + ": integer out of range");
    }
    out = static_cast<int>(v);
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!it->is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
    out = it->get<std::uint64_t>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!it->is_number()) throw ConfigError(where + ": expected a number");
    out = it->get<double>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ConfigError(where + ": expected a string");
    out = it->get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<int>>) {
    if (!it->is_array()) throw ConfigError(where + ": expected an array of integers");
    out.clear();
    for (const auto& v : *it) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an array of integers");
      out.push_back(v.get<int>());
    }
  } else if constexpr (std::is_same_v<T, std::vector<std::vector<int>>>) {
    if (!it->is_array()) throw ConfigError(where + ": expected an array of integer arrays");
    out.clear();
    for (const auto& row : *it) {
      if (!row.is_array()) throw ConfigError(where + ": expected an array of integer arrays");
      std::vector<int> r;
      for (const auto& v : row) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an array of integer arrays");
        r.push_back(v.get<int>());
      }
      out.push_back(std::move(r));
    }
  } else {
    static_assert(sizeof(T) == 0, "unsupported config type");
  }
}

void parse_env(const json& j, EnvConfig& env) {
  const std::string path = "env";
  read(j, path, "type", env.type);
  if (env.type == "grid") {
    check_keys(j, path, {"type", "dim", "size", "r0"});
    read(j, path, "dim", env.dim);
    read(j, path, "size", env.size);
    read(j, path, "r0", env.r0);
    if (env.dim < 1) throw ConfigError("env.dim: must be >= 1");
    if (env.size < 2) throw ConfigError("env.size: must be >= 2");
    if (!(env.r0 > 0.0)) throw ConfigError("env.r0: must be > 0");
  } else if (env.type == "bag") {
    check_keys(j, path, {"type", "num_items", "capacity", "repeat_threshold", "high_reward", "low_reward",
                         "high_probability", "base_reward", "seed"});
    read(j, path, "num_items", env.bag.num_items);
    read(j, path, "capacity", env.bag.capacity);
    read(j, path, "repeat_threshold", env.bag.repeat_threshold);
    read(j, path, "high_reward", env.bag.high_reward);
    read(j, path, "low_reward", env.bag.low_reward);
    read(j, path, "high_probability", env.bag.high_probability);
    read(j, path, "base_reward", env.bag.base_reward);
  } else if (env.type == "sequence") {
    check_keys(j, path, {"type", "length", "alphabet", "exponent", "table", "seed"});
    read(j, path, "length", env.length);
    read(j, path, "alphabet", env.alphabet);
    env.exponent = env.length <= 8 ? 3.0 : 8.0;
    read(j, path, "exponent", env.exponent);
    read(j, path, "table", env.table);
    if (env.length < 1) throw ConfigError("env.length: must be >= 1");
    if (env.alphabet.size() < 2) throw ConfigError("env.alphabet: needs at least two letters");
    if (!(env.exponent > 0.0)) throw ConfigError("env.exponent: must be > 0");
  } else if (env.type == "toy") {
    check_keys(j, path, {"type"});
  } else {
    throw ConfigError("env.type: expected one of grid, bag, sequence, toy");
  }
  if (const auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    std::uint64_t s = 0;
    read(j, path, "seed", s);
    env.seed = s;
  }
}

void apply_defaults(const EnvConfig& env, TrainConfig& t, EvalConfig& e) {
  if (env.type == "grid") {
    t.rounds = 1563;
    t.batch_size = 64;
    t.offline_batch_size = 0;
    t.inner_steps = 1;
    t.epsilon = 0.0;
    t.lr = 1e-3;
    t.logz_lr = 0.1;
    t.hidden = {256, 256};
    t.retention = 1;
    e.mode_threshold = 2.0;
  } else if (env.type == "bag") {
    t.rounds = 2000;
    t.batch_size = 32;
    t.offline_batch_size = 32;
    t.inner_steps = 8;
    t.epsilon = 0.1;
    t.lr = 1e-4;
    t.logz_lr = 1e-2;
    t.hidden = {16, 16};
    t.retention = 20;
    e.mode_threshold = env.bag.high_reward;
  } else if (env.type == "sequence") {
    const int k = env.length <= 8 ? 16 : 32;
    t.rounds = 2000;
    t.batch_size = k;
    t.offline_batch_size = k;
    t.inner_steps = 8;
    t.epsilon = 0.01;
    t.lr = 1e-4;
    t.logz_lr = 1e-2;
    t.hidden = {128, 128};
    t.retention = 20;
    e.mode_threshold = kSequenceModeThreshold;
  } else {
    t.rounds = 20000;
    t.batch_size = 2;
    t.offline_batch_size = 0;
    t.inner_steps = 8;
    t.epsilon = 0.0;
    t.lr = 1e-2;
    t.logz_lr = 1e-2;
    t.hidden = {16, 16};
    t.retention = 20;
    t.frozen_actions = {{0, 0}, {3, 3}};
    e.mode_threshold = 1.0;
    e.interval = 1000;
  }
  t.backward = BackwardKind::kPessimistic;
  e.hamming_threshold = e.mode_threshold;
}

void parse_train(const json& j, TrainConfig& t) {
  const std::string path = "train";
  check_keys(j, path, {"rounds", "batch_size", "offline_batch_size", "inner_steps", "epsilon", "lr", "logz_lr",
                       "pbp_lr", "log_z_init", "objective", "backward", "offline_in_forward_update",
                       "top_fraction", "retention", "hidden", "stop_backward_grad", "frozen_actions"});
  read(j, path, "rounds", t.rounds);
  read(j, path, "batch_size", t.batch_size);
  read(j, path, "offline_batch_size", t.offline_batch_size);
  read(j, path, "inner_steps", t.inner_steps);
  read(j, path, "epsilon", t.epsilon);
  read(j, path, "lr", t.lr);
  read(j, path, "logz_lr", t.logz_lr);
  read(j, path, "pbp_lr", t.pbp_lr);
  read(j, path, "log_z_init", t.log_z_init);
  std::string text;
  if (j.contains("objective")) {
    read(j, path, "objective", text);
    t.objective = parse_objective(text);
  }
  if (j.contains("backward")) {
    read(j, path, "backward", text);
    t.backward = parse_backward_kind(text);
  }
  read(j, path, "offline_in_forward_update", t.offline_in_forward_update);
  read(j, path, "top_fraction", t.top_fraction);
  read(j, path, "retention", t.retention);
  read(j, path, "hidden", t.hidden);
  read(j, path, "stop_backward_grad", t.stop_backward_grad);
  read(j, path, "frozen_actions", t.frozen_actions);
  t.validate();
}

void parse_eval(const json& j, EvalConfig& e) {
  const std::string path = "eval";
  check_keys(j, path, {"interval", "l1", "topk", "mode_threshold", "corner_clusters", "hamming_radius",
                       "hamming_threshold"});
  read(j, path, "interval", e.interval);
  read(j, path, "l1", e.l1);
  read(j, path, "topk", e.topk);
  read(j, path, "mode_threshold", e.mode_threshold);
  read(j, path, "corner_clusters", e.corner_clusters);
  read(j, path, "hamming_radius", e.hamming_radius);
  read(j, path, "hamming_threshold", e.hamming_threshold);
  if (e.interval < 1) throw ConfigError("eval.interval: must be >= 1");
  if (e.l1 != "exact" && e.l1 != "empirical" && e.l1 != "none") {
    throw ConfigError("eval.l1: expected one of exact, empirical, none");
  }
  if (e.topk < 1) throw ConfigError("eval.topk: must be >= 1");
  if (e.hamming_radius < 0) throw ConfigError("eval.hamming_radius: must be >= 0");
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "", {"name", "env", "train", "eval", "seeds"});
  if (!root.contains("env")) throw ConfigError("env: required");
  ExperimentConfig c;
  read(root, "", "name", c.name);
  parse_env(root.at("env"), c.env);
  apply_defaults(c.env, c.train, c.eval);
  // A configured mode threshold also moves the hamming threshold unless that
  // one is set explicitly.
  if (root.contains("eval")) {
    const auto& ev = root.at("eval");
    parse_eval(ev, c.eval);
    if (ev.is_object() && ev.contains("mode_threshold") && !ev.contains("hamming_threshold")) {
      c.eval.hamming_threshold = c.eval.mode_threshold;
    }
  }
  if (root.contains("train")) {
    parse_train(root.at("train"), c.train);
  } else {
    c.train.validate();
  }
  if (const auto it = root.find("seeds"); it != root.end()) {
    if (!it->is_array() || it->empty()) throw ConfigError("seeds: expected a non-empty array of non-negative integers");
    c.seeds.clear();
    for (const auto& s : *it) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds: expected a non-empty array of non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  json env = {{"type", c.env.type}};
  if (c.env.type == "grid") {
    env["dim"] = c.env.dim;
    env["size"] = c.env.size;
    env["r0"] = c.env.r0;
  } else if (c.env.type == "bag") {
    env["num_items"] = c.env.bag.num_items;
    env["capacity"] = c.env.bag.capacity;
    env["repeat_threshold"] = c.env.bag.repeat_threshold;
    env["high_reward"] = c.env.bag.high_reward;
    env["low_reward"] = c.env.bag.low_reward;
    env["high_probability"] = c.env.bag.high_probability;
    env["base_reward"] = c.env.bag.base_reward;
  } else if (c.env.type == "sequence") {
    env["length"] = c.env.length;
    env["alphabet"] = c.env.alphabet;
    env["exponent"] = c.env.exponent;
    env["table"] = c.env.table;
  }
  if (c.env.type == "bag" || c.env.type == "sequence") {
    env["seed"] = c.env.seed ? json(*c.env.seed) : json(nullptr);
  }
  const auto& t = c.train;
  json train = {{"rounds", t.rounds},
                {"batch_size", t.batch_size},
                {"offline_batch_size", t.offline_batch_size},
                {"inner_steps", t.inner_steps},
                {"epsilon", t.epsilon},
                {"lr", t.lr},
                {"logz_lr", t.logz_lr},
                {"pbp_lr", t.pbp_lr},
                {"log_z_init", t.log_z_init},
                {"objective", std::string(to_string(t.objective))},
                {"backward", std::string(to_string(t.backward))},
                {"offline_in_forward_update", t.offline_in_forward_update},
                {"top_fraction", t.top_fraction},
                {"retention", t.retention},
                {"hidden", t.hidden},
                {"stop_backward_grad", t.stop_backward_grad},
                {"frozen_actions", t.frozen_actions}};
  const auto& e = c.eval;
  json eval = {{"interval", e.interval},
               {"l1", e.l1},
               {"topk", e.topk},
               {"mode_threshold", e.mode_threshold},
               {"corner_clusters", e.corner_clusters},
               {"hamming_radius", e.hamming_radius},
               {"hamming_threshold", e.hamming_threshold}};
  json root = {{"name", c.name}, {"env", env}, {"train", train}, {"eval", eval}, {"seeds", c.seeds}};
  return root.dump(2);
}

bool operator==(const EnvConfig& a, const EnvConfig& b) {
  const auto bag = [](const BagParams& p) {
    return std::tie(p.num_items, p.capacity, p.repeat_threshold, p.high_reward, p.low_reward,
                    p.high_probability, p.base_reward);
  };
  return a.type == b.type && a.dim == b.dim && a.size == b.size && a.r0 == b.r0 && bag(a.bag) == bag(b.bag) &&
         a.seed == b.seed && a.length == b.length && a.alphabet == b.alphabet && a.exponent == b.exponent &&
         a.table == b.table;
}

bool operator==(const EvalConfig& a, const EvalConfig& b) {
  return std::tie(a.interval, a.l1, a.topk, a.mode_threshold, a.corner_clusters, a.hamming_radius,
                  a.hamming_threshold) == std::tie(b.interval, b.l1, b.topk, b.mode_threshold, b.corner_clusters,
                                                   b.hamming_radius, b.hamming_threshold);
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  const auto tie = [](const TrainConfig& t) {
    return std::tie(t.rounds, t.batch_size, t.offline_batch_size, t.inner_steps, t.epsilon, t.lr, t.logz_lr,
                    t.pbp_lr, t.log_z_init, t.objective, t.backward, t.offline_in_forward_update,
                    t.top_fraction, t.retention, t.hidden, t.stop_backward_grad, t.frozen_actions, t.seed);
  };
  return tie(a) == tie(b);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.name == b.name && a.env == b.env && a.train == b.train && a.eval == b.eval && a.seeds == b.seeds;
}

std::uint64_t environment_seed(const EnvConfig& config, std::uint64_t run_seed) {
  return config.seed ? *config.seed : Rng(run_seed, "env")();
}

std::shared_ptr<const Environment> make_environment(const EnvConfig& c, std::uint64_t run_seed) {
  if (c.type == "grid") return std::make_shared<GridEnv>(c.dim, c.size, c.r0);
  if (c.type == "toy") return std::make_shared<ToyDagEnv>();
  if (c.type == "bag") {
    BagParams p = c.bag;
    p.seed = environment_seed(c, run_seed);
    return std::make_shared<BagEnv>(p);
  }
  if (c.type == "sequence") {
    std::shared_ptr<const RewardTable> table;
    if (c.table.empty()) {
      table = std::make_shared<RewardTable>(RewardTable::synthetic(c.length, c.alphabet, environment_seed(c, run_seed)));
    } else {
      table = std::make_shared<RewardTable>(RewardTable::load_tsv(c.table, c.alphabet));
      if (table->length() != c.length) {
        throw ConfigError("env.length: table '" + c.table + "' holds sequences of length " +
                          std::to_string(table->length()));
      }
    }
    return std::make_shared<SequenceEnv>(std::move(table), c.exponent);
  }
  throw ConfigError("env.type: expected one of grid, bag, sequence, toy");
}

}  // namespace gflowlab
