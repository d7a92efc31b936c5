#include "gflowlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"

#include "gflowlab/envs/grid.hpp"
#include "gflowlab/envs/toy_dag.hpp"
#include "gflowlab/error.hpp"

namespace gflowlab {
namespace {

ModeTracker make_mode_tracker(const Environment& env, const EvalConfig& config) {
  int grid_size = 0;
  if (const auto* grid = dynamic_cast<const GridEnv*>(&env)) grid_size = grid->size();
  if (config.corner_clusters && grid_size == 0) throw ConfigError("eval.corner_clusters: grid environments only");
  return threshold_mode_tracker(config.mode_threshold, config.corner_clusters, grid_size);
}

}  // namespace

Evaluator::Evaluator(std::shared_ptr<const Environment> env, const EvalConfig& config, std::uint64_t seed)
    : env_(std::move(env)), config_(config), seed_(seed), modes_(make_mode_tracker(*env_, config_)) {
  try {
    space_ = enumerate_states(*env_);
  } catch (const OracleScaleError&) {
    space_.reset();
  }
  if (space_) {
    target_ = target_distribution(*env_, *space_);
    rewards_.reserve(space_->terminals.size());
    for (int t : space_->terminals) {
      rewards_.push_back(std::max(env_->reward(space_->states[static_cast<std::size_t>(t)]), kRewardFloor));
    }
    target_mean_ = target_mean_reward(rewards_);
  }
  if (auto seq = std::dynamic_pointer_cast<const SequenceEnv>(env_)) {
    hamming_.emplace(std::move(seq), config_.hamming_radius, config_.hamming_threshold);
  }
}

void Evaluator::observe(const RoundStats& stats) {
  for (const auto& t : stats.online) {
    const State& x = t.object();
    modes_.observe(x, t.reward);
    history_.observe(x, t.reward);
    if (hamming_) hamming_->observe(x);
    stream_.push_back(x);
    window_.push_back(x);
  }
  loss_sum_ += stats.loss;
  ++loss_count_;
  if (stats.has_pbp) {
    pbp_sum_ += stats.pbp_loss;
    ++pbp_count_;
  }
}

MetricRecord Evaluator::record(const Trainer& trainer, double wall_ms) {
  MetricRecord r;
  r.round = trainer.rounds_done();
  r.trajectories_seen = trainer.trajectories_seen();
  r.loss = loss_count_ ? loss_sum_ / loss_count_ : NAN;
  if (pbp_count_) r.pbp_loss = pbp_sum_ / pbp_count_;
  r.modes = modes_.count();
  r.top100 = history_.topk_mean(static_cast<std::size_t>(config_.topk));
  if (hamming_) r.hamming_modes = hamming_->count();
  r.wall_ms = wall_ms;
  r.seed = seed_;

  if (space_) {
    const Distribution marginal = marginal_dp(*env_, *space_, trainer.forward());
    if (config_.l1 == "exact") {
      r.l1 = l1_distance(marginal, *target_);
    } else if (config_.l1 == "empirical" && !window_.empty()) {
      r.l1 = l1_distance(empirical_distribution(*space_, window_), *target_);
    }
    r.relative_mean_error = relative_mean_error_exact(marginal.probs, rewards_, target_mean_);
  }
  loss_sum_ = pbp_sum_ = 0.0;
  loss_count_ = pbp_count_ = 0;
  window_.clear();
  return r;
}

RunResult run_single(const ExperimentConfig& config, std::uint64_t seed, std::ostream* sink) {
  const auto start = std::chrono::steady_clock::now();
  auto env = make_environment(config.env, seed);
  TrainConfig tc = config.train;
  tc.seed = seed;
  std::shared_ptr<const PathCounts> counts;
  if (tc.backward == BackwardKind::kMaxEnt) counts = std::make_shared<const PathCounts>(maxent_counts(*env));
  Trainer trainer(env, tc, counts);
  Evaluator eval(env, config.eval, seed);

  RunResult result;
  result.seed = seed;
  for (int round = 1; round <= tc.rounds; ++round) {
    eval.observe(trainer.run_round());
    if (round % config.eval.interval == 0 || round == tc.rounds) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(eval.record(trainer, ms));
      if (sink) emit_record(*sink, result.records.back());
    }
  }
  if (eval.space()) result.final_marginal = marginal_dp(*env, *eval.space(), trainer.forward());
  result.final_modes = eval.modes().count();
  result.mode_set.assign(eval.modes().modes().begin(), eval.modes().modes().end());
  result.stream = eval.stream();
  if (eval.hamming()) result.hamming_accepted = eval.hamming()->accepted();
  for (const auto& actions : tc.frozen_actions) {
    result.frozen.push_back(replay_actions(*env, actions));
    result.frozen_forward.push_back(std::exp(trajectory_forward_logprob(trainer.forward(), *env, result.frozen.back())));
    result.frozen_backward.push_back(
        std::exp(trajectory_backward_logprob(trainer.backward(), *env, result.frozen.back())));
  }
  return result;
}

std::optional<ExampleRatio> example_ratio(const ExperimentConfig& config, const RunResult& run) {
  if (config.env.type != "toy" || !run.final_marginal || run.frozen.empty()) return std::nullopt;
  ExampleRatio r;
  if (config.train.backward == BackwardKind::kUniform) {
    r.expected = 2.0 / 3.0;
    r.tolerance = 0.05;
  } else if (config.train.backward == BackwardKind::kPessimistic) {
    r.expected = 2.0;
    r.tolerance = 0.1;
  } else {
    return std::nullopt;
  }
  const State x1 = ToyDagEnv::node(ToyDagEnv::kX1);
  const State x2 = ToyDagEnv::node(ToyDagEnv::kX2);
  double f1 = 0.0;
  double f2 = 0.0;
  for (std::size_t i = 0; i < run.frozen.size(); ++i) {
    if (run.frozen[i].object() == x1) f1 += run.frozen_forward[i];
    if (run.frozen[i].object() == x2) f2 += run.frozen_forward[i];
  }
  if (!(f1 > 0.0) || !(f2 > 0.0)) return std::nullopt;
  r.ratio = f1 / f2;
  r.marginal_ratio = run.final_marginal->at(x1) / run.final_marginal->at(x2);
  r.pass = std::abs(r.ratio - r.expected) <= r.tolerance;
  return r;
}

int run_experiment(const ExperimentConfig& config, const std::filesystem::path& out, int parallel,
                   std::ostream& log) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) {
    log << "error: cannot create " << out << ": " << ec.message() << '\n';
    return 2;
  }
  {
    std::ofstream f(out / "config.resolved.json");
    f << serialize_config(config) << '\n';
    if (!f) {
      log << "error: cannot write " << (out / "config.resolved.json") << '\n';
      return 2;
    }
  }

  int threads = std::max(1, parallel);
  if (const char* cap = std::getenv("GFLOWLAB_THREADS")) {
    const int c = std::atoi(cap);
    if (c > 0) threads = std::min(threads, c);
  }
  threads = std::min<int>(threads, static_cast<int>(config.seeds.size()));

  std::vector<std::optional<RunResult>> results(config.seeds.size());
  std::vector<std::string> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const auto seed = config.seeds[i];
      const auto path = out / fmt::format("seed_{}.jsonl", seed);
      try {
        std::ofstream f(path);
        if (!f) throw Error("cannot open " + path.string());
        results[i] = run_single(config, seed, &f);
        f.close();
        if (!f) throw Error("cannot write " + path.string());
        std::lock_guard lock(log_mutex);
        log << "seed " << seed << " done -> " << path.string() << '\n';
      } catch (const std::exception& e) {
        errors[i] = e.what();
        std::lock_guard lock(log_mutex);
        log << "error: seed " << seed << ": " << e.what() << '\n';
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  nlohmann::ordered_json summary;
  summary["name"] = config.name;
  summary["runs"] = nlohmann::ordered_json::array();
  std::map<std::string, std::vector<double>> finals;
  bool ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) {
      ok = false;
      summary["runs"].push_back({{"seed", config.seeds[i]}, {"error", errors[i]}});
      continue;
    }
    const auto& run = *results[i];
    nlohmann::ordered_json row = {{"seed", run.seed}};
    if (!run.records.empty()) {
      row["final"] = nlohmann::ordered_json::parse(format_record(run.records.back()));
      for (const auto& [key, value] : row["final"].items()) {
        if (key == "round" || key == "seed" || key == "wall_ms" || !value.is_number()) continue;
        finals[key].push_back(value.get<double>());
      }
    }
    if (const auto check = example_ratio(config, run)) {
      row["example_ratio"] = {{"ratio", check->ratio},
                              {"marginal_ratio", check->marginal_ratio},
                              {"expected", check->expected},
                              {"tolerance", check->tolerance},
                              {"pass", check->pass}};
    }
    summary["runs"].push_back(row);
  }
  nlohmann::ordered_json mean = nlohmann::ordered_json::object();
  nlohmann::ordered_json stdev = nlohmann::ordered_json::object();
  for (const auto& [key, values] : finals) {
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    s = values.size() > 1 ? std::sqrt(s / static_cast<double>(values.size() - 1)) : 0.0;
    mean[key] = m;
    stdev[key] = s;
  }
  summary["mean"] = mean;
  summary["std"] = stdev;
  {
    std::ofstream f(out / "summary.json");
    f << summary.dump(2) << '\n';
    if (!f) {
      log << "error: cannot write " << (out / "summary.json") << '\n';
      return 2;
    }
  }
  return ok ? 0 : 1;
}

}  // namespace gflowlab
