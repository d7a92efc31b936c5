#include "gflowlab/trainer.hpp"

#include <cmath>
#include <string>

#include "gflowlab/error.hpp"

namespace gflowlab {

std::string_view to_string(Objective o) { return o == Objective::kTB ? "tb" : "db"; }

Objective parse_objective(std::string_view text) {
  if (text == "tb") return Objective::kTB;
  if (text == "db") return Objective::kDB;
  throw ConfigError("unknown objective '" + std::string(text) + "' (expected tb or db)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("train." + key + ": " + what);
  };
  if (rounds < 0) fail("rounds", "must be >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (offline_batch_size < 0) fail("offline_batch_size", "must be >= 0");
  if (inner_steps < 0) fail("inner_steps", "must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon", "must lie in [0, 1]");
  if (!(lr > 0.0)) fail("lr", "must be > 0");
  if (!(logz_lr > 0.0)) fail("logz_lr", "must be > 0");
  if (!(pbp_lr > 0.0)) fail("pbp_lr", "must be > 0");
  if (!std::isfinite(log_z_init)) fail("log_z_init", "must be finite");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) fail("top_fraction", "must lie in (0, 1]");
  if (retention < 1) fail("retention", "must be >= 1");
  for (int h : hidden) {
    if (h < 1) fail("hidden", "sizes must be >= 1");
  }
}

namespace {

std::uint64_t init_seed(std::uint64_t seed, std::string_view purpose) { return Rng(seed, purpose)(); }

std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& a, const std::vector<Trajectory>* b) {
  std::vector<const Trajectory*> out;
  for (const auto& t : a) out.push_back(&t);
  if (b) {
    for (const auto& t : *b) out.push_back(&t);
  }
  return out;
}

}  // namespace

Trainer::Trainer(std::shared_ptr<const Environment> env, TrainConfig config,
                 std::shared_ptr<const PathCounts> counts)
    : env_(std::move(env)),
      config_(std::move(config)),
      buffer_(static_cast<std::size_t>(std::max(config_.retention, 1))),
      behaviour_rng_(config_.seed, "behaviour"),
      minibatch_rng_(config_.seed, "minibatch"),
      offline_rng_(config_.seed, "offline") {
  config_.validate();
  forward_ = make_forward_policy(*env_, config_.hidden, init_seed(config_.seed, "forward_init"),
                                 config_.objective == Objective::kDB);
  forward_.log_z = config_.log_z_init;
  backward_ = make_backward_policy(config_.backward, *env_, config_.hidden,
                                   init_seed(config_.seed, "backward_init"), std::move(counts));
  grads_ = make_grads(forward_, backward_);
  forward_opt_ = adam_init(forward_.net, config_.lr);
  logz_opt_ = AdamState(1, config_.logz_lr);
  if (forward_.flow) flow_opt_ = adam_init(*forward_.flow, config_.lr);
  if (backward_.net) {
    backward_opt_ = adam_init(*backward_.net, config_.lr);
    pbp_opt_ = adam_init(*backward_.net, config_.pbp_lr);
    pbp_grad_ = GradBuffer(*backward_.net);
  }
  for (const auto& seq : config_.frozen_actions) replay_actions(*env_, seq);  // validates early
}

std::vector<Trajectory> Trainer::behaviour_batch() {
  if (config_.frozen_actions.empty()) {
    return sample_forward_batch(forward_, *env_, behaviour_rng_, config_.epsilon, config_.batch_size);
  }
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(config_.batch_size));
  for (int i = 0; i < config_.batch_size; ++i) {
    const auto& seq = config_.frozen_actions[static_cast<std::size_t>(i) % config_.frozen_actions.size()];
    out.push_back(replay_actions(*env_, seq));
  }
  return out;
}

std::vector<Trajectory> Trainer::offline_batch() {
  const auto objects = select_offline_objects(buffer_.seen_rewards(),
                                              static_cast<std::size_t>(config_.offline_batch_size),
                                              config_.top_fraction, offline_rng_);
  std::vector<Trajectory> out;
  out.reserve(objects.size());
  for (const auto& x : objects) out.push_back(sample_backward_trajectory(backward_, *env_, x, offline_rng_));
  return out;
}

double Trainer::pbp_step(std::span<const Trajectory* const> batch) {
  if (!backward_.net) throw ContractViolation("pessimistic step needs a backward network");
  const auto tb = make_transition_batch(*env_, backward_, batch);
  pbp_grad_.zero();
  const double loss = pbp_batch(backward_, tb, &pbp_grad_).loss;
  adam_step(*backward_.net, pbp_grad_, pbp_opt_);
  return loss;
}

double Trainer::forward_step(std::span<const Trajectory* const> batch) {
  const auto tb = make_transition_batch(*env_, backward_, batch);
  grads_.zero();
  const double loss = config_.objective == Objective::kTB
                          ? tb_batch(forward_, backward_, tb, &grads_, config_.stop_backward_grad).loss
                          : db_batch(forward_, backward_, tb, &grads_, config_.stop_backward_grad).loss;
  adam_step(forward_.net, grads_.forward, forward_opt_);
  if (config_.objective == Objective::kTB) {
    adam_step(std::span<double>(&forward_.log_z, 1), std::span<double>(&grads_.forward.log_z, 1), logz_opt_);
  }
  if (forward_.flow) adam_step(*forward_.flow, *grads_.flow, flow_opt_);
  if (backward_.kind == BackwardKind::kLearned && grads_.backward) {
    adam_step(*backward_.net, *grads_.backward, backward_opt_);
  }
  return loss;
}

RoundStats Trainer::run_round() {
  RoundStats stats;
  stats.round = rounds_done_ + 1;
  try {
    stats.online = behaviour_batch();
    for (const auto& t : stats.online) buffer_.note_seen(t.object(), t.reward);
    if (config_.offline_batch_size > 0) stats.offline = offline_batch();

    std::vector<Trajectory> round = stats.online;
    round.insert(round.end(), stats.offline.begin(), stats.offline.end());
    buffer_.push_round(std::move(round));

    if (backward_.kind == BackwardKind::kPessimistic && config_.inner_steps > 0) {
      double total = 0.0;
      for (int step = 0; step < config_.inner_steps; ++step) {
        const auto mb = buffer_.sample(static_cast<std::size_t>(config_.batch_size), minibatch_rng_);
        total += pbp_step(mb);
      }
      stats.pbp_loss = total / config_.inner_steps;
      stats.has_pbp = true;
    }

    const auto batch = pointers(stats.online, config_.offline_in_forward_update ? &stats.offline : nullptr);
    stats.loss = forward_step(batch);
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(stats.round) + ": " + e.what());
  }
  if (!std::isfinite(stats.loss) || !std::isfinite(forward_.log_z)) {
    throw NumericError("round " + std::to_string(stats.round) + ": training diverged");
  }
  ++rounds_done_;
  trajectories_seen_ += stats.online.size() + stats.offline.size();
  return stats;
}

}  // namespace gflowlab
