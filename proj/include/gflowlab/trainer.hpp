#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/gradnet.hpp"
#include "gflowlab/objectives.hpp"
#include "gflowlab/policies.hpp"
#include "gflowlab/replay_buffer.hpp"
#include "gflowlab/rng.hpp"

namespace gflowlab {

enum class Objective { kTB, kDB };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view text);

struct TrainConfig {
  int rounds = 100;
  int batch_size = 64;         // K behaviour trajectories per round
  int offline_batch_size = 0;  // backward-sampled trajectories per round; 0 disables
  int inner_steps = 1;         // N pessimistic steps per round
  double epsilon = 0.0;
  double lr = 1e-3;
  double logz_lr = 0.1;
  double pbp_lr = 1e-3;
  double log_z_init = 0.0;
  Objective objective = Objective::kTB;
  BackwardKind backward = BackwardKind::kUniform;
  bool offline_in_forward_update = true;
  double top_fraction = 0.1;
  int retention = 20;
  std::vector<int> hidden{256, 256};
  bool stop_backward_grad = false;
  // When non-empty, each round replays these action sequences instead of
  // sampling the behaviour policy.
  std::vector<std::vector<int>> frozen_actions;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct RoundStats {
  int round = 0;                  // 1-based index of the round just run
  double loss = 0.0;              // TB or DB loss of the forward update
  double pbp_loss = 0.0;          // mean over the inner steps
  bool has_pbp = false;
  std::vector<Trajectory> online;   // behaviour trajectories of the round
  std::vector<Trajectory> offline;  // backward-sampled trajectories
};

// One training run of the pessimistic-backward loop. Strictly sequential;
// every random draw comes from a per-purpose stream of the run seed.
class Trainer {
 public:
  Trainer(std::shared_ptr<const Environment> env, TrainConfig config,
          std::shared_ptr<const PathCounts> counts = nullptr);

  RoundStats run_round();

  const Environment& env() const { return *env_; }
  const TrainConfig& config() const { return config_; }
  ForwardPolicy& forward() { return forward_; }
  const ForwardPolicy& forward() const { return forward_; }
  BackwardPolicy& backward() { return backward_; }
  const BackwardPolicy& backward() const { return backward_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int rounds_done() const { return rounds_done_; }
  std::uint64_t trajectories_seen() const { return trajectories_seen_; }

  // One full-batch Adam step of the pessimistic loss on the given
  // trajectories; returns the loss before the step.
  double pbp_step(std::span<const Trajectory* const> batch);
  // One Adam step of the forward objective on the given trajectories;
  // returns the loss before the step.
  double forward_step(std::span<const Trajectory* const> batch);

 private:
  std::vector<Trajectory> behaviour_batch();
  std::vector<Trajectory> offline_batch();

  std::shared_ptr<const Environment> env_;
  TrainConfig config_;
  ForwardPolicy forward_;
  BackwardPolicy backward_;
  ReplayBuffer buffer_;
  PolicyGrads grads_;
  GradBuffer pbp_grad_;
  AdamState forward_opt_;
  AdamState logz_opt_;
  AdamState flow_opt_;
  AdamState backward_opt_;  // TB-driven learned backward
  AdamState pbp_opt_;
  Rng behaviour_rng_;
  Rng minibatch_rng_;
  Rng offline_rng_;
  int rounds_done_ = 0;
  std::uint64_t trajectories_seen_ = 0;
};

}  // namespace gflowlab
