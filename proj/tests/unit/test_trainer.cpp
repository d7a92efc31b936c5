#include <cmath>

#include "doctest.h"
#include "test_support.hpp"

#include "gflowlab/envs/bag.hpp"
#include "gflowlab/error.hpp"
#include "gflowlab/exact.hpp"
#include "gflowlab/trainer.hpp"

using namespace gflowlab;
using namespace gflowlab::testing;

namespace {

TrainConfig small_grid_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.hidden = {16};
  c.lr = 1e-3;
  c.logz_lr = 0.1;
  c.retention = 3;
  c.inner_steps = 2;
  c.backward = BackwardKind::kPessimistic;
  c.seed = 11;
  return c;
}

TrainConfig toy_frozen_config(BackwardKind kind) {
  TrainConfig c;
  c.batch_size = 2;
  c.hidden = {16, 16};
  c.lr = 1e-2;
  c.logz_lr = 1e-2;
  c.backward = kind;
  c.frozen_actions = {toy_tau1(), toy_tau_x2()};
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("config validation names the field") {
  TrainConfig c = small_grid_config();
  c.batch_size = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("batch_size"), ConfigError);
  c = small_grid_config();
  c.epsilon = 1.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("epsilon"), ConfigError);
  c = small_grid_config();
  c.rounds = -1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("rounds"), ConfigError);
}

TEST_CASE("objective names") {
  CHECK(parse_objective("tb") == Objective::kTB);
  CHECK(parse_objective(to_string(Objective::kDB)) == Objective::kDB);
  CHECK_THROWS_AS(parse_objective("subtb"), ConfigError);
}

TEST_CASE("same seed gives bit-identical training") {
  auto env = std::make_shared<GridEnv>(2, 6);
  Trainer a(env, small_grid_config());
  Trainer b(env, small_grid_config());
  for (int r = 0; r < 15; ++r) {
    const auto sa = a.run_round();
    const auto sb = b.run_round();
    CHECK(sa.loss == sb.loss);
    CHECK(sa.pbp_loss == sb.pbp_loss);
  }
  CHECK(a.forward().net == b.forward().net);
  CHECK(a.forward().log_z == b.forward().log_z);
  CHECK(*a.backward().net == *b.backward().net);

  auto other = small_grid_config();
  other.seed = 12;
  Trainer c(env, other);
  c.run_round();
  Trainer d(env, small_grid_config());
  d.run_round();
  CHECK_FALSE(c.forward().net == d.forward().net);
}

TEST_CASE("round bookkeeping") {
  BagParams bag;
  bag.capacity = 5;
  bag.repeat_threshold = 3;
  auto env = std::make_shared<BagEnv>(bag);
  TrainConfig c = small_grid_config();
  c.offline_batch_size = 4;
  c.epsilon = 0.1;
  Trainer t(env, c);
  for (int r = 1; r <= 6; ++r) {
    const auto s = t.run_round();
    CHECK(s.round == r);
    CHECK(s.online.size() == 8);
    CHECK(s.offline.size() == 4);
    CHECK(s.has_pbp);
    for (const auto& o : s.offline) {
      CHECK(is_consistent(*env, o));
      CHECK(t.buffer().seen_rewards().count(o.object()) == 1);
    }
  }
  CHECK(t.rounds_done() == 6);
  CHECK(t.trajectories_seen() == 6u * 12u);
  CHECK(t.buffer().num_rounds() == 3);
  CHECK(t.buffer().size() == 36);
}

TEST_CASE("without inner steps the pessimistic net stays at its initialization") {
  auto env = std::make_shared<GridEnv>(2, 6);
  TrainConfig c = small_grid_config();
  c.inner_steps = 0;
  Trainer t(env, c);
  const Mlp before = *t.backward().net;
  for (int r = 0; r < 5; ++r) CHECK_FALSE(t.run_round().has_pbp);
  CHECK(*t.backward().net == before);
}

TEST_CASE("fixed backward variants leave no backward parameters") {
  auto env = std::make_shared<GridEnv>(2, 6);
  for (auto kind : {BackwardKind::kUniform, BackwardKind::kMaxEnt}) {
    TrainConfig c = small_grid_config();
    c.backward = kind;
    Trainer t(env, c);
    for (int r = 0; r < 3; ++r) CHECK_FALSE(t.run_round().has_pbp);
    CHECK_FALSE(t.backward().has_net());
  }
}

TEST_CASE("learned backward net moves under trajectory balance unless stopped") {
  auto env = std::make_shared<GridEnv>(2, 6);
  for (bool stop : {false, true}) {
    TrainConfig c = small_grid_config();
    c.backward = BackwardKind::kLearned;
    c.stop_backward_grad = stop;
    Trainer t(env, c);
    const Mlp before = *t.backward().net;
    for (int r = 0; r < 3; ++r) t.run_round();
    CHECK((*t.backward().net == before) == stop);
  }
}

TEST_CASE("pessimistic training concentrates backward mass on the observed trajectory") {
  auto env = std::make_shared<ToyDagEnv>();
  TrainConfig c = toy_frozen_config(BackwardKind::kPessimistic);
  c.inner_steps = 400;
  c.pbp_lr = 1e-2;
  Trainer t(env, c);
  t.run_round();
  const Trajectory tau1 = replay_actions(*env, toy_tau1());
  const double pb = std::exp(trajectory_backward_logprob(t.backward(), *env, tau1));
  CHECK(pb >= 0.999);
  const std::vector<Trajectory> buffer = {tau1};
  CHECK(std::abs(observed_backward_flow(*env, t.backward(), buffer, ToyDagEnv::node(ToyDagEnv::kX1)) - 1.0) < 1e-3);
}

TEST_CASE("frozen behaviour replays the configured trajectories") {
  auto env = std::make_shared<ToyDagEnv>();
  Trainer t(env, toy_frozen_config(BackwardKind::kUniform));
  const auto s = t.run_round();
  REQUIRE(s.online.size() == 2);
  CHECK(s.online[0].actions == toy_tau1());
  CHECK(s.online[1].actions == toy_tau_x2());

  TrainConfig bad = toy_frozen_config(BackwardKind::kUniform);
  bad.frozen_actions = {{0, 1}};
  CHECK_THROWS_AS(Trainer(env, bad), ContractViolation);
}

TEST_CASE("detailed balance training runs and reduces its loss") {
  auto env = std::make_shared<GridEnv>(2, 4);
  TrainConfig c = small_grid_config();
  c.objective = Objective::kDB;
  c.backward = BackwardKind::kUniform;
  c.batch_size = 16;
  c.lr = 1e-2;
  Trainer t(env, c);
  double early = 0.0;
  double late = 0.0;
  for (int r = 0; r < 300; ++r) {
    const double loss = t.run_round().loss;
    if (r < 20) early += loss;
    if (r >= 280) late += loss;
  }
  CHECK(late < early);
}
