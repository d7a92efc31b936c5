#include <cmath>
#include <sstream>

#include "doctest.h"

#include "gflowlab/config.hpp"
#include "gflowlab/error.hpp"
#include "gflowlab/record.hpp"

using namespace gflowlab;

TEST_CASE("minimal grid config takes the grid defaults") {
  const auto c = parse_config(R"({"env": {"type": "grid"}})");
  CHECK(c.env.dim == 3);
  CHECK(c.env.size == 16);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.lr == 1e-3);
  CHECK(c.train.logz_lr == 0.1);
  CHECK(c.train.rounds == 1563);
  CHECK(c.train.backward == BackwardKind::kPessimistic);
  CHECK(c.eval.mode_threshold == 2.0);
}

TEST_CASE("config errors carry the key path") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"type": "grid"}, "train": {"rounds": -3}})"),
                       doctest::Contains("train.rounds"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"type": "grid"}, "foo": 1})"), doctest::Contains("foo"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"type": "grid", "sise": 4}})"), doctest::Contains("env.sise"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"type": "grid"}, "train": {"lr": "fast"}})"),
                       doctest::Contains("train.lr: expected a number"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"type": "grid"}, "train": {"backward": "sideways"}})"),
                       doctest::Contains("sideways"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"train": {}})"), doctest::Contains("env"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"env": {"type": "lattice"}})"), ConfigError);
}

TEST_CASE("resolved configs round-trip") {
  const char* sources[] = {
      R"({"env": {"type": "grid", "dim": 2, "size": 8}, "seeds": [0, 1, 2]})",
      R"({"env": {"type": "bag", "capacity": 9}, "train": {"objective": "db"}})",
      R"({"env": {"type": "sequence", "length": 6, "seed": 4}, "eval": {"hamming_radius": 1}})",
      R"({"name": "toy", "env": {"type": "toy"}, "train": {"backward": "uniform"}})",
  };
  for (const char* src : sources) {
    const auto c = parse_config(src);
    const auto text = serialize_config(c);
    const auto back = parse_config(text);
    CHECK(back == c);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("environment seeds") {
  auto c = parse_config(R"({"env": {"type": "bag"}})");
  CHECK(environment_seed(c.env, 3) == environment_seed(c.env, 3));
  CHECK(environment_seed(c.env, 3) != environment_seed(c.env, 4));
  c.env.seed = 99;
  CHECK(environment_seed(c.env, 3) == 99);
  CHECK(environment_seed(c.env, 4) == 99);
}

TEST_CASE("records keep a fixed key order and null for absent values") {
  MetricRecord r;
  r.round = 10;
  r.trajectories_seen = 640;
  r.loss = 0.125;
  r.modes = 3;
  r.top100 = 2.5;
  r.wall_ms = 12.0;
  r.seed = 7;
  const auto line = format_record(r);
  CHECK(line ==
        R"({"round":10,"trajectories_seen":640,"loss":0.125,"pbp_loss":null,"l1":null,"modes":3,"top100":2.5,)"
        R"("relative_mean_error":null,"hamming_modes":null,"wall_ms":12,"seed":7})");
  r.loss = NAN;
  CHECK(format_record(r).find(R"("loss":null)") != std::string::npos);
}

TEST_CASE("records round-trip through JSONL") {
  MetricRecord a;
  a.round = 1;
  a.trajectories_seen = 64;
  a.loss = 1.0 / 3.0;
  a.pbp_loss = 2.0 / 7.0;
  a.l1 = 1.2345678912345;
  a.modes = 4;
  a.top100 = 0.5;
  a.relative_mean_error = -0.25;
  a.hamming_modes = 2;
  a.wall_ms = 3.5;
  a.seed = 1;
  MetricRecord b = a;
  b.round = 2;
  b.pbp_loss.reset();
  b.hamming_modes.reset();

  std::stringstream ss;
  emit_record(ss, a);
  emit_record(ss, b);
  std::string line;
  std::vector<MetricRecord> back;
  while (std::getline(ss, line)) back.push_back(parse_record(line));
  REQUIRE(back.size() == 2);
  // Nine significant digits survive the trip.
  CHECK(back[0].loss == doctest::Approx(a.loss).epsilon(1e-9));
  CHECK(back[0].l1.value() == doctest::Approx(*a.l1).epsilon(1e-9));
  CHECK(back[0].hamming_modes == a.hamming_modes);
  CHECK(format_record(back[0]) == format_record(a));
  CHECK_FALSE(back[1].pbp_loss.has_value());
  CHECK_FALSE(back[1].hamming_modes.has_value());
  CHECK(format_record(back[1]) == format_record(b));

  CHECK_THROWS_AS(parse_record("{\"round\": 1"), DataError);
  CHECK_THROWS_AS(parse_record("{\"round\": 1}"), DataError);
}
