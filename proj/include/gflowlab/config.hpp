#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gflowlab/env.hpp"
#include "gflowlab/envs/bag.hpp"
#include "gflowlab/trainer.hpp"

namespace gflowlab {

struct EnvConfig {
  std::string type = "grid";  // grid | bag | sequence | toy
  // grid
  int dim = 3;
  int size = 16;
  double r0 = 1e-3;
  // bag; bag.seed is ignored in favour of `seed` below
  BagParams bag;
  // bag reward assignment or synthetic table; derived from the run seed when unset
  std::optional<std::uint64_t> seed;
  // sequence
  int length = 8;
  std::string alphabet = "ACGU";
  double exponent = 3.0;
  std::string table;  // TSV path; empty means a synthetic table
};

struct EvalConfig {
  int interval = 10;
  std::string l1 = "exact";  // exact | empirical | none
  int topk = 100;
  double mode_threshold = 0.0;
  bool corner_clusters = false;
  int hamming_radius = 2;
  double hamming_threshold = 0.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvConfig env;
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds{0};
};

// Strict parse: unknown keys and wrong types raise ConfigError with the key
// path. Omitted fields take the defaults of the chosen environment.
ExperimentConfig parse_config(std::string_view text);
// Fully resolved JSON; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const EnvConfig& a, const EnvConfig& b);
bool operator==(const EvalConfig& a, const EvalConfig& b);
bool operator==(const TrainConfig& a, const TrainConfig& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Builds the environment of one run; seeded pieces come from the configured
// seed or, when absent, from the run seed.
std::shared_ptr<const Environment> make_environment(const EnvConfig& config, std::uint64_t run_seed);

std::uint64_t environment_seed(const EnvConfig& config, std::uint64_t run_seed);

}  // namespace gflowlab
