#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gflowlab/config.hpp"
#include "gflowlab/error.hpp"
#include "gflowlab/experiment.hpp"
#include "gflowlab/invariants.hpp"
#include "gflowlab/reward_table.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') throw gflowlab::ConfigError("--seeds: '" + item + "' is not a seed");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw gflowlab::ConfigError("--seeds: expected a comma-separated list");
  return seeds;
}

int cmd_run(const std::string& path, const std::string& out, const std::string& seeds, int parallel) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "error: cannot read " << path << '\n';
    return 2;
  }
  std::stringstream text;
  text << f.rdbuf();
  auto config = gflowlab::parse_config(text.str());
  if (!seeds.empty()) config.seeds = parse_seeds(seeds);
  const std::string dir = out.empty() ? "runs/" + config.name : out;
  return gflowlab::run_experiment(config, dir, parallel, std::cerr);
}

int cmd_gen(int length, const std::string& alphabet, std::uint64_t seed, const std::string& out) {
  gflowlab::RewardTable::synthetic(length, alphabet, seed).save_tsv(out);
  std::cerr << "wrote " << out << '\n';
  return 0;
}

int cmd_check() {
  const auto results = gflowlab::run_invariant_checks(&std::cout);
  std::size_t failed = 0;
  std::size_t counted = 0;
  for (const auto& r : results) {
    if (r.informational) continue;
    ++counted;
    failed += !r.pass;
  }
  std::cout << (counted - failed) << "/" << counted << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GFlowNet training laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds;
  int parallel = 1;
  auto* run = app.add_subcommand("run", "Train every seed of a config and write JSONL metrics");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default runs/<name>)");
  run->add_option("--seeds", seeds, "Comma-separated seeds overriding the config");
  run->add_option("--parallel", parallel, "Seeds trained concurrently")->check(CLI::PositiveNumber);

  int length = 8;
  std::string alphabet = "ACGU";
  std::uint64_t table_seed = 0;
  std::string table_out;
  auto* gen = app.add_subcommand("gen-reward-table", "Write a seeded synthetic sequence reward table");
  gen->add_option("--length", length, "Sequence length")->check(CLI::Range(1, gflowlab::kMaxSyntheticLength));
  gen->add_option("--alphabet", alphabet, "Alphabet letters");
  gen->add_option("--seed", table_seed, "Generator seed");
  gen->add_option("--out", table_out, "Output TSV path")->required();

  auto* check = app.add_subcommand("check", "Run the exact-oracle invariant suite");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seeds, parallel);
    if (gen->parsed()) return cmd_gen(length, alphabet, table_seed, table_out);
    if (check->parsed()) return cmd_check();
  } catch (const gflowlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
