// Acceptance criteria. Each criterion prints one PASS/FAIL line with its
// measured values, pinned tolerances and wall time against its budget.
// Usage: gflowlab_acceptance [key ...]   (no keys: run every criterion)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gradient_checks.hpp"
#include "test_support.hpp"

#include "gflowlab/config.hpp"
#include "gflowlab/envs/bag.hpp"
#include "gflowlab/exact.hpp"
#include "gflowlab/experiment.hpp"
#include "gflowlab/metrics.hpp"
#include "gflowlab/record.hpp"

using namespace gflowlab;
using namespace gflowlab::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string key;
  std::string title;
  double budget_s;
  std::function<Outcome()> body;
};

double final_value(const RunResult& run, const std::optional<double> MetricRecord::*field) {
  return (run.records.back().*field).value();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string join(const std::vector<double>& v, int digits) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt::format("{:.{}f}", v[i], digits);
  return out;
}

// ---------------------------------------------------------------------------
// Under-exploitation toy: frozen buffer {tau1, tau_x2}, TB with lr 1e-2 for
// 2e4 single-step rounds. The graded ratio is the forward flow through the
// buffered trajectories of x1 over that of x2; TB leaves the unobserved x1
// branches free, so the full-marginal ratio is reported but not graded.

Outcome toy_uniform() {
  const auto c = parse_config(R"({"name": "toy_uniform", "env": {"type": "toy"},
                                  "train": {"backward": "uniform", "inner_steps": 0}})");
  const auto run = run_single(c, 0);
  const auto r = example_ratio(c, run);
  if (!r) return {false, "no ratio: frozen buffer flows missing"};
  return {r->pass, fmt::format("buffered-flow ratio {:.4f} (target 2/3 +- 0.05); full-marginal ratio {:.4f}",
                               r->ratio, r->marginal_ratio)};
}

Outcome toy_pessimistic() {
  const auto c = parse_config(R"({"name": "toy_pessimistic", "env": {"type": "toy"},
                                  "train": {"backward": "pessimistic", "inner_steps": 8, "pbp_lr": 1e-3}})");
  const auto run = run_single(c, 0);
  const auto r = example_ratio(c, run);
  if (!r) return {false, "no ratio: frozen buffer flows missing"};
  if (run.frozen.empty() || run.frozen[0].actions != toy_tau1()) return {false, "first frozen trajectory is not tau1"};
  const double pb = run.frozen_backward[0];
  const bool pass = r->pass && pb >= 0.999;
  return {pass, fmt::format("P_B(tau1|x1) {:.6f} (>= 0.999); buffered-flow ratio {:.4f} (target 2 +- 0.1); "
                            "full-marginal ratio {:.4f}",
                            pb, r->ratio, r->marginal_ratio)};
}

// ---------------------------------------------------------------------------
// Error bound with epsilon pinned to the observed gap
// sum_B |P_F - R P_B / Z|: rhs = 2 - 2 sum_B P_B + epsilon. The split form
// rhs = epsilon + 2 - sum_B P_F - sum_B P_B is evaluated alongside.

Outcome bound_pinned() {
  Rng rng(21, "acceptance/bound");
  const std::vector<std::shared_ptr<const Environment>> envs = {std::make_shared<ToyDagEnv>(),
                                                                std::make_shared<GridEnv>(2, 4)};
  int instances = 0;
  int violations = 0;
  int split_violations = 0;
  double worst = INFINITY;
  double worst_split = INFINITY;
  for (const auto& env : envs) {
    const auto sets = enumerate_trajectories(*env);
    for (int draw = 0; draw < 100; ++draw) {
      const auto fp = random_forward(*env, rng);
      const auto kind = draw % 2 ? BackwardKind::kLearned : BackwardKind::kUniform;
      const auto bp = random_backward(*env, kind, rng);
      const double keep = rng.uniform();
      std::vector<Trajectory> buffer;
      for (const auto& [x, ts] : sets) {
        for (const auto& t : ts) {
          if (rng.uniform() < keep) buffer.push_back(t);
        }
      }
      const auto r = bound_eval(*env, fp, bp, buffer);
      ++instances;
      worst = std::min(worst, r.slack());
      worst_split = std::min(worst_split, r.split_slack());
      violations += r.slack() < -1e-9;
      split_violations += r.split_slack() < -1e-9;
    }
  }
  return {violations == 0,
          fmt::format("{} instances; pinned form: {} with slack < -1e-9, worst slack {:.6g}; "
                      "split form: {} violations, worst slack {:.6g}",
                      instances, violations, worst, split_violations, worst_split)};
}

// ---------------------------------------------------------------------------
// Analytic gradients against fourth-order central differences.

Outcome gradients() {
  Rng rng(22, "acceptance/gradients");
  const ToyDagEnv toy;
  const GridEnv grid2(2, 4);
  const GridEnv grid3(3, 3);
  const auto seq4 = sequence_env(4);
  const auto seq5 = sequence_env(5);
  const std::vector<const Environment*> envs = {&toy, &grid2, &grid3, seq4.get(), seq5.get()};
  constexpr int kInstances = 200;
  double tb = 0.0;
  double db = 0.0;
  double pbp = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const Environment& env = *envs[static_cast<std::size_t>(i) % envs.size()];
    const auto kind = i % 2 ? BackwardKind::kLearned : BackwardKind::kUniform;
    const auto a = draw_gradient_instance(env, kind, false, 1, rng);
    tb = std::max(tb, tb_gradient_error(env, a.trajectories[0], a.forward, a.backward));
    const auto b = draw_gradient_instance(env, kind, true, 3, rng);
    db = std::max(db, db_gradient_error(env, b.trajectories, b.forward, b.backward));
    const auto c = draw_gradient_instance(env, BackwardKind::kPessimistic, false, 3, rng);
    pbp = std::max(pbp, pbp_gradient_error(env, c.trajectories, c.backward));
  }
  const bool pass = tb < 1e-4 && db < 1e-4 && pbp < 1e-4;
  return {pass, fmt::format("{} instances each; worst relative error TB {:.3g}, DB {:.3g}, PBP {:.3g} (< 1e-4)",
                            kInstances, tb, db, pbp)};
}

// ---------------------------------------------------------------------------
// Exact oracles against sampling and closed forms.

std::uint64_t binomial(int n, int k) {
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

// (sum c)! / prod c! as a product of binomials.
std::uint64_t multinomial(const std::vector<int>& c) {
  std::uint64_t r = 1;
  int n = 0;
  for (int k : c) {
    n += k;
    r *= binomial(n, k);
  }
  return r;
}

Outcome oracles() {
  std::vector<std::string> failures;

  // Exact DP marginal against 1e6 forward samples on an 8x8 grid.
  const GridEnv grid(2, 8);
  Rng rng(23, "acceptance/oracles");
  const int hidden[] = {16};
  auto fp = make_forward_policy(grid, hidden, rng());
  gradient_check_net(fp.net, rng);
  scale(fp.net, 3.0);
  const auto exact = marginal_dp(grid, fp);
  std::map<State, double> hits;
  constexpr int kSamples = 1000000;
  constexpr int kChunk = 10000;
  for (int done = 0; done < kSamples; done += kChunk) {
    for (const auto& t : sample_forward_batch(fp, grid, rng, 0.0, kChunk)) hits[t.object()] += 1.0;
  }
  double tv = 0.0;
  double largest = 0.0;
  double covered = 0.0;
  for (std::size_t i = 0; i < exact.objects.size(); ++i) {
    const auto it = hits.find(exact.objects[i]);
    const double n = it == hits.end() ? 0.0 : it->second;
    tv += std::abs(exact.probs[i] - n / kSamples);
    covered += n;
    largest = std::max(largest, exact.probs[i]);
  }
  // Samples outside the enumerated objects count fully against agreement.
  tv = 0.5 * (tv + (kSamples - covered) / kSamples);
  if (!(tv < 0.01)) failures.push_back(fmt::format("TV {:.5f}", tv));

  // MaxEnt path counts against the multinomial closed form on grids to 8^3.
  std::size_t grid_states = 0;
  for (int dim = 1; dim <= 3; ++dim) {
    for (int size = 2; size <= 8; ++size) {
      const GridEnv env(dim, size);
      const auto counts = maxent_counts(env);
      for (const auto& [s, n] : counts.counts) {
        ++grid_states;
        if (n != static_cast<double>(multinomial(s.data))) {
          failures.push_back(fmt::format("grid D={} H={}: count {} vs closed form {}", dim, size, n,
                                         multinomial(s.data)));
          break;
        }
      }
    }
  }

  // Every length-L sequence has 2^(L-1) construction orders.
  std::size_t objects = 0;
  for (int length = 1; length <= 6; ++length) {
    const auto env = sequence_env(length);
    const double expect = std::ldexp(1.0, length - 1);
    const auto counts = maxent_counts(*env);
    for (const auto& [x, ts] : enumerate_trajectories(*env)) {
      ++objects;
      if (static_cast<double>(ts.size()) != expect || counts.at(x) != expect) {
        failures.push_back(fmt::format("L={}: {} trajectories, count {}, expected {}", length, ts.size(),
                                       counts.at(x), expect));
        break;
      }
    }
  }

  std::string detail = fmt::format(
      "8x8 grid TV(exact, 1e6 samples) {:.5f} (< 0.01, max cell mass {:.4f}); maxent closed form on {} grid "
      "states; 2^(L-1) on {} sequence objects",
      tv, largest, grid_states, objects);
  if (!failures.empty()) detail += "; failures: " + failures.front();
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// Comparative runs.

std::vector<RunResult> run_seeds(const std::string& json) {
  const auto c = parse_config(json);
  std::vector<RunResult> out;
  for (const auto seed : c.seeds) out.push_back(run_single(c, seed));
  return out;
}

std::string backward_config(const std::string& env, const std::string& kind) {
  return fmt::format(R"({{"env": {}, "train": {{"backward": "{}"}}, "seeds": [0, 1, 2]}})", env, kind);
}

Outcome grid_comparative() {
  const GridEnv env(3, 16);
  std::map<std::string, std::vector<double>> l1;
  std::vector<std::size_t> clusters;
  for (const std::string kind : {"uniform", "maxent", "learned", "pessimistic"}) {
    for (const auto& run : run_seeds(backward_config(R"({"type": "grid"})", kind))) {
      l1[kind].push_back(final_value(run, &MetricRecord::l1));
      if (kind != "pessimistic") continue;
      // Corner of each discovered mode: which half of the grid each coordinate lies in.
      std::set<std::vector<int>> corners;
      for (const auto& x : run.mode_set) {
        if (env.reward(x) < 2.0) return {false, "mode set holds a cell with reward below 2"};
        std::vector<int> corner;
        for (int c : x.data) corner.push_back(2 * c > env.size() - 1 ? 1 : 0);
        corners.insert(corner);
      }
      clusters.push_back(corners.size());
    }
  }
  const double pbp = mean(l1["pessimistic"]);
  bool pass = std::all_of(clusters.begin(), clusters.end(), [](std::size_t n) { return n == 8; });
  std::string detail = fmt::format("final exact L1 seed means: pessimistic {:.4f}", pbp);
  for (const std::string kind : {"uniform", "maxent", "learned"}) {
    const double m = mean(l1[kind]);
    pass = pass && pbp <= m;
    detail += fmt::format(", {} {:.4f}", kind, m);
  }
  detail += fmt::format(" (pessimistic <= each); pessimistic seeds [{}]; corner clusters per seed:",
                        join(l1["pessimistic"], 4));
  for (auto n : clusters) detail += fmt::format(" {}", n);
  detail += " (8 each)";
  return {pass, detail};
}

Outcome bag_comparative() {
  std::map<std::string, std::vector<double>> modes;
  for (const std::string kind : {"uniform", "pessimistic"}) {
    for (const auto& run : run_seeds(backward_config(R"({"type": "bag"})", kind))) {
      modes[kind].push_back(static_cast<double>(run.records.back().modes));
    }
  }
  const double tb = mean(modes["uniform"]);
  const double pbp = mean(modes["pessimistic"]);
  return {pbp >= tb, fmt::format("final modes seed means: TB+PBP {:.2f} [{}], TB {:.2f} [{}] (TB+PBP >= TB)", pbp,
                                 join(modes["pessimistic"], 0), tb, join(modes["uniform"], 0))};
}

// Independent Hamming-ball mode oracle: exhaustive scan of every sequence,
// then the accept rule replayed over the run's behaviour stream.
struct HammingOracle {
  int length = 0;
  int k = 0;
  std::vector<double> reward;   // by base-k code, first letter most significant
  std::vector<bool> maximum;    // reward >= threshold and nothing within radius scores higher

  std::vector<int> letters(std::size_t code) const {
    std::vector<int> out(static_cast<std::size_t>(length));
    for (int i = length - 1; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = static_cast<int>(code % static_cast<std::size_t>(k));
      code /= static_cast<std::size_t>(k);
    }
    return out;
  }
  std::size_t code(const std::vector<int>& l) const {
    std::size_t c = 0;
    for (int v : l) c = c * static_cast<std::size_t>(k) + static_cast<std::size_t>(v);
    return c;
  }
};

int distance(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

HammingOracle hamming_oracle(const SequenceEnv& env, int radius, double threshold) {
  HammingOracle o;
  o.length = env.length();
  o.k = env.alphabet_size();
  const std::size_t total = static_cast<std::size_t>(std::pow(o.k, o.length));
  o.reward.resize(total);
  for (std::size_t c = 0; c < total; ++c) o.reward[c] = env.reward_of(o.letters(c));
  o.maximum.assign(total, false);
  for (std::size_t c = 0; c < total; ++c) {
    if (o.reward[c] < threshold) continue;
    const auto base = o.letters(c);
    bool top = true;
    // Scan the closed ball by substituting up to `radius` positions.
    std::function<void(std::vector<int>&, int, int)> visit = [&](std::vector<int>& l, int from, int left) {
      if (!top) return;
      if (o.reward[o.code(l)] > o.reward[c]) {
        top = false;
        return;
      }
      if (left == 0) return;
      for (int p = from; p < o.length; ++p) {
        const int keep = l[static_cast<std::size_t>(p)];
        for (int v = 0; v < o.k; ++v) {
          if (v == keep) continue;
          l[static_cast<std::size_t>(p)] = v;
          visit(l, p + 1, left - 1);
        }
        l[static_cast<std::size_t>(p)] = keep;
      }
    };
    auto l = base;
    visit(l, 0, radius);
    o.maximum[c] = top;
  }
  return o;
}

Outcome sequence_comparative() {
  std::map<std::string, std::vector<double>> top100;
  int cross_checked = 0;
  std::size_t oracle_modes = 0;
  std::string mismatch;
  for (const std::string kind : {"uniform", "pessimistic"}) {
    const auto c = parse_config(backward_config(R"({"type": "sequence", "length": 8, "exponent": 3.0})", kind));
    for (const auto seed : c.seeds) {
      const auto run = run_single(c, seed);
      top100[kind].push_back(run.records.back().top100);

      const auto env = std::dynamic_pointer_cast<const SequenceEnv>(make_environment(c.env, seed));
      const int radius = c.eval.hamming_radius;
      const auto oracle = hamming_oracle(*env, radius, c.eval.hamming_threshold);
      // The library's exhaustive scan must name the same maxima.
      std::set<std::vector<int>> scan;
      for (const auto& m : hamming_ball_maxima(*env, radius, c.eval.hamming_threshold)) scan.insert(m);
      std::set<std::vector<int>> brute;
      for (std::size_t code = 0; code < oracle.maximum.size(); ++code) {
        if (oracle.maximum[code]) brute.insert(oracle.letters(code));
      }
      oracle_modes += brute.size();
      if (scan != brute && mismatch.empty()) {
        mismatch = fmt::format("seed {}: library scan {} maxima, brute force {}", seed, scan.size(), brute.size());
      }
      // Replay the accept rule over the behaviour stream.
      std::vector<std::vector<int>> accepted;
      for (const auto& x : run.stream) {
        if (!oracle.maximum[oracle.code(x.data)]) continue;
        const bool far = std::all_of(accepted.begin(), accepted.end(),
                                     [&](const auto& m) { return distance(m, x.data) > radius; });
        if (far) accepted.push_back(x.data);
      }
      const auto reported = run.records.back().hamming_modes;
      if ((accepted != run.hamming_accepted || reported != std::optional<std::uint64_t>(accepted.size())) &&
          mismatch.empty()) {
        mismatch = fmt::format("{} seed {}: tracker {} modes, oracle replay {}", kind, seed,
                               run.hamming_accepted.size(), accepted.size());
      }
      ++cross_checked;
    }
  }
  const double uni = mean(top100["uniform"]);
  const double pbp = mean(top100["pessimistic"]);
  const bool pass = pbp >= uni && mismatch.empty();
  std::string detail = fmt::format(
      "final top-100 seed means: pessimistic {:.5f} [{}], uniform {:.5f} [{}] (pessimistic >= uniform); "
      "hamming modes match the 4^8 scan replay on {} runs ({} ball maxima over their tables)",
      pbp, join(top100["pessimistic"], 5), uni, join(top100["uniform"], 5), cross_checked, oracle_modes);
  if (!mismatch.empty()) detail += "; mismatch: " + mismatch;
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// Determinism: every metric except wall time is bit-identical across reruns.

std::string fingerprint(const RunResult& run) {
  std::string out;
  for (auto r : run.records) {
    r.wall_ms = 0.0;
    out += format_record(r) + '\n';
  }
  for (const auto& x : run.stream) {
    for (int v : x.data) out += fmt::format("{},", v);
    out += ';';
  }
  if (run.final_marginal) {
    for (double p : run.final_marginal->probs) out += fmt::format("{:a};", p);
  }
  return out;
}

Outcome determinism() {
  const char* configs[] = {
      R"({"env": {"type": "toy"}, "train": {"rounds": 500}})",
      R"({"env": {"type": "grid", "dim": 2, "size": 8}, "train": {"rounds": 60, "batch_size": 16,
          "hidden": [32, 32], "inner_steps": 4}, "eval": {"interval": 7}})",
      R"({"env": {"type": "grid", "dim": 2, "size": 6}, "train": {"rounds": 40, "objective": "db",
          "backward": "maxent", "hidden": [16]}})",
      R"({"env": {"type": "bag"}, "train": {"rounds": 60, "backward": "learned"}})",
      R"({"env": {"type": "sequence", "length": 6}, "train": {"rounds": 60}})",
  };
  int checked = 0;
  std::size_t records = 0;
  for (const char* json : configs) {
    const auto c = parse_config(json);
    for (const std::uint64_t seed : {3u, 4u}) {
      const auto a = run_single(c, seed);
      const auto b = run_single(c, seed);
      if (fingerprint(a) != fingerprint(b)) {
        return {false, fmt::format("config {} seed {} differs between reruns", checked / 2, seed)};
      }
      records += a.records.size();
      ++checked;
    }
  }
  return {true, fmt::format("{} config/seed pairs rerun; {} records, streams and final marginals bit-identical",
                            checked, records)};
}

std::vector<Criterion> criteria() {
  return {
      {"toy-uniform", "under-exploitation toy with uniform backward", 10.0, toy_uniform},
      {"toy-pessimistic", "under-exploitation toy with pessimistic backward", 30.0, toy_pessimistic},
      {"bound", "pinned-epsilon error bound on 200 random instances", 60.0, bound_pinned},
      {"gradients", "TB, DB and PBP gradients against finite differences", 60.0, gradients},
      {"oracles", "exact oracles against sampling and closed forms", 120.0, oracles},
      {"grid", "16^3 hyper-grid, 4 backward variants x 3 seeds", 1800.0, grid_comparative},
      {"bag", "bag generation, TB vs TB+PBP x 3 seeds", 900.0, bag_comparative},
      {"sequence", "length-8 synthetic sequence task x 3 seeds", 1200.0, sequence_comparative},
      {"determinism", "same-seed reruns are bit-identical", 600.0, determinism},
  };
}

}  // namespace

int main(int argc, char** argv) {
  const auto all = criteria();
  std::vector<const Criterion*> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string key = argv[i];
    const auto it = std::find_if(all.begin(), all.end(), [&](const Criterion& c) { return c.key == key; });
    if (it == all.end()) {
      std::cerr << "unknown criterion '" << key << "'; known:";
      for (const auto& c : all) std::cerr << ' ' << c.key;
      std::cerr << '\n';
      return 2;
    }
    chosen.push_back(&*it);
  }
  if (chosen.empty()) {
    for (const auto& c : all) chosen.push_back(&c);
  }

  int failed = 0;
  for (const auto* c : chosen) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c->body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c->budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << fmt::format("{} {}: {} | {} | {:.1f} s (budget {:.0f} s{})", pass ? "PASS" : "FAIL", c->key,
                             c->title, o.detail, secs, c->budget_s, in_time ? "" : ", exceeded")
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
