#include <cmath>
#include <vector>

#include "doctest.h"

#include "gflowlab/error.hpp"
#include "gflowlab/gradnet.hpp"
#include "gflowlab/rng.hpp"

using namespace gflowlab;

namespace {

// Plain loops over the documented flat layout: per layer a column-major
// (out x in) weight then the bias.
std::vector<double> hand_forward(const std::vector<int>& sizes, const std::vector<double>& flat,
                                 std::vector<double> x) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    std::vector<double> y(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      double acc = flat[offset + static_cast<std::size_t>(in * out + o)];
      for (int i = 0; i < in; ++i) acc += flat[offset + static_cast<std::size_t>(i * out + o)] * x[static_cast<std::size_t>(i)];
      const bool hidden = l + 2 < sizes.size();
      y[static_cast<std::size_t>(o)] = hidden && acc < 0 ? 0.01 * acc : acc;
    }
    offset += static_cast<std::size_t>(in * out + out);
    x = std::move(y);
  }
  return x;
}

double logprob_of(const Mlp& net, const std::vector<double>& features, const Mask& mask, int action) {
  const Eigen::VectorXd logits = mlp_forward(net, features);
  const auto lp = masked_log_softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), mask);
  return lp[static_cast<std::size_t>(action)];
}

}  // namespace

TEST_CASE("mlp_init is deterministic with zero biases and bounded weights") {
  const Mlp a = mlp_init({2, 3}, 0);
  const Mlp b = mlp_init({2, 3}, 0);
  CHECK(a == b);

  const Mlp net = mlp_init({4, 256, 256, 7}, 1);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    CHECK(net.params().bias(l).cwiseAbs().maxCoeff() == 0.0);
  }
  const double bound = std::sqrt(6.0 / 260.0);
  CHECK(net.params().weight(0).cwiseAbs().maxCoeff() <= bound);
  CHECK(net.params().weight(0).cwiseAbs().maxCoeff() > 0.5 * bound);
}

TEST_CASE("mlp_init rejects bad layer sizes") {
  CHECK_THROWS_AS(mlp_init({}, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init({3}, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init({3, 0, 2}, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init({3, -1}, 0), ConfigError);
}

TEST_CASE("mlp_forward on zero and identity nets") {
  Mlp zero({3, 5, 4});
  const std::vector<double> f = {0.3, -2.0, 7.0};
  CHECK(mlp_forward(zero, f).cwiseAbs().maxCoeff() == 0.0);

  Mlp id({2, 2});
  id.params().weight(0).setIdentity();
  const std::vector<double> x = {1.0, 2.0};
  const Eigen::VectorXd y = mlp_forward(id, x);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 2.0);

  CHECK_THROWS_AS(mlp_forward(id, std::vector<double>{1.0, 2.0, 3.0}), ContractViolation);
}

TEST_CASE("mlp_forward matches hand arithmetic") {
  Rng rng(5, "test/forward");
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<int> sizes = {4, 6, 3};
    Mlp net = mlp_init(sizes, rng());
    for (auto& v : net.params().flat()) v = 2.0 * rng.uniform() - 1.0;
    std::vector<double> x(4);
    for (auto& v : x) v = 4.0 * rng.uniform() - 2.0;
    const Eigen::VectorXd got = mlp_forward(net, x);
    const std::vector<double> flat(net.params().flat().begin(), net.params().flat().end());
    const auto want = hand_forward(sizes, flat, x);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("masked_log_softmax") {
  const Mask all = {1, 1, 1};
  const auto u = masked_log_softmax(std::vector<double>{0, 0, 0}, all);
  for (double v : u) CHECK(v == doctest::Approx(-std::log(3.0)).epsilon(1e-15));

  const auto forced = masked_log_softmax(std::vector<double>{5, -3, 2}, Mask{0, 1, 0});
  CHECK(forced[1] == 0.0);
  CHECK(forced[0] == kMaskedLogit);
  CHECK(forced[2] == kMaskedLogit);

  const auto big = masked_log_softmax(std::vector<double>{1000, 999}, Mask{1, 1});
  const double l = std::log1p(std::exp(-1.0));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(-l).epsilon(1e-12));
  CHECK(big[1] == doctest::Approx(-1.0 - l).epsilon(1e-12));
  CHECK(big[0] == doctest::Approx(-0.3133).epsilon(1e-4));

  CHECK_THROWS_AS(masked_log_softmax(std::vector<double>{1, 2}, Mask{0, 0}), ContractViolation);
}

TEST_CASE("masked_log_softmax normalizes at large magnitudes") {
  Rng rng(6, "test/softmax");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(7);
    Mask mask(7);
    bool any = false;
    for (std::size_t i = 0; i < 7; ++i) {
      logits[i] = (2.0 * rng.uniform() - 1.0) * 1e4;
      mask[i] = rng.uniform() < 0.6;
      any = any || mask[i];
    }
    if (!any) mask[3] = 1;
    const auto lp = masked_log_softmax(logits, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      if (mask[i]) total += std::exp(lp[i]);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("backprop_logprob is linear in the weight") {
  Rng rng(7, "test/backprop");
  const Mlp net = mlp_init({3, 5, 4}, rng());
  const std::vector<double> f = {0.5, -1.0, 2.0};
  const Mask mask = {1, 0, 1, 1};

  GradBuffer g0(net);
  backprop_logprob(net, f, mask, 2, 0.0, g0);
  for (double v : g0.params.flat()) CHECK(v == 0.0);

  GradBuffer split(net);
  backprop_logprob(net, f, mask, 2, 0.7, split);
  backprop_logprob(net, f, mask, 2, -1.9, split);
  GradBuffer joint(net);
  backprop_logprob(net, f, mask, 2, 0.7 - 1.9, joint);
  for (std::size_t i = 0; i < joint.params.size(); ++i) {
    CHECK(std::abs(split.params.flat()[i] - joint.params.flat()[i]) < 1e-12);
  }

  CHECK_THROWS_AS(backprop_logprob(net, f, mask, 1, 1.0, g0), ContractViolation);
}

TEST_CASE("backprop_logprob agrees with central differences") {
  Rng rng(8, "test/backprop-fd");
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = mlp_init({3, 6, 4}, rng());
    std::vector<double> f(3);
    for (auto& v : f) v = 2.0 * rng.uniform() - 1.0;
    const Mask mask = {1, 1, 0, 1};
    const int action = trial % 2 == 0 ? 0 : 3;
    GradBuffer g(net);
    backprop_logprob(net, f, mask, action, 1.0, g);
    const double err = finite_diff_check([&](const Mlp& m) { return logprob_of(m, f, mask, action); }, net, g, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("batched log-probs match the single-sample path") {
  Rng rng(9, "test/batched");
  const Mlp net = mlp_init({3, 5, 4}, rng());
  Eigen::MatrixXd features(3, 4);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 3; ++i) features(i, j) = 2.0 * rng.uniform() - 1.0;
  }
  MaskMatrix masks = MaskMatrix::Ones(4, 4);
  masks(1, 0) = 0;
  masks(2, 3) = 0;
  const std::vector<int> actions = {0, 1, 3, 1};
  const auto lp = action_logprobs(net, features, masks, actions);
  const std::vector<double> weights = {0.5, -1.0, 2.0, 0.25};
  GradBuffer batched(net);
  accumulate_logprob_grad(net, lp, weights, batched);
  GradBuffer single(net);
  for (int j = 0; j < 4; ++j) {
    const std::vector<double> f(features.col(j).data(), features.col(j).data() + 3);
    Mask m(4);
    for (int a = 0; a < 4; ++a) m[static_cast<std::size_t>(a)] = masks(a, j);
    CHECK(std::abs(lp.chosen(j) - logprob_of(net, f, m, actions[static_cast<std::size_t>(j)])) < 1e-12);
    backprop_logprob(net, f, m, actions[static_cast<std::size_t>(j)], weights[static_cast<std::size_t>(j)], single);
  }
  for (std::size_t i = 0; i < single.params.size(); ++i) {
    CHECK(std::abs(single.params.flat()[i] - batched.params.flat()[i]) < 1e-12);
  }
}

TEST_CASE("adam_step algebra") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.0, 0.0};
    AdamState s(2, 1e-3);
    adam_step(p, g, s);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(s.t == 1);
  }
  SUBCASE("first step moves by lr against the sign") {
    std::vector<double> p = {0.5, 0.5};
    std::vector<double> g = {3.0, -0.02};
    AdamState s(2, 1e-3);
    adam_step(p, g, s);
    CHECK(std::abs((p[0] - 0.5) + 1e-3) < 1e-9);
    CHECK(std::abs((p[1] - 0.5) - 1e-3) < 1e-9);
    CHECK(g[0] == 0.0);
  }
  SUBCASE("two steps follow the moment recursion") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> p = {0.3};
    AdamState s(1, lr);
    double m = 0.0, v = 0.0, theta = 0.3;
    const double gs[] = {0.4, -1.3};
    for (int t = 1; t <= 2; ++t) {
      const double gt = gs[t - 1];
      std::vector<double> g = {gt};
      adam_step(p, g, s);
      m = b1 * m + (1 - b1) * gt;
      v = b2 * v + (1 - b2) * gt * gt;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      theta -= lr * mh / (std::sqrt(vh) + eps);
      CHECK(std::abs(p[0] - theta) < 1e-12);
    }
    CHECK(s.t == 2);
  }
  SUBCASE("non-finite gradient is rejected without side effects") {
    std::vector<double> p = {1.0};
    std::vector<double> g = {NAN};
    AdamState s(1, 1e-3);
    CHECK_THROWS_AS(adam_step(p, g, s), NumericError);
    CHECK(p[0] == 1.0);
    CHECK(s.t == 0);
  }
}

TEST_CASE("mlp_forward and adam_step are bitwise deterministic") {
  Mlp a = mlp_init({3, 4, 2}, 42);
  Mlp b = mlp_init({3, 4, 2}, 42);
  const std::vector<double> f = {0.1, 0.2, 0.3};
  CHECK(mlp_forward(a, f) == mlp_forward(b, f));
  GradBuffer ga(a), gb(b);
  backprop_logprob(a, f, Mask{1, 1}, 0, 1.0, ga);
  backprop_logprob(b, f, Mask{1, 1}, 0, 1.0, gb);
  AdamState sa = adam_init(a, 1e-2), sb = adam_init(b, 1e-2);
  adam_step(a, ga, sa);
  adam_step(b, gb, sb);
  CHECK(a == b);
}

TEST_CASE("finite_diff_check on a quadratic") {
  const std::vector<double> theta = {0.3, -1.2, 2.5};
  std::vector<double> grad(3);
  for (std::size_t i = 0; i < 3; ++i) grad[i] = 2.0 * theta[i];
  const double err = finite_diff_check(
      [](std::span<const double> t) {
        double s = 0.0;
        for (double v : t) s += v * v;
        return s;
      },
      theta, grad, 1e-5);
  CHECK(err < 1e-7);
}

TEST_CASE("parameter storage starts on the vector alignment boundary") {
  // Reductions over unaligned maps would otherwise sum in an order that
  // depends on the heap address, breaking bit-identical reruns.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> spacer(static_cast<std::size_t>(trial + 1));
    const Mlp net = mlp_init({3 + trial % 4, 5, 2}, static_cast<std::uint64_t>(trial));
    const auto address = reinterpret_cast<std::uintptr_t>(net.params().flat().data());
    CHECK(address % EIGEN_MAX_ALIGN_BYTES == 0);
  }
}
