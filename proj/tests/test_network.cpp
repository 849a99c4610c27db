#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nfdrl/errors.hpp"
#include "nfdrl/loss_pipeline.hpp"
#include "nfdrl/network.hpp"
#include "support/test_oracles.hpp"

using namespace nfdrl;
namespace to = testing_oracles;

namespace {

NetworkShape small_shape() { return NetworkShape{5, 16, 12, 3, 4}; }

NetworkParams perturbed(std::uint64_t seed, double spread = 0.5) {
  std::mt19937_64 rng(seed);
  NetworkParams net = init_network(small_shape(), rng);
  std::normal_distribution<double> g(0.0, spread);
  net.for_each([&](std::size_t, std::size_t, double& v) { v += g(rng); });
  return net;
}

}  // namespace

TEST_CASE("activations") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("fresh network gives uniform weights, spread means and the base half-range") {
  std::mt19937_64 rng(41);
  const NetworkParams net = init_network(small_shape(), rng);
  for (std::size_t s = 0; s < 5; ++s) {
    for (const MixtureFlowParams& f : forward_params(net, one_hot(s, 5))) {
      for (double w : f.weights()) CHECK(w == doctest::Approx(0.25));
      CHECK(f.means()[0] == doctest::Approx(-1.0));
      CHECK(f.means()[3] == doctest::Approx(1.0));
      CHECK(f.means()[1] == doctest::Approx(-1.0 / 3.0));
      CHECK(f.g_max() == doctest::Approx(std::log(2.0) + 0.1).epsilon(1e-12));
      CHECK(f.scales()[2] == doctest::Approx(std::log(2.0) + 1e-4));
    }
  }
}

TEST_CASE("head slice decoding") {
  // n = 2: logits, means, scale pre-activations, g_max pre-activation
  const std::vector<double> head = {0.0, std::log(3.0), -0.5, 0.7, 0.0, -40.0, 2.0};
  const MixtureFlowParams f = head_to_flow(head, 2);
  CHECK(f.weights()[0] == doctest::Approx(0.25));
  CHECK(f.weights()[1] == doctest::Approx(0.75));
  CHECK(f.means()[0] == -0.5);
  CHECK(f.scales()[0] == doctest::Approx(std::log(2.0) + 1e-4));
  CHECK(f.scales()[1] >= kScaleFloor);
  CHECK(f.g_max() == doctest::Approx(std::log1p(std::exp(2.0)) + 0.1));
}

TEST_CASE("activation safety on random parameters") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkParams net = perturbed(seed, 3.0);
    for (std::size_t s = 0; s < 5; ++s) {
      for (const MixtureFlowParams& f : forward_params(net, one_hot(s, 5))) {
        double total = 0.0;
        for (double w : f.weights()) total += w;
        CHECK(std::abs(total - 1.0) <= 1e-12);
        for (double sc : f.scales()) CHECK(sc >= 1e-4);
        CHECK(f.g_max() >= 0.1);
      }
    }
  }
}

TEST_CASE("input dimension is checked") {
  const NetworkParams net = perturbed(1);
  CHECK_THROWS_AS(forward(net, std::vector<double>(4, 0.0)), DomainError);
  CHECK_THROWS_AS(one_hot(5, 5), DomainError);
}

TEST_CASE("backward matches finite differences of an arbitrary head objective") {
  const NetworkParams net = perturbed(2);
  const std::vector<double> x = {0.2, -1.0, 0.0, 0.5, 1.5};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> c(small_shape().head_outputs());
  for (double& v : c) v = g(rng);
  auto objective = [&](const NetworkParams& n) {
    const auto head = forward(n, x).head;
    double acc = 0.0;
    for (std::size_t i = 0; i < head.size(); ++i) acc += c[i] * head[i];
    return acc;
  };
  GradientSet grads(small_shape());
  backward(net, forward(net, x), c, grads);
  const double h = 1e-6;
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    for (std::size_t k = 0; k < net.tensor(t).size(); k += 7) {
      NetworkParams plus = net, minus = net;
      plus.tensor(t)[k] += h;
      minus.tensor(t)[k] -= h;
      const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
      CHECK(grads.tensor(t)[k] == doctest::Approx(fd).epsilon(1e-6).scale(1e-8));
    }
  }
}

TEST_CASE("log-density head gradient matches finite differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.8);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> head(13);
    for (double& v : head) v = g(rng);
    const MixtureFlowParams flow = head_to_flow(head, 4);
    const double z = 1.5 * g(rng);
    const double y = forward_sample(flow, z).y;
    // Returns pressed against the support edge cannot be perturbed safely.
    const double u = mixture_cdf(flow, z);
    if (u < 1e-4 || u > 1.0 - 1e-4) continue;
    std::vector<double> base(13), fixed(13);
    log_density_head_gradient(flow, head, z, DensityGradient::base_sample, base);
    log_density_head_gradient(flow, head, z, DensityGradient::fixed_return, fixed);
    // Five-point stencil with a wide step: the fixed-return oracle loses
    // digits near the support edges, so noise rather than truncation dominates.
    const double h = 1e-4;
    for (std::size_t j = 0; j < head.size(); ++j) {
      auto shifted = [&](double d) {
        auto v = head;
        v[j] += d;
        return head_to_flow(v, 4);
      };
      auto stencil = [&](auto&& f) {
        return (-f(shifted(2 * h)) + 8 * f(shifted(h)) - 8 * f(shifted(-h)) + f(shifted(-2 * h))) /
               (12 * h);
      };
      const double fd_base =
          stencil([&](const MixtureFlowParams& p) { return forward_sample(p, z).log_density; });
      const double fd_fixed = stencil([&](const MixtureFlowParams& p) {
        return std::log(to::reference_density(p, to::reference_inverse(p, y)));
      });
      INFO("trial " << trial << " j " << j << " z " << z);
      CHECK(std::abs(base[j] - fd_base) <= 1e-5 * std::abs(fd_base) + 1e-9);
      CHECK(std::abs(fixed[j] - fd_fixed) <= 1e-5 * std::abs(fd_fixed) + 1e-9);
    }
  }
}

TEST_CASE("global norm clipping") {
  GradientSet grads(small_shape());
  grads.fill(0.0);
  grads.tensor(1)[0] = 3.6;
  grads.tensor(5)[2] = -4.8;
  CHECK(grads.global_norm() == doctest::Approx(6.0));
  CHECK(clip_global_norm(grads, 3.0) == doctest::Approx(6.0));
  CHECK(grads.global_norm() == doctest::Approx(3.0));
  CHECK(grads.tensor(1)[0] == doctest::Approx(1.8));
  CHECK(grads.tensor(5)[2] == doctest::Approx(-2.4));
  GradientSet small(small_shape());
  small.tensor(0)[0] = 0.5;
  clip_global_norm(small, 3.0);
  CHECK(small.tensor(0)[0] == 0.5);
}

TEST_CASE("adam step") {
  NetworkParams net = perturbed(5);
  const NetworkParams start = net;
  AdamOptimizer opt(small_shape(), 0.01);

  GradientSet zero(small_shape());
  opt.step(net, zero, 3.0);
  CHECK(net == start);

  // First bias-corrected step moves each parameter by lr * sign(g).
  NetworkParams a = start;
  AdamOptimizer first(small_shape(), 0.01);
  GradientSet g(small_shape());
  g.tensor(4)[0] = 0.2;
  g.tensor(4)[1] = -0.1;
  first.step(a, g, 3.0);
  CHECK(a.tensor(4)[0] == doctest::Approx(start.tensor(4)[0] - 0.01).epsilon(1e-9));
  CHECK(a.tensor(4)[1] == doctest::Approx(start.tensor(4)[1] + 0.01).epsilon(1e-9));
  CHECK(a.tensor(4)[2] == start.tensor(4)[2]);
  CHECK(first.step_count() == 1);

  NetworkParams b = start;
  AdamOptimizer second(small_shape(), 0.01);
  second.step(b, g, 3.0);
  CHECK(a == b);
  CHECK(first == second);
}

TEST_CASE("adam rejects non-finite gradients and leaves state untouched") {
  NetworkParams net = perturbed(6);
  const NetworkParams start = net;
  AdamOptimizer opt(small_shape(), 0.01);
  GradientSet g(small_shape());
  g.tensor(0)[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(net, g, 3.0), DomainError);
  CHECK(net == start);
  CHECK(opt.step_count() == 0);
}

TEST_CASE("target sync is a deep copy") {
  NetworkParams net = perturbed(7);
  const NetworkParams target = sync_target(net);
  CHECK(target == net);
  net.tensor(0)[0] += 1.0;
  CHECK(!(target == net));
  CHECK(sync_target(target) == target);
}

TEST_CASE("network and optimizer json round trip bit-exactly") {
  NetworkParams net = perturbed(8);
  AdamOptimizer opt(small_shape(), 0.003);
  GradientSet g(small_shape());
  g.fill(0.1);
  opt.step(net, g, 3.0);
  const NetworkParams back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
  CHECK(back == net);
  const AdamOptimizer opt_back =
      AdamOptimizer::from_json(nlohmann::json::parse(opt.to_json().dump()), small_shape());
  CHECK(opt_back == opt);
  nlohmann::json broken = network_to_json(net);
  broken["tensors"].erase("head.bias");
  CHECK_THROWS_AS(network_from_json(broken), ConfigError);
}

TEST_CASE("loss is unchanged when the batch is duplicated") {
  const NetworkParams net = perturbed(9, 0.2);
  const NetworkParams target = perturbed(10, 0.2);
  const std::vector<double> z = {-1.2, -0.3, 0.1, 0.6, 1.4, 2.0};
  const std::vector<Transition> one = {Transition{1, 2, 0.4, 3, false}};
  const std::vector<Transition> two = {one[0], one[0]};
  LossSettings settings;
  settings.alignment.grid_size = 32;
  for (BatchReduction r : {BatchReduction::mean_loss, BatchReduction::mean_squared_loss}) {
    settings.reduction = r;
    const LossAndGrad a = loss_and_grad(net, target, one, z, settings);
    const LossAndGrad b = loss_and_grad(net, target, two, z, settings);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    for (std::size_t t = 0; t < kTensorCount; ++t) {
      for (std::size_t k = 0; k < a.grads.tensor(t).size(); ++k) {
        CHECK(a.grads.tensor(t)[k] == doctest::Approx(b.grads.tensor(t)[k]).epsilon(1e-12));
      }
    }
  }
}
