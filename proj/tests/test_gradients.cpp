#include <doctest.h>

#include <cmath>
#include <random>

#include "nfdrl/loss_pipeline.hpp"
#include "nfdrl/network.hpp"

using namespace nfdrl;

namespace {

NetworkShape tiny_shape() { return NetworkShape{3, 8, 8, 2, 2}; }

// Random but non-degenerate parameters: the default init zeroes the head
// weights, which hides most of the head gradient.
NetworkParams random_net(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkParams net = init_network(tiny_shape(), rng);
  std::normal_distribution<double> g(0.0, 0.3);
  net.for_each([&](std::size_t, std::size_t, double& v) { v += g(rng); });
  return net;
}

std::vector<Transition> tiny_batch() {
  return {Transition{0, 0, 0.3, 1, false}, Transition{1, 1, -0.5, 2, false},
          Transition{2, 0, 0.8, 0, true}, Transition{0, 1, 0.1, 2, true}};
}

std::vector<double> base_samples(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed + 1000);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> z(n);
  for (double& v : z) v = g(rng);
  return z;
}

struct FdReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

FdReport finite_difference_check(LossKind kind, BatchReduction reduction, std::uint64_t seed,
                                 DensityGradient mode = DensityGradient::base_sample) {
  const NetworkParams net = random_net(seed);
  const NetworkParams target = random_net(seed + 77);
  LossSettings settings;
  settings.kind = kind;
  settings.reduction = reduction;
  settings.density_gradient = mode;
  settings.alignment.gamma = 0.9;
  settings.alignment.grid_size = 64;
  settings.alignment.bandwidth = 0.2;
  const auto batch = tiny_batch();
  const auto z = base_samples(seed, 20);
  const LossContext ctx = freeze_loss_context(net, target, batch, z, settings);
  const LossAndGrad lg = loss_and_grad(net, ctx);
  CHECK(lg.loss == doctest::Approx(evaluate_loss(net, ctx)).epsilon(1e-12));

  FdReport report;
  const double h = 1e-5;
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    for (std::size_t k = 0; k < net.tensor(t).size(); ++k) {
      NetworkParams plus = net;
      NetworkParams minus = net;
      plus.tensor(t)[k] += h;
      minus.tensor(t)[k] -= h;
      const double fd = (evaluate_loss(plus, ctx) - evaluate_loss(minus, ctx)) / (2.0 * h);
      const double an = lg.grads.tensor(t)[k];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-7});
      if (rel > report.max_rel) {
        report.max_rel = rel;
        MESSAGE(kTensorNames[t] << "[" << k << "] fd " << fd << " analytic " << an);
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace

TEST_CASE("tiny network stays under 500 parameters") {
  CHECK(random_net(0).parameter_count() <= 500);
}

TEST_CASE("surrogate pipeline gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const FdReport r = finite_difference_check(LossKind::surrogate, BatchReduction::mean_loss, seed);
    CHECK(r.max_rel <= 1e-4);
  }
}

TEST_CASE("exact pipeline gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const FdReport r = finite_difference_check(LossKind::exact, BatchReduction::mean_loss, seed);
    CHECK(r.max_rel <= 1e-4);
  }
}

TEST_CASE("squared batch reduction gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CHECK(finite_difference_check(LossKind::surrogate, BatchReduction::mean_squared_loss, seed)
              .max_rel <= 1e-4);
    CHECK(finite_difference_check(LossKind::exact, BatchReduction::mean_squared_loss, seed)
              .max_rel <= 1e-4);
  }
}

TEST_CASE("fixed-return gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CHECK(finite_difference_check(LossKind::surrogate, BatchReduction::mean_loss, seed,
                                  DensityGradient::fixed_return)
              .max_rel <= 1e-4);
    CHECK(finite_difference_check(LossKind::exact, BatchReduction::mean_loss, seed,
                                  DensityGradient::fixed_return)
              .max_rel <= 1e-4);
  }
}
