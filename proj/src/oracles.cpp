#include "nfdrl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfdrl/agent.hpp"
#include "nfdrl/cramer.hpp"
#include "nfdrl/errors.hpp"

namespace nfdrl {

namespace {

std::vector<double> random_support(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> y(n);
  for (double& v : y) v = u(rng);
  std::sort(y.begin(), y.end());
  return y;
}

std::vector<double> softmax_noise(std::size_t n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (double& v : x) {
    v = g(rng);
    peak = std::max(peak, v);
  }
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : x) v /= total;
  return x;
}

std::size_t random_length(Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(32, 256)(rng);
}

double surrogate(std::span<const double> support, std::span<const double> p,
                 std::span<const double> q) {
  AlignedPair pair{{support.begin(), support.end()}, {p.begin(), p.end()}, {q.begin(), q.end()}};
  return surrogate_cramer(pair).value;
}

double relative_gap(double got, double want) {
  const double scale = std::max(std::abs(want), std::numeric_limits<double>::min());
  return std::abs(got - want) / scale;
}

PropertyReport finish(PropertyReport r) {
  r.pass = r.max_violation <= r.tolerance;
  if (!r.asserted) r.pass = true;
  return r;
}

AlignedPair pushforward(const AlignedPair& pair, double shift, double scale) {
  AlignedPair out;
  const double jac = 1.0 / std::abs(scale);
  for (double y : pair.support) out.support.push_back(shift + scale * y);
  for (double v : pair.predicted) out.predicted.push_back(v * jac);
  for (double v : pair.target) out.target.push_back(v * jac);
  return out;
}

AlignedPair random_pair(Rng& rng) {
  const std::size_t n = random_length(rng);
  AlignedPair pair;
  pair.support = random_support(n, rng);
  pair.predicted = softmax_noise(n, rng);
  pair.target = softmax_noise(n, rng);
  return pair;
}

}  // namespace

nlohmann::json report_to_json(const PropertyReport& report) {
  return {{"name", report.name},
          {"trials", report.trials},
          {"max_violation", report.max_violation},
          {"tolerance", report.tolerance},
          {"asserted", report.asserted},
          {"pass", report.pass}};
}

PropertyReport check_metric_axioms(std::size_t n_trials, Rng& rng) {
  if (n_trials == 0) throw DomainError("check_metric_axioms: n_trials must be >= 1");
  PropertyReport r{"metric_axioms", n_trials, 0.0, 1e-12, true, true};
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::size_t n = random_length(rng);
    const auto y = random_support(n, rng);
    const auto p = softmax_noise(n, rng);
    const auto q = softmax_noise(n, rng);
    const auto s = softmax_noise(n, rng);

    const double pq = surrogate(y, p, q);
    const double qp = surrogate(y, q, p);
    const double qs = surrogate(y, q, s);
    const double ps = surrogate(y, p, s);
    const double pp = surrogate(y, p, p);

    double v = 0.0;
    v = std::max(v, std::max({-pq, -qs, -ps, 0.0}));
    if (pq != qp) v = std::max(v, std::max(std::abs(pq - qp), r.tolerance * 2.0));
    v = std::max(v, std::abs(pp));
    v = std::max(v, ps - (pq + qs));
    // identity of indiscernibles: a vanishing distance must mean equal vectors
    for (auto [d, a, b] : {std::tuple{pq, &p, &q}, std::tuple{qs, &q, &s}}) {
      if (d == 0.0) {
        for (std::size_t i = 0; i < n; ++i) v = std::max(v, std::abs((*a)[i] - (*b)[i]));
      }
    }
    r.max_violation = std::max(r.max_violation, v);
  }
  return finish(r);
}

PropertyReport check_translation_exact(std::size_t n_trials, Rng& rng) {
  PropertyReport r{"translation_invariance_exact", n_trials, 0.0, 0.0, true, true};
  constexpr double kUnit = 1.0 / 1024.0;
  std::uniform_int_distribution<int> tick(-8192, 8192);
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::size_t n = random_length(rng);
    std::vector<int> ticks(n);
    for (int& k : ticks) k = tick(rng);
    std::sort(ticks.begin(), ticks.end());
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = ticks[i] * kUnit;
    const auto p = softmax_noise(n, rng);
    const auto q = softmax_noise(n, rng);
    const double b = tick(rng) * kUnit;
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = y[i] + b;
    r.max_violation = std::max(r.max_violation, std::abs(surrogate(shifted, p, q) - surrogate(y, p, q)));
  }
  return finish(r);
}

PropertyReport check_translation_invariance(std::size_t n_trials, Rng& rng) {
  PropertyReport r{"translation_invariance", n_trials, 0.0, 1e-12, true, true};
  std::uniform_real_distribution<double> shift(-20.0, 20.0);
  for (std::size_t t = 0; t < n_trials; ++t) {
    const AlignedPair pair = random_pair(rng);
    const double b = t == 0 ? 17.3 : shift(rng);
    const double base = surrogate_cramer(pair).value;
    const double moved = surrogate_cramer(pushforward(pair, b, 1.0)).value;
    r.max_violation = std::max(r.max_violation, relative_gap(moved, base));
  }
  return finish(r);
}

PropertyReport check_pushforward_scaling(std::size_t n_trials, Rng& rng) {
  PropertyReport r{"pushforward_scaling", n_trials, 0.0, 1e-12, true, true};
  for (std::size_t t = 0; t < n_trials; ++t) {
    const AlignedPair pair = random_pair(rng);
    const double base = surrogate_cramer(pair).value;
    for (double a : {0.25, 0.5, 2.0, 4.0, -2.0}) {
      const double scaled = surrogate_cramer(pushforward(pair, 0.0, a)).value;
      r.max_violation =
          std::max(r.max_violation, relative_gap(scaled, base / std::sqrt(std::abs(a))));
    }
  }
  return finish(r);
}

std::vector<BellmanScalingRow> measure_bellman_scaling(std::span<const double> gammas,
                                                       std::size_t n_trials, Rng& rng) {
  std::uniform_real_distribution<double> reward(-3.0, 3.0);
  std::vector<BellmanScalingRow> rows;
  for (double gamma : gammas) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("measure_bellman_scaling: gamma outside (0, 1]");
    BellmanScalingRow row{gamma, 0.0, 0.0};
    for (std::size_t t = 0; t < n_trials; ++t) {
      const AlignedPair pair = random_pair(rng);
      const AlignedPair moved = pushforward(pair, reward(rng), gamma);
      row.surrogate_ratio = std::max(
          row.surrogate_ratio, surrogate_cramer(moved).value / surrogate_cramer(pair).value);
      row.exact_ratio = std::max(row.exact_ratio,
                                 exact_cramer(moved, 2.0).value / exact_cramer(pair, 2.0).value);
    }
    rows.push_back(row);
  }
  return rows;
}

PropertyReport check_exact_contraction(std::span<const double> gammas, std::size_t n_trials,
                                       Rng& rng) {
  PropertyReport r{"exact_cramer_contraction", n_trials, 0.0, 1e-9, true, true};
  for (const auto& row : measure_bellman_scaling(gammas, n_trials, rng)) {
    r.max_violation = std::max(r.max_violation, row.exact_ratio - std::sqrt(row.gamma));
  }
  r.max_violation = std::max(r.max_violation, 0.0);
  return finish(r);
}

PropertyReport report_surrogate_contraction(std::span<const double> gammas,
                                            std::size_t n_trials, Rng& rng) {
  PropertyReport r{"surrogate_bellman_scaling", n_trials, 0.0, 0.0, false, true};
  for (const auto& row : measure_bellman_scaling(gammas, n_trials, rng)) {
    r.max_violation = std::max(r.max_violation, row.surrogate_ratio - row.gamma);
  }
  return finish(r);
}

BernoulliResult bernoulli_unbiasedness(double theta_star, std::size_t m, double grid_step) {
  if (!(theta_star >= 0.0 && theta_star <= 1.0)) throw DomainError("bernoulli_unbiasedness: theta* outside [0, 1]");
  if (m == 0) throw DomainError("bernoulli_unbiasedness: m must be >= 1");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw DomainError("bernoulli_unbiasedness: bad grid step");

  // Binomial weights of k successes out of m draws.
  std::vector<double> weight(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    const double log_choose = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
    const double a = k == 0 ? 0.0 : static_cast<double>(k) * std::log(theta_star);
    const double b = k == m ? 0.0 : static_cast<double>(m - k) * std::log1p(-theta_star);
    weight[k] = std::exp(log_choose + a + b);
  }

  const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
  BernoulliResult out;
  double best_expected = std::numeric_limits<double>::infinity();
  double best_true = std::numeric_limits<double>::infinity();
  out.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g <= steps; ++g) {
    const double theta = std::min(1.0, static_cast<double>(g) * grid_step);
    const AlignedPair truth{{0.0, 1.0}, {1.0 - theta, theta}, {1.0 - theta_star, theta_star}};
    const double true_loss = surrogate_energy(truth);
    double expected = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      if (weight[k] == 0.0) continue;
      const double hat = static_cast<double>(k) / static_cast<double>(m);
      const AlignedPair sample{{0.0, 1.0}, {1.0 - theta, theta}, {1.0 - hat, hat}};
      expected += weight[k] * surrogate_energy(sample);
    }
    if (expected < best_expected) {
      best_expected = expected;
      out.expected_argmin = theta;
    }
    if (true_loss < best_true) {
      best_true = true_loss;
      out.true_argmin = theta;
    }
    out.min_gap = std::min(out.min_gap, expected - true_loss);
  }
  return out;
}

PropertyReport check_bernoulli_unbiasedness() {
  PropertyReport r{"bernoulli_unbiasedness", 0, 0.0, 1e-3 + 1e-12, true, true};
  for (int i = 1; i <= 9; ++i) {
    const double theta_star = i / 10.0;
    for (std::size_t m : {1, 2, 5, 10}) {
      const BernoulliResult b = bernoulli_unbiasedness(theta_star, m);
      r.max_violation = std::max({r.max_violation, std::abs(b.expected_argmin - theta_star),
                                  std::abs(b.true_argmin - theta_star)});
      ++r.trials;
    }
  }
  return finish(r);
}

std::vector<SampleCountRow> sample_count_study(const TabularMdp& mdp,
                                               std::span<const std::size_t> n_samples,
                                               std::size_t repeats, const TrainConfig& config) {
  if (!std::is_sorted(n_samples.begin(), n_samples.end())) {
    throw DomainError("sample_count_study: n_samples must be sorted ascending");
  }
  if (repeats == 0) throw DomainError("sample_count_study: repeats must be >= 1");
  std::vector<SampleCountRow> rows;
  for (std::size_t n : n_samples) {
    SampleCountRow row{n, 0.0, {}};
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      TrainConfig c = config;
      c.n_samples = n;
      c.seed = config.seed + rep;
      c.eval_interval = c.total_timesteps;
      const TrainResult result = train(mdp, c);
      row.per_seed.push_back(result.metrics.back().eval_cramer_mean);
      row.mean_cramer += row.per_seed.back();
    }
    row.mean_cramer /= static_cast<double>(repeats);
    rows.push_back(row);
  }
  return rows;
}

std::vector<PropertyReport> run_properties(std::size_t n_trials, std::uint64_t seed) {
  const double gammas[] = {0.5, 0.9, 0.99};
  std::vector<PropertyReport> out;
  // One stream per property so adding trials to one leaves the others unchanged.
  Rng r1(seed), r2(seed + 1), r3(seed + 2), r4(seed + 3), r5(seed + 4), r6(seed + 5);
  out.push_back(check_metric_axioms(n_trials, r1));
  out.push_back(check_translation_exact(n_trials, r2));
  out.push_back(check_translation_invariance(n_trials, r3));
  out.push_back(check_pushforward_scaling(n_trials, r4));
  out.push_back(check_exact_contraction(gammas, n_trials, r5));
  out.push_back(report_surrogate_contraction(gammas, n_trials, r6));
  out.push_back(check_bernoulli_unbiasedness());
  return out;
}

}  // namespace nfdrl
