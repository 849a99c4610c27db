#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfdrl/config.hpp"
#include "nfdrl/envs.hpp"

namespace nfdrl {

struct PropertyReport {
  std::string name;
  std::size_t trials = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool asserted = true;  // measured-only properties never fail the suite
  bool pass = true;
};

nlohmann::json report_to_json(const PropertyReport& report);

/// Non-negativity, symmetry, identity of indiscernibles and the triangle
/// inequality of the surrogate distance on random density triples.
PropertyReport check_metric_axioms(std::size_t n_trials, Rng& rng);

/// Shift invariance on supports where every difference is exactly
/// representable; the violation is the largest absolute change (tolerance 0).
PropertyReport check_translation_exact(std::size_t n_trials, Rng& rng);

/// Shift invariance for arbitrary real shifts; relative tolerance 1e-12.
PropertyReport check_translation_invariance(std::size_t n_trials, Rng& rng);

/// y -> a y, p -> p / |a| must scale the surrogate by |a|^{-1/2}
/// for a in {0.25, 0.5, 2, 4}; relative tolerance 1e-12.
PropertyReport check_pushforward_scaling(std::size_t n_trials, Rng& rng);

struct BellmanScalingRow {
  double gamma = 1.0;
  double surrogate_ratio = 0.0;  // worst case over trials
  double exact_ratio = 0.0;      // worst case over trials, p = 2
};

/// Distance ratio d(T pi1, T pi2) / d(pi1, pi2) under y -> r + gamma y.
std::vector<BellmanScalingRow> measure_bellman_scaling(std::span<const double> gammas,
                                                       std::size_t n_trials, Rng& rng);

/// Exact Cramér (p = 2) must contract by at most gamma^{1/2} (+1e-9).
PropertyReport check_exact_contraction(std::span<const double> gammas, std::size_t n_trials,
                                       Rng& rng);

/// Reports, without asserting, how far the surrogate ratio exceeds gamma.
PropertyReport report_surrogate_contraction(std::span<const double> gammas,
                                            std::size_t n_trials, Rng& rng);

struct BernoulliResult {
  double expected_argmin = 0.0;  // argmin of the exactly enumerated expected sample loss
  double true_argmin = 0.0;      // argmin of the population loss
  double min_gap = 0.0;          // min over the grid of expected - true loss
};

/// Bernoulli(theta_star) target, Bernoulli(theta) model, m-sample empirical
/// targets enumerated with binomial weights. Losses use the squared
/// surrogate on support {0, 1}, i.e. 2 (theta - theta_hat)^2.
BernoulliResult bernoulli_unbiasedness(double theta_star, std::size_t m,
                                       double grid_step = 1e-3);

PropertyReport check_bernoulli_unbiasedness();

struct SampleCountRow {
  std::size_t n_samples = 0;
  double mean_cramer = 0.0;
  std::vector<double> per_seed;
};

/// Trains on `mdp` once per (n_samples, seed) and reports the mean final
/// Cramér distance to Monte-Carlo returns.
std::vector<SampleCountRow> sample_count_study(const TabularMdp& mdp,
                                               std::span<const std::size_t> n_samples,
                                               std::size_t repeats, const TrainConfig& config);

/// Every fast property, in a fixed order.
std::vector<PropertyReport> run_properties(std::size_t n_trials, std::uint64_t seed);

}  // namespace nfdrl
