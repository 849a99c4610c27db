#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nfdrl/bellman_target.hpp"
#include "nfdrl/config.hpp"
#include "nfdrl/envs.hpp"
#include "nfdrl/network.hpp"

namespace nfdrl {

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  /// Uniform sampling with replacement. Requires size() >= n.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

/// Linear decay from start_e to end_e over exploration_fraction *
/// total_timesteps steps, constant afterwards.
double epsilon_schedule(std::size_t step, const TrainConfig& config);

/// epsilon-greedy over estimate_q of each action's flow; ties go to the lowest id.
std::size_t select_action(const NetworkParams& net, std::size_t state, double epsilon,
                          std::span<const double> z_batch, Rng& rng);

/// Stratified standard-normal points Phi^-1((k + 0.5) / n), k = 0..n-1.
std::vector<double> normal_quantile_grid(std::size_t n);

/// Greedy action per state under `net` (terminal states included).
std::vector<std::size_t> greedy_policy(const NetworkParams& net,
                                       std::span<const double> z_batch);

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  double eval_cramer_mean = 0.0;
  double greedy_return_mean = 0.0;
  double epsilon = 0.0;
};

struct EvalResult {
  double cramer_mean = 0.0;         // over non-terminal (state, action) pairs
  double greedy_return_mean = 0.0;  // discounted return from the start state
};

/// Compares every non-terminal (state, action) flow against Monte-Carlo
/// returns of the network's own greedy policy.
EvalResult evaluate(const NetworkParams& net, const TabularMdp& mdp, std::size_t rollouts,
                    Rng& rng);

struct TrainResult {
  NetworkParams net;
  AdamOptimizer optimizer;
  std::vector<MetricsRow> metrics;
  std::vector<double> losses;  // one entry per optimizer step
  std::size_t timesteps = 0;
};

/// Called after each evaluation; useful for progress logging.
using TrainObserver = std::function<void(const MetricsRow&)>;

TrainResult train(const TabularMdp& mdp, const TrainConfig& config,
                  const TrainObserver& observer = {});

struct DistributionTable {
  std::size_t state = 0;
  std::size_t action = 0;
  std::vector<double> support;
  std::vector<double> density;
};

inline constexpr std::size_t kExportPoints = 512;

/// Density of the learned flow on a uniform grid spanning [-g_max, g_max].
DistributionTable export_distribution(const NetworkParams& net, std::size_t state,
                                      std::size_t action,
                                      std::size_t points = kExportPoints);

/// One table per (state, action), states major.
std::vector<DistributionTable> export_all(const NetworkParams& net,
                                          std::size_t points = kExportPoints);

}  // namespace nfdrl
