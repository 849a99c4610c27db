#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfdrl/flow.hpp"
#include "nfdrl/transition.hpp"

namespace nfdrl {

/// Samples of the bootstrapped target law together with their log-densities.
struct TargetSampleSet {
  std::vector<double> returns;
  std::vector<double> log_densities;
  bool terminal = false;
};

/// Predicted and target densities evaluated on one shared support.
struct AlignedPair {
  std::vector<double> support;
  std::vector<double> predicted;
  std::vector<double> target;
};

struct BootstrapSample {
  double y_hat = 0.0;
  double log_density = 0.0;
};

struct AlignmentConfig {
  double gamma = 0.99;
  double sigma_final = 0.1;
  double bandwidth = 0.05;
  std::size_t grid_size = 256;
};

/// Pushes a next-state sample through y -> r + gamma * y.
BootstrapSample bootstrap_sample(const ReturnSample& next, double reward, double gamma);

/// Gaussian N(r, sigma) stand-in for the Dirac target of a terminal step.
TargetSampleSet terminal_target(double reward, double sigma, std::span<const double> z_batch);

/// Gaussian-kernel density estimate of `samples` at each query point.
std::vector<double> kde_evaluate(std::span<const double> samples, double bandwidth,
                                 std::span<const double> queries);

/// Linear map from densities known at scattered sample points to values on a
/// grid, by piecewise-linear interpolation (zero outside the samples' hull).
/// The sample positions and grid are frozen when the projection is built, so
/// `apply` is linear in the densities and `adjoint` is its transpose.
class GridProjection {
 public:
  GridProjection() = default;
  GridProjection(std::span<const double> sample_positions, std::span<const double> grid);

  std::vector<double> apply(std::span<const double> sample_values) const;
  std::vector<double> adjoint(std::span<const double> grid_values) const;

  std::size_t grid_size() const { return entries_.size(); }
  std::size_t sample_count() const { return n_samples_; }

 private:
  struct Entry {
    std::size_t lower = 0;
    std::size_t upper = 0;
    double upper_weight = 0.0;
    bool inside = false;
  };
  std::vector<Entry> entries_;
  std::size_t n_samples_ = 0;
};

/// Symmetric uniform grid [-c, c] of `grid_size` points covering every value in
/// both sample sets, padded by 3 * bandwidth.
std::vector<double> shared_support(std::span<const double> a, std::span<const double> b,
                                   std::size_t grid_size, double bandwidth);

struct Alignment {
  AlignedPair pair;
  GridProjection projection;
};

Alignment align_detailed(std::span<const double> predicted_returns,
                         std::span<const double> predicted_densities,
                         const TargetSampleSet& target, std::size_t grid_size,
                         double bandwidth);

AlignedPair align(std::span<const double> predicted_returns,
                  std::span<const double> predicted_densities,
                  const TargetSampleSet& target, std::size_t grid_size, double bandwidth);

/// Arithmetic mean of the flow's mapped returns over z_batch.
double estimate_q(const MixtureFlowParams& flow, std::span<const double> z_batch);

/// Index of the largest Q estimate; ties resolve to the lowest action id.
std::size_t greedy_action(std::span<const MixtureFlowParams> flows,
                          std::span<const double> z_batch);

/// Target samples for one transition. Non-terminal steps pick the greedy
/// next action of the target flows and bootstrap through it; terminal steps
/// use terminal_target.
TargetSampleSet target_samples(std::span<const MixtureFlowParams> next_flows,
                               const Transition& transition,
                               std::span<const double> z_batch,
                               const AlignmentConfig& config);

Alignment build_target_detailed(const MixtureFlowParams& predicted,
                                std::span<const MixtureFlowParams> next_flows,
                                const Transition& transition,
                                std::span<const double> z_batch,
                                const AlignmentConfig& config);

/// Aligned predicted/target pair for transition (x, a, r, x', done).
/// `predicted` is the online flow at (x, a); `next_flows` are the target
/// network's flows at x', one per action (ignored on terminal steps).
AlignedPair build_target(const MixtureFlowParams& predicted,
                         std::span<const MixtureFlowParams> next_flows,
                         const Transition& transition, std::span<const double> z_batch,
                         const AlignmentConfig& config);

}  // namespace nfdrl
