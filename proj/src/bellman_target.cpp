#include "nfdrl/bellman_target.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nfdrl/errors.hpp"

namespace nfdrl {
namespace {

// Kernel contributions beyond this many bandwidths are below 1e-21 and dropped.
constexpr double kKernelCutoff = 10.0;

}  // namespace

BootstrapSample bootstrap_sample(const ReturnSample& next, double reward, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("bootstrap_sample: gamma must be > 0");
  return {reward + gamma * next.y, next.log_density - std::log(gamma)};
}

TargetSampleSet terminal_target(double reward, double sigma, std::span<const double> z_batch) {
  if (!(sigma > 0.0)) throw DomainError("terminal_target: sigma must be > 0");
  TargetSampleSet out;
  out.terminal = true;
  out.returns.reserve(z_batch.size());
  out.log_densities.reserve(z_batch.size());
  const double log_sigma = std::log(sigma);
  for (double z : z_batch) {
    const double y = reward + sigma * z;
    out.returns.push_back(y);
    out.log_densities.push_back(log_normal_pdf((y - reward) / sigma) - log_sigma);
  }
  return out;
}

std::vector<double> kde_evaluate(std::span<const double> samples, double bandwidth,
                                 std::span<const double> queries) {
  if (samples.empty()) throw DomainError("kde_evaluate: no samples");
  if (!(bandwidth > 0.0)) throw DomainError("kde_evaluate: bandwidth must be > 0");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double reach = kKernelCutoff * bandwidth;
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * bandwidth);

  std::vector<double> out(queries.size(), 0.0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double x = queries[q];
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
    auto last = std::upper_bound(first, sorted.end(), x + reach);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) acc += normal_pdf((x - *it) / bandwidth);
    out[q] = acc * norm;
  }
  return out;
}

GridProjection::GridProjection(std::span<const double> sample_positions,
                               std::span<const double> grid)
    : entries_(grid.size()), n_samples_(sample_positions.size()) {
  if (sample_positions.empty()) return;
  std::vector<std::size_t> order(sample_positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample_positions[a] < sample_positions[b];
  });
  const double lo = sample_positions[order.front()];
  const double hi = sample_positions[order.back()];

  std::size_t k = 0;  // grid is increasing, so the bracketing segment only moves right
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    Entry& e = entries_[i];
    if (x < lo || x > hi) continue;
    e.inside = true;
    if (order.size() == 1) {
      e.lower = e.upper = order.front();
      continue;
    }
    while (k + 2 < order.size() && sample_positions[order[k + 1]] < x) ++k;
    const double a = sample_positions[order[k]];
    const double b = sample_positions[order[k + 1]];
    e.lower = order[k];
    e.upper = order[k + 1];
    e.upper_weight = b > a ? std::clamp((x - a) / (b - a), 0.0, 1.0) : 0.5;
  }
}

std::vector<double> GridProjection::apply(std::span<const double> sample_values) const {
  std::vector<double> out(entries_.size(), 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (!e.inside) continue;
    out[i] = (1.0 - e.upper_weight) * sample_values[e.lower] +
             e.upper_weight * sample_values[e.upper];
  }
  return out;
}

std::vector<double> GridProjection::adjoint(std::span<const double> grid_values) const {
  std::vector<double> out(n_samples_, 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (!e.inside) continue;
    out[e.lower] += (1.0 - e.upper_weight) * grid_values[i];
    out[e.upper] += e.upper_weight * grid_values[i];
  }
  return out;
}

std::vector<double> shared_support(std::span<const double> a, std::span<const double> b,
                                   std::size_t grid_size, double bandwidth) {
  if (grid_size < 2) throw DomainError("shared_support: grid needs at least 2 points");
  double extent = 0.0;
  for (double v : a) extent = std::max(extent, std::abs(v));
  for (double v : b) extent = std::max(extent, std::abs(v));
  const double c = std::max(extent + 3.0 * bandwidth, 1e-3);
  std::vector<double> grid(grid_size);
  const double step = 2.0 * c / static_cast<double>(grid_size - 1);
  for (std::size_t i = 0; i < grid_size; ++i) {
    grid[i] = -c + step * static_cast<double>(i);
  }
  // Pin both ends so the interval is exactly symmetric.
  grid.front() = -c;
  grid.back() = c;
  return grid;
}

Alignment align_detailed(std::span<const double> predicted_returns,
                         std::span<const double> predicted_densities,
                         const TargetSampleSet& target, std::size_t grid_size,
                         double bandwidth) {
  if (predicted_returns.empty() || target.returns.empty()) {
    throw DomainError("align: both sample sets must be non-empty");
  }
  if (predicted_returns.size() != predicted_densities.size()) {
    throw DomainError("align: predicted returns and densities differ in length");
  }
  Alignment out;
  out.pair.support = shared_support(predicted_returns, target.returns, grid_size, bandwidth);
  out.projection = GridProjection(predicted_returns, out.pair.support);
  out.pair.predicted = out.projection.apply(predicted_densities);
  out.pair.target = kde_evaluate(target.returns, bandwidth, out.pair.support);
  return out;
}

AlignedPair align(std::span<const double> predicted_returns,
                  std::span<const double> predicted_densities,
                  const TargetSampleSet& target, std::size_t grid_size, double bandwidth) {
  return align_detailed(predicted_returns, predicted_densities, target, grid_size, bandwidth)
      .pair;
}

double estimate_q(const MixtureFlowParams& flow, std::span<const double> z_batch) {
  if (z_batch.empty()) throw DomainError("estimate_q: empty z batch");
  double acc = 0.0;
  for (double z : z_batch) acc += forward_sample(flow, z).y;
  return acc / static_cast<double>(z_batch.size());
}

std::size_t greedy_action(std::span<const MixtureFlowParams> flows,
                          std::span<const double> z_batch) {
  if (flows.empty()) throw DomainError("greedy_action: no actions");
  std::size_t best = 0;
  double best_q = estimate_q(flows[0], z_batch);
  for (std::size_t a = 1; a < flows.size(); ++a) {
    const double q = estimate_q(flows[a], z_batch);
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

TargetSampleSet target_samples(std::span<const MixtureFlowParams> next_flows,
                               const Transition& transition,
                               std::span<const double> z_batch,
                               const AlignmentConfig& config) {
  if (transition.done) {
    return terminal_target(transition.reward, config.sigma_final, z_batch);
  }
  const MixtureFlowParams& next = next_flows[greedy_action(next_flows, z_batch)];
  TargetSampleSet out;
  out.returns.reserve(z_batch.size());
  out.log_densities.reserve(z_batch.size());
  for (double z : z_batch) {
    const BootstrapSample b =
        bootstrap_sample(forward_sample(next, z), transition.reward, config.gamma);
    out.returns.push_back(b.y_hat);
    out.log_densities.push_back(b.log_density);
  }
  return out;
}

Alignment build_target_detailed(const MixtureFlowParams& predicted,
                                std::span<const MixtureFlowParams> next_flows,
                                const Transition& transition,
                                std::span<const double> z_batch,
                                const AlignmentConfig& config) {
  const TargetSampleSet target = target_samples(next_flows, transition, z_batch, config);
  std::vector<double> returns;
  std::vector<double> densities;
  returns.reserve(z_batch.size());
  densities.reserve(z_batch.size());
  for (double z : z_batch) {
    const ReturnSample s = forward_sample(predicted, z);
    returns.push_back(s.y);
    densities.push_back(std::exp(s.log_density));
  }
  return align_detailed(returns, densities, target, config.grid_size, config.bandwidth);
}

AlignedPair build_target(const MixtureFlowParams& predicted,
                         std::span<const MixtureFlowParams> next_flows,
                         const Transition& transition, std::span<const double> z_batch,
                         const AlignmentConfig& config) {
  return build_target_detailed(predicted, next_flows, transition, z_batch, config).pair;
}

}  // namespace nfdrl
