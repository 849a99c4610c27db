#include "nfdrl/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "nfdrl/agent.hpp"
#include "nfdrl/errors.hpp"

namespace nfdrl {

double flow_cdf(const MixtureFlowParams& flow, double y) {
  const double g = flow.g_max();
  if (y <= -g) return 0.0;
  if (y >= g) return 1.0;
  return normal_cdf(invert_flow(flow, y));
}

double cramer_to_samples(const MixtureFlowParams& flow, std::span<const double> samples,
                         double p, std::size_t points) {
  if (samples.empty()) throw DomainError("cramer_to_samples: no samples");
  if (points < 2) throw DomainError("cramer_to_samples: need at least 2 nodes");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = std::min(-flow.g_max(), sorted.front());
  const double hi = std::max(flow.g_max(), sorted.back());
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double n = static_cast<double>(sorted.size());

  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = i + 1 == points ? hi : lo + step * static_cast<double>(i);
    const double empirical =
        static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
        n;
    const double term = std::pow(std::abs(flow_cdf(flow, x) - empirical), p);
    if (i > 0) acc += 0.5 * (term + prev) * step;
    prev = term;
  }
  return std::pow(acc, 1.0 / p);
}

Moments flow_moments(const MixtureFlowParams& flow, std::size_t points) {
  const std::vector<double> z = normal_quantile_grid(points);
  double sum = 0.0;
  std::vector<double> y;
  y.reserve(z.size());
  for (double v : z) {
    y.push_back(forward_sample(flow, v).y);
    sum += y.back();
  }
  const double mean = sum / static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(y.size()))};
}

std::vector<std::size_t> density_modes(std::span<const double> density, double fraction) {
  std::vector<std::size_t> modes;
  if (density.size() < 3) return modes;
  const double peak = *std::max_element(density.begin(), density.end());
  if (!(peak > 0.0)) return modes;
  const double floor = fraction * peak;
  std::size_t i = 1;
  while (i + 1 < density.size()) {
    if (density[i] > density[i - 1]) {
      // walk across a plateau
      std::size_t j = i;
      while (j + 1 < density.size() && density[j + 1] == density[i]) ++j;
      if (j + 1 < density.size() && density[j + 1] < density[i] && density[i] > floor) {
        modes.push_back((i + j) / 2);
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return modes;
}

}  // namespace nfdrl
