#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfdrl/flow.hpp"

namespace nfdrl {

/// CDF of the flow's return law: Phi(invert_flow(y)), 0 / 1 outside the support.
double flow_cdf(const MixtureFlowParams& flow, double y);

/// Cramér-p distance between the flow's return law and the empirical law of
/// `samples`, integrated by trapezoid on `points` nodes covering both supports.
double cramer_to_samples(const MixtureFlowParams& flow, std::span<const double> samples,
                         double p = 2.0, std::size_t points = 4096);

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean and standard deviation of the flow's returns from `points`
/// stratified base quantiles.
Moments flow_moments(const MixtureFlowParams& flow, std::size_t points = 4096);

/// Interior local maxima of a sampled density that exceed `fraction` of the
/// global peak. Plateaus count once.
std::vector<std::size_t> density_modes(std::span<const double> density, double fraction = 0.1);

}  // namespace nfdrl
