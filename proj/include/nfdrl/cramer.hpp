#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "nfdrl/bellman_target.hpp"

namespace nfdrl {

enum class LossKind { exact, surrogate };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::surrogate;
};

/// w_i = sum_j |y_i - y_j|, computed with prefix sums in O(N log N) (O(N) for
/// an already sorted support). Differences are taken relative to the first
/// support point, so the weights depend only on support differences.
std::vector<double> support_weights(std::span<const double> support);

/// Cramér distance (integral |P - Q|^p)^(1/p) between the CDFs obtained by
/// cumulative trapezoid integration of both densities over the support.
/// Neither CDF is forced to end at 1; each ends at its own mass.
LossValue exact_cramer(const AlignedPair& pair, double p = 2.0);

/// d/d(predicted_i) of exact_cramer.
std::vector<double> exact_cramer_gradient(const AlignedPair& pair, double p = 2.0);

/// PDF-only surrogate: (1/N^2) * sqrt(sum_i (p_i - q_i)^2 * w_i).
LossValue surrogate_cramer(const AlignedPair& pair);

/// d/d(predicted_i) of surrogate_cramer. The zero vector at the minimum.
std::vector<double> surrogate_gradient(const AlignedPair& pair);

/// sum_i (p_i - q_i)^2 * w_i, i.e. (N^2 * surrogate)^2. Unlike the surrogate
/// itself this is quadratic in the densities.
double surrogate_energy(const AlignedPair& pair);

}  // namespace nfdrl
