#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfdrl/bellman_target.hpp"
#include "nfdrl/cramer.hpp"
#include "nfdrl/network.hpp"
#include "nfdrl/transition.hpp"

namespace nfdrl {

enum class BatchReduction {
  mean_loss,          // mean over transitions of the per-transition loss
  mean_squared_loss,  // mean over transitions of the squared per-transition loss
};

/// Which quantity is held fixed when differentiating a predicted density.
enum class DensityGradient {
  base_sample,   // p(f(z_k)) at fixed base sample z_k
  fixed_return,  // p(y_k) at the frozen return y_k, including dz/dtheta
};

struct LossSettings {
  LossKind kind = LossKind::surrogate;
  double cramer_p = 2.0;
  BatchReduction reduction = BatchReduction::mean_squared_loss;
  DensityGradient density_gradient = DensityGradient::fixed_return;
  AlignmentConfig alignment;
};

/// Everything about one transition's loss term that is held constant with
/// respect to the online parameters: sample positions (through the grid
/// projection), the grid, and the target densities.
struct FrozenTerm {
  std::size_t state = 0;
  std::size_t action = 0;
  GridProjection projection;
  std::vector<double> sample_returns;  // y_k = f(z_k) under the online net at freeze time
  std::vector<double> support;
  std::vector<double> target;
};

struct LossContext {
  LossSettings settings;
  std::vector<double> z_batch;
  std::vector<FrozenTerm> terms;
};

/// Builds the stop-gradient half of the loss: predicted sample positions from
/// `net`, greedy bootstrap targets from `target_net`, KDE and grid.
LossContext freeze_loss_context(const NetworkParams& net, const NetworkParams& target_net,
                                std::span<const Transition> batch,
                                std::span<const double> z_batch, const LossSettings& settings);

/// Loss of `net` against a frozen context. Only the predicted densities at
/// the frozen sample points depend on `net`.
double evaluate_loss(const NetworkParams& net, const LossContext& ctx);

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

LossAndGrad loss_and_grad(const NetworkParams& net, const LossContext& ctx);

LossAndGrad loss_and_grad(const NetworkParams& net, const NetworkParams& target_net,
                          std::span<const Transition> batch, std::span<const double> z_batch,
                          const LossSettings& settings);

/// Analytic densities of `flow` at its own samples y_k = f(z_k).
std::vector<double> sample_densities(const MixtureFlowParams& flow,
                                     std::span<const double> z_batch);

/// d log p / d(head slice) for one sample, written into `out` (length
/// 3n + 1, same layout as the head). The flow is evaluated at base point z;
/// with DensityGradient::fixed_return the return y = f(z) is held fixed.
void log_density_head_gradient(const MixtureFlowParams& flow, std::span<const double> head_slice,
                               double z, DensityGradient mode, std::span<double> out);

}  // namespace nfdrl
