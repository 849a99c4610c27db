#include "nfdrl/loss_pipeline.hpp"

#include <cmath>

#include "nfdrl/errors.hpp"

namespace nfdrl {
namespace {

struct TermLoss {
  double value = 0.0;
  std::vector<double> grid_grad;  // dL/d(predicted grid values)
};

TermLoss term_loss(const AlignedPair& pair, const LossSettings& settings, bool with_grad) {
  TermLoss out;
  if (settings.kind == LossKind::surrogate) {
    out.value = surrogate_cramer(pair).value;
    if (with_grad) out.grid_grad = surrogate_gradient(pair);
  } else {
    out.value = exact_cramer(pair, settings.cramer_p).value;
    if (with_grad) out.grid_grad = exact_cramer_gradient(pair, settings.cramer_p);
  }
  if (settings.reduction == BatchReduction::mean_squared_loss) {
    if (with_grad) {
      for (double& g : out.grid_grad) g *= 2.0 * out.value;
    }
    out.value *= out.value;
  }
  return out;
}

std::span<const double> head_slice(const ForwardCache& cache, const NetworkShape& shape,
                                   std::size_t action) {
  return std::span<const double>(cache.head).subspan(action * shape.head_stride(),
                                                     shape.head_stride());
}

}  // namespace

void log_density_head_gradient(const MixtureFlowParams& flow, std::span<const double> head_slice,
                               double z, DensityGradient mode, std::span<double> out) {
  const std::size_t n = flow.size();
  const auto w = flow.weights();
  const auto mu = flow.means();
  const auto sigma = flow.scales();
  const double g = flow.g_max();
  const std::vector<double> r = mixture_responsibilities(flow, z);

  // Partial derivatives at fixed z of -log f(z) - log(2 g_max).
  std::vector<double> d_logit(n), d_mean(n), d_scale(n);
  double d_gmax = -1.0 / g;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (z - mu[i]) / sigma[i];
    d_logit[i] = -(r[i] - w[i]);
    d_mean[i] = -r[i] * t / sigma[i];
    d_scale[i] = -r[i] * (t * t - 1.0) / sigma[i];
  }

  if (mode == DensityGradient::fixed_return) {
    // z moves with theta so that 2 g F(z) - g stays at y:
    // dz/dtheta = (du*/dtheta - dF/dtheta) / f, u* = (y + g) / (2 g).
    const double f = mixture_pdf(flow, z);
    const double cdf = mixture_cdf(flow, z);
    double slope = -z;  // d/dz [log phi(z) - log f(z)]
    for (std::size_t i = 0; i < n; ++i) slope += r[i] * (z - mu[i]) / (sigma[i] * sigma[i]);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = (z - mu[i]) / sigma[i];
      d_logit[i] += slope * (-w[i] * (normal_cdf(t) - cdf) / f);
      d_mean[i] += slope * r[i];
      d_scale[i] += slope * r[i] * t;
    }
    d_gmax += slope * (-(2.0 * cdf - 1.0) / (2.0 * g * f));
  }

  for (std::size_t i = 0; i < n; ++i) {
    out[i] = d_logit[i];
    out[n + i] = d_mean[i];
    out[2 * n + i] = d_scale[i] * sigmoid(head_slice[2 * n + i]);
  }
  out[3 * n] = d_gmax * sigmoid(head_slice[3 * n]);
}

std::vector<double> sample_densities(const MixtureFlowParams& flow,
                                     std::span<const double> z_batch) {
  std::vector<double> out;
  out.reserve(z_batch.size());
  for (double z : z_batch) out.push_back(std::exp(forward_sample(flow, z).log_density));
  return out;
}

LossContext freeze_loss_context(const NetworkParams& net, const NetworkParams& target_net,
                                std::span<const Transition> batch,
                                std::span<const double> z_batch, const LossSettings& settings) {
  if (batch.empty()) throw DomainError("loss: empty batch");
  if (z_batch.empty()) throw DomainError("loss: empty z batch");
  LossContext ctx;
  ctx.settings = settings;
  ctx.z_batch.assign(z_batch.begin(), z_batch.end());
  ctx.terms.reserve(batch.size());
  const std::size_t dim = net.shape().input_dim;
  for (const Transition& t : batch) {
    const auto online = forward_params(net, one_hot(t.state, dim));
    std::vector<MixtureFlowParams> next;
    if (!t.done) next = forward_params(target_net, one_hot(t.next_state, dim));
    Alignment a = build_target_detailed(online.at(t.action), next, t, z_batch,
                                        settings.alignment);
    FrozenTerm term;
    if (settings.density_gradient == DensityGradient::fixed_return) {
      for (double z : z_batch) term.sample_returns.push_back(forward_sample(online.at(t.action), z).y);
    }
    term.state = t.state;
    term.action = t.action;
    term.projection = std::move(a.projection);
    term.support = std::move(a.pair.support);
    term.target = std::move(a.pair.target);
    ctx.terms.push_back(std::move(term));
  }
  return ctx;
}

double evaluate_loss(const NetworkParams& net, const LossContext& ctx) {
  double total = 0.0;
  for (const FrozenTerm& term : ctx.terms) {
    const ForwardCache cache = forward(net, one_hot(term.state, net.shape().input_dim));
    const MixtureFlowParams flow =
        head_to_flow(head_slice(cache, net.shape(), term.action), net.shape().n_components);
    std::vector<double> dens;
    if (ctx.settings.density_gradient == DensityGradient::fixed_return) {
      for (double y : term.sample_returns) dens.push_back(density_at(flow, y));
    } else {
      dens = sample_densities(flow, ctx.z_batch);
    }
    AlignedPair pair{term.support, term.projection.apply(dens), term.target};
    total += term_loss(pair, ctx.settings, false).value;
  }
  return total / static_cast<double>(ctx.terms.size());
}

LossAndGrad loss_and_grad(const NetworkParams& net, const LossContext& ctx) {
  const NetworkShape& shape = net.shape();
  const std::size_t n = shape.n_components;
  const std::size_t n_terms = ctx.terms.size();
  LossAndGrad out{0.0, GradientSet(shape)};
  std::vector<double> head_grad(shape.head_outputs());
  std::vector<double> sample_grad(shape.head_stride());

  for (const FrozenTerm& term : ctx.terms) {
    const ForwardCache cache = forward(net, one_hot(term.state, shape.input_dim));
    const auto slice = head_slice(cache, shape, term.action);
    const MixtureFlowParams flow = head_to_flow(slice, n);
    std::vector<double> base_points = ctx.z_batch;
    if (ctx.settings.density_gradient == DensityGradient::fixed_return) {
      // The frozen returns match f(z_k) only for the net the context was
      // built from; otherwise locate them again.
      for (std::size_t k = 0; k < base_points.size(); ++k) {
        if (forward_sample(flow, base_points[k]).y != term.sample_returns[k]) {
          base_points[k] = invert_flow(flow, term.sample_returns[k]);
        }
      }
    }
    const std::vector<double> dens = sample_densities(flow, base_points);
    AlignedPair pair{term.support, term.projection.apply(dens), term.target};
    const TermLoss tl = term_loss(pair, ctx.settings, true);
    out.loss += tl.value;

    // dL/d(density at sample k), then through log p_k.
    const std::vector<double> d_dens = term.projection.adjoint(tl.grid_grad);
    std::fill(head_grad.begin(), head_grad.end(), 0.0);
    const std::size_t base = term.action * shape.head_stride();
    std::span<double> action_grad(head_grad.data() + base, shape.head_stride());
    for (std::size_t k = 0; k < base_points.size(); ++k) {
      const double e = d_dens[k] * dens[k];  // dL/d(log p_k)
      if (e == 0.0) continue;
      log_density_head_gradient(flow, slice, base_points[k], ctx.settings.density_gradient,
                                sample_grad);
      for (std::size_t j = 0; j < sample_grad.size(); ++j) action_grad[j] += e * sample_grad[j];
    }
    backward(net, cache, head_grad, out.grads);
  }

  const double inv = 1.0 / static_cast<double>(n_terms);
  out.loss *= inv;
  out.grads.scale(inv);
  return out;
}

LossAndGrad loss_and_grad(const NetworkParams& net, const NetworkParams& target_net,
                          std::span<const Transition> batch, std::span<const double> z_batch,
                          const LossSettings& settings) {
  return loss_and_grad(net, freeze_loss_context(net, target_net, batch, z_batch, settings));
}

}  // namespace nfdrl
