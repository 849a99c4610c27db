#include "nfdrl/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nfdrl/errors.hpp"

namespace nfdrl {
namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // 0.5 * log(2*pi)

void require_finite(double z, const char* what) {
  if (!std::isfinite(z)) {
    throw DomainError(std::string(what) + ": non-finite argument");
  }
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrtTwoPi); }

double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

MixtureFlowParams::MixtureFlowParams(std::vector<double> weights,
                                     std::vector<double> means,
                                     std::vector<double> scales, double g_max)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      scales_(std::move(scales)),
      g_max_(g_max) {
  if (weights_.empty()) throw DomainError("mixture needs at least one component");
  if (means_.size() != weights_.size() || scales_.size() != weights_.size()) {
    throw DomainError("mixture weights, means and scales differ in length");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weight must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("mixture weights must sum to 1, got " + std::to_string(total));
  }
  for (double m : means_) {
    if (!std::isfinite(m)) throw DomainError("mixture mean must be finite");
  }
  for (double& s : scales_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("mixture scale must be > 0");
    s = std::max(s, kScaleFloor);
  }
  if (!(g_max_ > 0.0) || !std::isfinite(g_max_)) throw DomainError("g_max must be > 0");
}

double mixture_cdf(const MixtureFlowParams& params, double z) {
  require_finite(z, "mixture_cdf");
  const auto w = params.weights();
  const auto mu = params.means();
  const auto sigma = params.scales();
  double u = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    u += w[i] * normal_cdf((z - mu[i]) / sigma[i]);
  }
  return std::clamp(u, 0.0, 1.0);
}

double mixture_pdf(const MixtureFlowParams& params, double z) {
  require_finite(z, "mixture_pdf");
  const auto w = params.weights();
  const auto mu = params.means();
  const auto sigma = params.scales();
  double f = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    f += w[i] * normal_pdf((z - mu[i]) / sigma[i]) / sigma[i];
  }
  return f;
}

namespace {

// log(w_i) + log N(z; mu_i, sigma_i) per component, plus their log-sum-exp.
double component_log_terms(const MixtureFlowParams& params, double z,
                           std::vector<double>& terms) {
  const auto w = params.weights();
  const auto mu = params.means();
  const auto sigma = params.scales();
  terms.resize(params.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double t = (z - mu[i]) / sigma[i];
    terms[i] = w[i] > 0.0 ? std::log(w[i]) + log_normal_pdf(t) - std::log(sigma[i])
                          : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, terms[i]);
  }
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

}  // namespace

double log_mixture_pdf(const MixtureFlowParams& params, double z) {
  require_finite(z, "log_mixture_pdf");
  std::vector<double> terms;
  return component_log_terms(params, z, terms);
}

std::vector<double> mixture_responsibilities(const MixtureFlowParams& params,
                                             double z) {
  require_finite(z, "mixture_responsibilities");
  std::vector<double> terms;
  const double lse = component_log_terms(params, z, terms);
  for (double& v : terms) v = std::exp(v - lse);
  return terms;
}

double rescale(double u, double g_max) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("rescale: u must lie in [0, 1], got " + std::to_string(u));
  }
  return 2.0 * u * g_max - g_max;
}

ReturnSample forward_sample(const MixtureFlowParams& params, double z) {
  const double g = params.g_max();
  double y = rescale(mixture_cdf(params, z), g);
  // Saturated CDF values land on the boundary; keep y inside the open support.
  if (y >= g) y = std::nextafter(g, 0.0);
  if (y <= -g) y = std::nextafter(-g, 0.0);
  const double log_density =
      log_normal_pdf(z) - log_mixture_pdf(params, z) - std::log(2.0 * g);
  return {z, y, log_density};
}

double invert_flow(const MixtureFlowParams& params, double y) {
  const double g = params.g_max();
  if (!(y > -g && y < g)) {
    throw OutOfSupportError("invert_flow: y=" + std::to_string(y) +
                            " outside (-g_max, g_max)");
  }
  auto mapped = [&](double z) { return rescale(mixture_cdf(params, z), g); };

  double lo = -10.0;
  double hi = 10.0;
  while (mapped(lo) > y) {
    lo *= 2.0;
    if (lo < -1e6) throw ConvergenceError("invert_flow: lower bracket diverged");
  }
  while (mapped(hi) < y) {
    hi *= 2.0;
    if (hi > 1e6) throw ConvergenceError("invert_flow: upper bracket diverged");
  }

  double best = 0.5 * (lo + hi);
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kInvertMaxIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double value = mapped(mid);
    const double err = std::abs(value - y);
    if (err < best_err) {
      best = mid;
      best_err = err;
    }
    if (err <= kInvertTolerance && (hi - lo) <= 1e-12 * std::max(1.0, std::abs(mid))) {
      break;
    }
    if (mid == lo || mid == hi) break;
    if (value < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

double density_at(const MixtureFlowParams& params, double y) {
  const double g = params.g_max();
  if (!(y > -g && y < g)) return 0.0;
  const double z = invert_flow(params, y);
  return std::exp(forward_sample(params, z).log_density);
}

}  // namespace nfdrl
