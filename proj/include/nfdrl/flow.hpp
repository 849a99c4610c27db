#pragma once

#include <span>
#include <vector>

namespace nfdrl {

inline constexpr double kScaleFloor = 1e-4;
inline constexpr double kInvertTolerance = 1e-10;
inline constexpr int kInvertMaxIterations = 200;

// Standard normal helpers. The CDF goes through erfc so both tails keep
// full relative precision.
double normal_cdf(double x);
double normal_pdf(double x);
double log_normal_pdf(double x);

/// Parameters of one conditional flow: a Gaussian mixture whose CDF maps the
/// standard-normal base onto [0, 1], followed by an affine map onto
/// [-g_max, g_max].
///
/// Construction validates the invariants and throws DomainError on violation.
/// Scales below kScaleFloor are raised to it.
class MixtureFlowParams {
 public:
  MixtureFlowParams(std::vector<double> weights, std::vector<double> means,
                    std::vector<double> scales, double g_max);

  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> means() const { return means_; }
  std::span<const double> scales() const { return scales_; }
  double g_max() const { return g_max_; }

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> scales_;
  double g_max_;
};

struct ReturnSample {
  double z = 0.0;
  double y = 0.0;
  double log_density = 0.0;
};

double mixture_cdf(const MixtureFlowParams& params, double z);
double mixture_pdf(const MixtureFlowParams& params, double z);

/// log of mixture_pdf, evaluated with log-sum-exp so far tails stay finite.
double log_mixture_pdf(const MixtureFlowParams& params, double z);

/// Per-component posterior weights r_i = w_i N_i(z) / f(z); sums to one.
std::vector<double> mixture_responsibilities(const MixtureFlowParams& params,
                                             double z);

double rescale(double u, double g_max);

ReturnSample forward_sample(const MixtureFlowParams& params, double z);

/// Bisection inverse of forward_sample(...).y.
double invert_flow(const MixtureFlowParams& params, double y);

/// Density of the flow at return value y; zero outside (-g_max, g_max).
double density_at(const MixtureFlowParams& params, double y);

}  // namespace nfdrl
