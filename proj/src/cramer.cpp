#include "nfdrl/cramer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nfdrl/errors.hpp"

namespace nfdrl {
namespace {

void check_pair(const AlignedPair& pair) {
  const std::size_t n = pair.support.size();
  if (pair.predicted.size() != n || pair.target.size() != n) {
    throw DomainError("aligned pair: support, predicted and target differ in length");
  }
}

// Cumulative trapezoid integral, starting at zero.
std::vector<double> cumulative(std::span<const double> x, std::span<const double> f) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
  }
  return out;
}

// Trapezoid quadrature weights c_i so that integral g ~= sum_i c_i g_i.
std::vector<double> trapezoid_weights(std::span<const double> x) {
  std::vector<double> c(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = 0.5 * (x[i] - x[i - 1]);
    c[i - 1] += h;
    c[i] += h;
  }
  return c;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::exact ? "exact" : "surrogate";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "exact") return LossKind::exact;
  if (name == "surrogate") return LossKind::surrogate;
  throw ConfigError("loss_kind", "expected 'exact' or 'surrogate', got '" +
                                     std::string(name) + "'");
}

std::vector<double> support_weights(std::span<const double> support) {
  const std::size_t n = support.size();
  std::vector<double> w(n, 0.0);
  if (n == 0) return w;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!std::is_sorted(support.begin(), support.end())) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  }
  const double origin = support[order.front()];
  std::vector<double> centered(n);
  for (std::size_t k = 0; k < n; ++k) centered[k] = support[order[k]] - origin;

  const double total = std::accumulate(centered.begin(), centered.end(), 0.0);
  double below = 0.0;  // sum of centered values strictly before k
  for (std::size_t k = 0; k < n; ++k) {
    const double v = centered[k];
    const double above = total - below - v;
    const double left = static_cast<double>(k) * v - below;
    const double right = above - static_cast<double>(n - 1 - k) * v;
    w[order[k]] = left + right;
    below += v;
  }
  return w;
}

LossValue exact_cramer(const AlignedPair& pair, double p) {
  check_pair(pair);
  if (!(p > 0.0)) throw DomainError("exact_cramer: p must be > 0");
  const auto P = cumulative(pair.support, pair.predicted);
  const auto Q = cumulative(pair.support, pair.target);
  const auto c = trapezoid_weights(pair.support);
  double acc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) acc += c[i] * std::pow(std::abs(P[i] - Q[i]), p);
  return {std::pow(acc, 1.0 / p), LossKind::exact};
}

std::vector<double> exact_cramer_gradient(const AlignedPair& pair, double p) {
  check_pair(pair);
  const std::size_t n = pair.support.size();
  std::vector<double> grad(n, 0.0);
  const auto P = cumulative(pair.support, pair.predicted);
  const auto Q = cumulative(pair.support, pair.target);
  const auto c = trapezoid_weights(pair.support);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += c[i] * std::pow(std::abs(P[i] - Q[i]), p);
  if (!(acc > 0.0)) return grad;

  // dL/dD_i, with D_i = P_i - Q_i.
  const double outer = std::pow(acc, 1.0 / p - 1.0) / p;
  std::vector<double> dD(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = P[i] - Q[i];
    const double mag = std::abs(d);
    dD[i] = mag > 0.0 ? outer * c[i] * p * std::pow(mag, p - 1.0) * (d > 0.0 ? 1.0 : -1.0)
                      : 0.0;
  }
  // P_i = sum_{k<i} (f_k + f_{k+1}) h_k / 2, so f_j feeds every P_i with i > j
  // (through segment j) and i >= j (through segment j - 1).
  std::vector<double> tail(n + 1, 0.0);  // tail[i] = sum_{m >= i} dD[m]
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + dD[i];
  for (std::size_t j = 0; j < n; ++j) {
    double g = 0.0;
    if (j + 1 < n) g += 0.5 * (pair.support[j + 1] - pair.support[j]) * tail[j + 1];
    if (j > 0) g += 0.5 * (pair.support[j] - pair.support[j - 1]) * tail[j];
    grad[j] = g;
  }
  return grad;
}

double surrogate_energy(const AlignedPair& pair) {
  check_pair(pair);
  const auto w = support_weights(pair.support);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = pair.predicted[i] - pair.target[i];
    acc += d * d * w[i];
  }
  return acc;
}

LossValue surrogate_cramer(const AlignedPair& pair) {
  const double n = static_cast<double>(pair.support.size());
  if (n == 0.0) return {0.0, LossKind::surrogate};
  return {std::sqrt(surrogate_energy(pair)) / (n * n), LossKind::surrogate};
}

std::vector<double> surrogate_gradient(const AlignedPair& pair) {
  check_pair(pair);
  const std::size_t n = pair.support.size();
  std::vector<double> grad(n, 0.0);
  const auto w = support_weights(pair.support);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pair.predicted[i] - pair.target[i];
    s += d * d * w[i];
  }
  if (!(s > 0.0)) return grad;
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n) * std::sqrt(s));
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] = (pair.predicted[i] - pair.target[i]) * w[i] * scale;
  }
  return grad;
}

}  // namespace nfdrl
