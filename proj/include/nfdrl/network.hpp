#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nfdrl/flow.hpp"

namespace nfdrl {

struct NetworkShape {
  std::size_t input_dim = 1;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t n_actions = 1;
  std::size_t n_components = 4;

  /// Head outputs per action: n weight logits, n means, n scale
  /// pre-activations and one g_max pre-activation.
  std::size_t head_stride() const { return 3 * n_components + 1; }
  std::size_t head_outputs() const { return n_actions * head_stride(); }

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

inline constexpr std::size_t kTensorCount = 6;
inline constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
    "fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias", "head.weight", "head.bias"};

/// Flat row-major storage for the six parameter tensors of the MLP
/// input -> hidden1 -> hidden2 -> heads. GradientSet reuses the layout.
class TensorBundle {
 public:
  TensorBundle() = default;
  explicit TensorBundle(const NetworkShape& shape);

  const NetworkShape& shape() const { return shape_; }
  std::vector<double>& tensor(std::size_t i) { return tensors_[i]; }
  const std::vector<double>& tensor(std::size_t i) const { return tensors_[i]; }
  std::array<std::size_t, 2> tensor_dims(std::size_t i) const;

  std::size_t parameter_count() const;
  double global_norm() const;
  bool all_finite() const;
  void fill(double value);
  void scale(double factor);

  /// Visits every scalar as (tensor index, flat index, value&).
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t t = 0; t < kTensorCount; ++t) {
      for (std::size_t k = 0; k < tensors_[t].size(); ++k) f(t, k, tensors_[t][k]);
    }
  }

  friend bool operator==(const TensorBundle&, const TensorBundle&) = default;

 private:
  NetworkShape shape_;
  std::array<std::vector<double>, kTensorCount> tensors_;
};

/// Parameters theta of the conditional network h_theta.
class NetworkParams : public TensorBundle {
 public:
  using TensorBundle::TensorBundle;
};

/// One gradient tensor per parameter tensor, same shapes.
class GradientSet : public TensorBundle {
 public:
  using TensorBundle::TensorBundle;
};

/// He-uniform hidden layers; heads start at zero weights with biases that
/// spread the component means evenly over [-1, 1].
NetworkParams init_network(const NetworkShape& shape, std::mt19937_64& rng);

/// Activations retained for the backward pass.
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden1;  // post-ReLU
  std::vector<double> hidden2;  // post-ReLU
  std::vector<double> head;     // raw head outputs
};

ForwardCache forward(const NetworkParams& net, std::span<const double> input);

std::vector<double> one_hot(std::size_t index, std::size_t size);

/// Maps one action's raw head slice to flow parameters:
/// softmax weights, softplus(.) + 1e-4 scales, identity means,
/// softplus(.) + 0.1 half-range.
MixtureFlowParams head_to_flow(std::span<const double> head_slice, std::size_t n_components);

std::vector<MixtureFlowParams> forward_params(const NetworkParams& net,
                                              std::span<const double> state_input);

/// Accumulates dL/d(theta) into `grads` given dL/d(head outputs).
void backward(const NetworkParams& net, const ForwardCache& cache,
              std::span<const double> head_grad, GradientSet& grads);

double softplus(double x);
double sigmoid(double x);

/// Adam with global-norm clipping applied before the moment update.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const NetworkShape& shape, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  /// Clips `grads` to `max_norm` (global L2), then updates `net` in place.
  /// Throws DomainError, leaving everything untouched, if any gradient entry
  /// is non-finite.
  void step(NetworkParams& net, GradientSet grads, double max_norm);

  std::uint64_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  const TensorBundle& first_moment() const { return m_; }
  const TensorBundle& second_moment() const { return v_; }

  nlohmann::json to_json() const;
  static AdamOptimizer from_json(const nlohmann::json& j, const NetworkShape& shape);

  friend bool operator==(const AdamOptimizer&, const AdamOptimizer&) = default;

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  TensorBundle m_;
  TensorBundle v_;
};

/// Scales grads so their global norm is at most max_norm; returns the
/// pre-clip norm.
double clip_global_norm(GradientSet& grads, double max_norm);

/// Deep copy used as the frozen bootstrap network.
NetworkParams sync_target(const NetworkParams& net);

nlohmann::json network_to_json(const NetworkParams& net);
NetworkParams network_from_json(const nlohmann::json& j);

}  // namespace nfdrl
