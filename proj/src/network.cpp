#include "nfdrl/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nfdrl/errors.hpp"

namespace nfdrl {

TensorBundle::TensorBundle(const NetworkShape& shape) : shape_(shape) {
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const auto d = tensor_dims(i);
    tensors_[i].assign(d[0] * d[1], 0.0);
  }
}

std::array<std::size_t, 2> TensorBundle::tensor_dims(std::size_t i) const {
  switch (i) {
    case 0: return {shape_.hidden1, shape_.input_dim};
    case 1: return {shape_.hidden1, 1};
    case 2: return {shape_.hidden2, shape_.hidden1};
    case 3: return {shape_.hidden2, 1};
    case 4: return {shape_.head_outputs(), shape_.hidden2};
    case 5: return {shape_.head_outputs(), 1};
    default: throw std::out_of_range("tensor index");
  }
}

std::size_t TensorBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

double TensorBundle::global_norm() const {
  double acc = 0.0;
  for (const auto& t : tensors_) {
    for (double v : t) acc += v * v;
  }
  return std::sqrt(acc);
}

bool TensorBundle::all_finite() const {
  for (const auto& t : tensors_) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void TensorBundle::fill(double value) {
  for (auto& t : tensors_) std::fill(t.begin(), t.end(), value);
}

void TensorBundle::scale(double factor) {
  for (auto& t : tensors_) {
    for (double& v : t) v *= factor;
  }
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large x.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

NetworkParams init_network(const NetworkShape& shape, std::mt19937_64& rng) {
  if (shape.input_dim == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 ||
      shape.n_actions == 0 || shape.n_components == 0) {
    throw DomainError("init_network: every layer dimension must be positive");
  }
  NetworkParams net(shape);
  auto he_uniform = [&](std::vector<double>& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w) v = dist(rng);
  };
  he_uniform(net.tensor(0), shape.input_dim);
  he_uniform(net.tensor(2), shape.hidden1);

  auto& head_bias = net.tensor(5);
  const std::size_t n = shape.n_components;
  for (std::size_t a = 0; a < shape.n_actions; ++a) {
    const std::size_t base = a * shape.head_stride();
    for (std::size_t i = 0; i < n; ++i) {
      head_bias[base + n + i] =
          n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    }
  }
  return net;
}

std::vector<double> one_hot(std::size_t index, std::size_t size) {
  if (index >= size) throw DomainError("one_hot: index out of range");
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

namespace {

void dense(const std::vector<double>& w, const std::vector<double>& b,
           std::span<const double> x, std::vector<double>& out, bool relu) {
  const std::size_t rows = b.size();
  const std::size_t cols = x.size();
  out.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = relu ? std::max(acc, 0.0) : acc;
  }
}

}  // namespace

ForwardCache forward(const NetworkParams& net, std::span<const double> input) {
  if (input.size() != net.shape().input_dim) {
    throw DomainError("forward: state vector has length " + std::to_string(input.size()) +
                      ", network expects " + std::to_string(net.shape().input_dim));
  }
  ForwardCache cache;
  cache.input.assign(input.begin(), input.end());
  dense(net.tensor(0), net.tensor(1), cache.input, cache.hidden1, true);
  dense(net.tensor(2), net.tensor(3), cache.hidden1, cache.hidden2, true);
  dense(net.tensor(4), net.tensor(5), cache.hidden2, cache.head, false);
  return cache;
}

MixtureFlowParams head_to_flow(std::span<const double> head_slice, std::size_t n) {
  std::vector<double> weights(n);
  std::vector<double> means(n);
  std::vector<double> scales(n);
  const double peak = *std::max_element(head_slice.begin(), head_slice.begin() + n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = std::exp(head_slice[i] - peak);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  for (std::size_t i = 0; i < n; ++i) {
    means[i] = head_slice[n + i];
    scales[i] = softplus(head_slice[2 * n + i]) + kScaleFloor;
  }
  const double g_max = softplus(head_slice[3 * n]) + 0.1;
  return MixtureFlowParams(std::move(weights), std::move(means), std::move(scales), g_max);
}

std::vector<MixtureFlowParams> forward_params(const NetworkParams& net,
                                              std::span<const double> state_input) {
  const ForwardCache cache = forward(net, state_input);
  const NetworkShape& s = net.shape();
  std::vector<MixtureFlowParams> out;
  out.reserve(s.n_actions);
  for (std::size_t a = 0; a < s.n_actions; ++a) {
    out.push_back(head_to_flow(
        std::span<const double>(cache.head).subspan(a * s.head_stride(), s.head_stride()),
        s.n_components));
  }
  return out;
}

void backward(const NetworkParams& net, const ForwardCache& cache,
              std::span<const double> head_grad, GradientSet& grads) {
  const NetworkShape& s = net.shape();
  const std::size_t n_out = s.head_outputs();

  // head layer
  std::vector<double> d_h2(s.hidden2, 0.0);
  {
    auto& gw = grads.tensor(4);
    auto& gb = grads.tensor(5);
    const auto& w = net.tensor(4);
    for (std::size_t r = 0; r < n_out; ++r) {
      const double g = head_grad[r];
      if (g == 0.0) continue;
      gb[r] += g;
      for (std::size_t c = 0; c < s.hidden2; ++c) {
        gw[r * s.hidden2 + c] += g * cache.hidden2[c];
        d_h2[c] += g * w[r * s.hidden2 + c];
      }
    }
  }
  std::vector<double> d_h1(s.hidden1, 0.0);
  {
    auto& gw = grads.tensor(2);
    auto& gb = grads.tensor(3);
    const auto& w = net.tensor(2);
    for (std::size_t r = 0; r < s.hidden2; ++r) {
      if (cache.hidden2[r] <= 0.0) continue;  // ReLU gate
      const double g = d_h2[r];
      gb[r] += g;
      for (std::size_t c = 0; c < s.hidden1; ++c) {
        gw[r * s.hidden1 + c] += g * cache.hidden1[c];
        d_h1[c] += g * w[r * s.hidden1 + c];
      }
    }
  }
  {
    auto& gw = grads.tensor(0);
    auto& gb = grads.tensor(1);
    for (std::size_t r = 0; r < s.hidden1; ++r) {
      if (cache.hidden1[r] <= 0.0) continue;
      const double g = d_h1[r];
      gb[r] += g;
      for (std::size_t c = 0; c < s.input_dim; ++c) {
        gw[r * s.input_dim + c] += g * cache.input[c];
      }
    }
  }
}

double clip_global_norm(GradientSet& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

AdamOptimizer::AdamOptimizer(const NetworkShape& shape, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(shape), v_(shape) {}

void AdamOptimizer::step(NetworkParams& net, GradientSet grads, double max_norm) {
  if (!(grads.shape() == net.shape()) || !(m_.shape() == net.shape())) {
    throw DomainError("adam step: gradient shape does not match the network");
  }
  if (!grads.all_finite()) throw DomainError("adam step: non-finite gradient rejected");
  clip_global_norm(grads, max_norm);

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    auto& p = net.tensor(i);
    const auto& g = grads.tensor(i);
    auto& m = m_.tensor(i);
    auto& v = v_.tensor(i);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

namespace {

nlohmann::json shape_to_json(const NetworkShape& s) {
  return {{"input_dim", s.input_dim},
          {"hidden1", s.hidden1},
          {"hidden2", s.hidden2},
          {"n_actions", s.n_actions},
          {"n_components", s.n_components}};
}

NetworkShape shape_from_json(const nlohmann::json& j) {
  NetworkShape s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden1 = j.at("hidden1").get<std::size_t>();
  s.hidden2 = j.at("hidden2").get<std::size_t>();
  s.n_actions = j.at("n_actions").get<std::size_t>();
  s.n_components = j.at("n_components").get<std::size_t>();
  return s;
}

nlohmann::json bundle_to_json(const TensorBundle& b) {
  nlohmann::json tensors = nlohmann::json::object();
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const auto d = b.tensor_dims(i);
    tensors[std::string(kTensorNames[i])] = {{"dims", {d[0], d[1]}}, {"data", b.tensor(i)}};
  }
  return tensors;
}

void bundle_from_json(const nlohmann::json& tensors, TensorBundle& b) {
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const std::string name(kTensorNames[i]);
    if (!tensors.contains(name)) throw ConfigError(name, "tensor missing from checkpoint");
    const auto& t = tensors.at(name);
    const auto dims = t.at("dims").get<std::array<std::size_t, 2>>();
    if (dims != b.tensor_dims(i)) throw ConfigError(name, "tensor dims do not match shape");
    auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != b.tensor(i).size()) throw ConfigError(name, "tensor size mismatch");
    b.tensor(i) = std::move(data);
  }
}

}  // namespace

nlohmann::json AdamOptimizer::to_json() const {
  return {{"learning_rate", lr_}, {"beta1", beta1_},          {"beta2", beta2_},
          {"epsilon", eps_},      {"step", t_},                {"first_moment", bundle_to_json(m_)},
          {"second_moment", bundle_to_json(v_)}};
}

AdamOptimizer AdamOptimizer::from_json(const nlohmann::json& j, const NetworkShape& shape) {
  AdamOptimizer opt(shape, j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
                    j.at("beta2").get<double>(), j.at("epsilon").get<double>());
  opt.t_ = j.at("step").get<std::uint64_t>();
  bundle_from_json(j.at("first_moment"), opt.m_);
  bundle_from_json(j.at("second_moment"), opt.v_);
  return opt;
}

NetworkParams sync_target(const NetworkParams& net) { return net; }

nlohmann::json network_to_json(const NetworkParams& net) {
  return {{"shape", shape_to_json(net.shape())}, {"tensors", bundle_to_json(net)}};
}

NetworkParams network_from_json(const nlohmann::json& j) {
  NetworkParams net(shape_from_json(j.at("shape")));
  bundle_from_json(j.at("tensors"), net);
  return net;
}

}  // namespace nfdrl
