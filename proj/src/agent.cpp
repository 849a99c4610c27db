#include "nfdrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nfdrl/errors.hpp"
#include "nfdrl/evaluation.hpp"
#include "nfdrl/io.hpp"
#include "nfdrl/loss_pipeline.hpp"

namespace nfdrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("replay buffer capacity must be >= 1");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 20));
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[cursor_] = t;
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (data_.size() < n || data_.empty()) {
    throw DomainError("replay buffer: not enough transitions to sample " + std::to_string(n));
  }
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data_[pick(rng)]);
  return out;
}

double epsilon_schedule(std::size_t step, const TrainConfig& config) {
  const double duration =
      config.exploration_fraction * static_cast<double>(config.total_timesteps);
  if (duration <= 0.0) return config.end_e;
  const double frac = std::min(1.0, static_cast<double>(step) / duration);
  return config.start_e + frac * (config.end_e - config.start_e);
}

std::size_t select_action(const NetworkParams& net, std::size_t state, double epsilon,
                          std::span<const double> z_batch, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("select_action: epsilon outside [0, 1]");
  const std::size_t n_actions = net.shape().n_actions;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  // Always draw the coin so the random stream does not depend on epsilon.
  const double u = coin(rng);
  if (u < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, n_actions - 1);
    return pick(rng);
  }
  if (n_actions == 1) return 0;
  const auto flows = forward_params(net, one_hot(state, net.shape().input_dim));
  return greedy_action(flows, z_batch);
}

std::vector<double> normal_quantile_grid(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double target = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    double lo = -40.0;
    double hi = 40.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (normal_cdf(mid) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out[k] = 0.5 * (lo + hi);
  }
  return out;
}

std::vector<std::size_t> greedy_policy(const NetworkParams& net,
                                       std::span<const double> z_batch) {
  const std::size_t n_states = net.shape().input_dim;
  std::vector<std::size_t> policy(n_states, 0);
  for (std::size_t s = 0; s < n_states; ++s) {
    policy[s] = greedy_action(forward_params(net, one_hot(s, n_states)), z_batch);
  }
  return policy;
}

EvalResult evaluate(const NetworkParams& net, const TabularMdp& mdp, std::size_t rollouts,
                    Rng& rng) {
  const std::vector<double> z = normal_quantile_grid(200);
  const std::vector<std::size_t> policy = greedy_policy(net, z);
  EvalResult out;
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    const auto flows = forward_params(net, one_hot(s, mdp.n_states));
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto truth = true_return_distribution(mdp, s, a, rollouts, rng, policy);
      out.cramer_mean += cramer_to_samples(flows[a], truth, 2.0, 1024);
      ++pairs;
    }
  }
  if (pairs > 0) out.cramer_mean /= static_cast<double>(pairs);
  const auto greedy =
      true_return_distribution(mdp, mdp.start_state, policy[mdp.start_state], rollouts, rng, policy);
  double total = 0.0;
  for (double g : greedy) total += g;
  out.greedy_return_mean = total / static_cast<double>(greedy.size());
  return out;
}

TrainResult train(const TabularMdp& mdp, const TrainConfig& config,
                  const TrainObserver& observer) {
  config.validate();
  mdp.validate();
  Rng rng(config.seed);
  std::vector<Rng> env_rngs;
  for (std::size_t e = 0; e < config.num_envs; ++e) env_rngs.emplace_back(rng());
  Rng eval_rng(rng());

  const NetworkShape shape = config.network_shape(mdp.n_states, mdp.n_actions);
  TrainResult result{init_network(shape, rng), AdamOptimizer(shape, config.learning_rate), {}, {}, 0};
  NetworkParams& net = result.net;
  NetworkParams target = sync_target(net);
  const LossSettings settings = config.loss_settings(mdp.gamma);
  const std::vector<double> acting_z = normal_quantile_grid(config.n_samples);

  ReplayBuffer buffer(config.buffer_size);
  std::vector<std::size_t> states(config.num_envs, mdp.start_state);
  std::normal_distribution<double> base(0.0, 1.0);
  std::vector<double> z_batch(config.n_samples);
  std::size_t train_steps = 0;
  double interval_loss = 0.0;
  std::size_t interval_count = 0;

  for (std::size_t step = 0; step < config.total_timesteps; ++step) {
    const double epsilon = epsilon_schedule(step, config);
    for (std::size_t e = 0; e < config.num_envs; ++e) {
      const std::size_t action = select_action(net, states[e], epsilon, acting_z, rng);
      const Transition t = nfdrl::step(mdp, states[e], action, env_rngs[e]);
      buffer.push(t);
      states[e] = t.done ? mdp.start_state : t.next_state;
    }

    if (step >= config.learning_starts && step % config.train_frequency == 0 &&
        buffer.size() >= config.batch_size) {
      const std::vector<Transition> batch = buffer.sample(config.batch_size, rng);
      for (double& z : z_batch) z = base(rng);
      LossAndGrad lg = loss_and_grad(net, target, batch, z_batch, settings);
      result.optimizer.step(net, std::move(lg.grads), config.max_norm);
      result.losses.push_back(lg.loss);
      interval_loss += lg.loss;
      ++interval_count;
      if (++train_steps % config.target_network_frequency == 0) target = sync_target(net);
    }

    if ((step + 1) % config.eval_interval == 0 || step + 1 == config.total_timesteps) {
      const EvalResult ev = evaluate(net, mdp, config.eval_rollouts, eval_rng);
      MetricsRow row{step + 1,
                     interval_count > 0 ? interval_loss / static_cast<double>(interval_count) : 0.0,
                     ev.cramer_mean, ev.greedy_return_mean, epsilon};
      result.metrics.push_back(row);
      interval_loss = 0.0;
      interval_count = 0;
      if (observer) observer(row);
      log(LogLevel::debug, "step " + std::to_string(row.step) + " loss " +
                               format_double(row.loss) + " cramer " +
                               format_double(row.eval_cramer_mean));
    }
  }
  result.timesteps = config.total_timesteps;
  return result;
}

DistributionTable export_distribution(const NetworkParams& net, std::size_t state,
                                      std::size_t action, std::size_t points) {
  if (points < 2) throw DomainError("export_distribution: need at least 2 points");
  const auto flows = forward_params(net, one_hot(state, net.shape().input_dim));
  if (action >= flows.size()) throw DomainError("export_distribution: action out of range");
  const MixtureFlowParams& flow = flows[action];
  DistributionTable table{state, action, {}, {}};
  table.support.resize(points);
  table.density.resize(points);
  const double g = flow.g_max();
  for (std::size_t i = 0; i < points; ++i) {
    const double y =
        i + 1 == points ? g : -g + 2.0 * g * static_cast<double>(i) / static_cast<double>(points - 1);
    table.support[i] = y;
    table.density[i] = density_at(flow, y);
  }
  return table;
}

std::vector<DistributionTable> export_all(const NetworkParams& net, std::size_t points) {
  std::vector<DistributionTable> out;
  for (std::size_t s = 0; s < net.shape().input_dim; ++s) {
    for (std::size_t a = 0; a < net.shape().n_actions; ++a) {
      out.push_back(export_distribution(net, s, a, points));
    }
  }
  return out;
}

}  // namespace nfdrl
