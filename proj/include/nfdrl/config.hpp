#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nfdrl/cramer.hpp"
#include "nfdrl/loss_pipeline.hpp"
#include "nfdrl/network.hpp"

namespace nfdrl {

/// Training hyperparameters. Keys in JSON match the field names.
/// Defaults are the desk-scale toy configuration.
struct TrainConfig {
  std::size_t total_timesteps = 30000;
  double learning_rate = 1e-3;
  double max_norm = 3.0;
  std::size_t num_envs = 4;
  std::size_t buffer_size = 10000;
  double gamma = 0.99;
  std::size_t target_network_frequency = 1;
  std::size_t batch_size = 32;
  double start_e = 1.0;
  double end_e = 0.01;
  double exploration_fraction = 0.2;
  std::size_t learning_starts = 500;
  std::size_t train_frequency = 4;
  std::size_t hidden_size_1 = 64;
  std::size_t hidden_size_2 = 64;
  std::size_t n_flows = 1;
  std::size_t n_components = 4;
  std::size_t n_samples = 100;
  double final_reward_variance = 0.1;  // used as the stddev of the terminal Gaussian
  double bandwidth = 0.05;

  LossKind loss_kind = LossKind::surrogate;
  BatchReduction batch_reduction = BatchReduction::mean_squared_loss;
  DensityGradient density_gradient = DensityGradient::fixed_return;
  double cramer_p = 2.0;
  std::size_t grid_size = 256;
  std::size_t seed = 0;
  std::size_t eval_interval = 1000;
  std::size_t eval_rollouts = 1000;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  LossSettings loss_settings(double mdp_gamma) const;
  NetworkShape network_shape(std::size_t n_states, std::size_t n_actions) const;
};

nlohmann::json config_to_json(const TrainConfig& config);

/// Applies every key of `j` onto `config`. Unknown keys and wrongly typed
/// values raise ConfigError naming the key.
void apply_config_json(TrainConfig& config, const nlohmann::json& j);

/// Applies one textual override such as ("learning_rate", "5e-5").
void apply_config_override(TrainConfig& config, std::string_view key, std::string_view value);

std::string_view to_string(BatchReduction r);
BatchReduction batch_reduction_from_string(std::string_view name);

std::string_view to_string(DensityGradient g);
DensityGradient density_gradient_from_string(std::string_view name);

/// Table-of-hyperparameters values used for the large-scale experiments.
TrainConfig reference_hyperparameters();

}  // namespace nfdrl
