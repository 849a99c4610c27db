#include "nfdrl/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <variant>

#include "nfdrl/errors.hpp"

namespace nfdrl {
namespace {

using Member = std::variant<std::size_t TrainConfig::*, double TrainConfig::*,
                            LossKind TrainConfig::*, BatchReduction TrainConfig::*,
                            DensityGradient TrainConfig::*>;

template <typename T>
constexpr bool is_enum_field = std::is_enum_v<T>;

template <typename T>
T enum_from_string(std::string_view text) {
  if constexpr (std::is_same_v<T, LossKind>) {
    return loss_kind_from_string(text);
  } else if constexpr (std::is_same_v<T, BatchReduction>) {
    return batch_reduction_from_string(text);
  } else {
    return density_gradient_from_string(text);
  }
}

struct Field {
  std::string_view name;
  Member member;
};

const std::array<Field, 28>& fields() {
  static const std::array<Field, 28> table = {{
      {"total_timesteps", &TrainConfig::total_timesteps},
      {"learning_rate", &TrainConfig::learning_rate},
      {"max_norm", &TrainConfig::max_norm},
      {"num_envs", &TrainConfig::num_envs},
      {"buffer_size", &TrainConfig::buffer_size},
      {"gamma", &TrainConfig::gamma},
      {"target_network_frequency", &TrainConfig::target_network_frequency},
      {"batch_size", &TrainConfig::batch_size},
      {"start_e", &TrainConfig::start_e},
      {"end_e", &TrainConfig::end_e},
      {"exploration_fraction", &TrainConfig::exploration_fraction},
      {"learning_starts", &TrainConfig::learning_starts},
      {"train_frequency", &TrainConfig::train_frequency},
      {"hidden_size_1", &TrainConfig::hidden_size_1},
      {"hidden_size_2", &TrainConfig::hidden_size_2},
      {"n_flows", &TrainConfig::n_flows},
      {"n_components", &TrainConfig::n_components},
      {"n_samples", &TrainConfig::n_samples},
      {"final_reward_variance", &TrainConfig::final_reward_variance},
      {"bandwidth", &TrainConfig::bandwidth},
      {"loss_kind", &TrainConfig::loss_kind},
      {"batch_reduction", &TrainConfig::batch_reduction},
      {"density_gradient", &TrainConfig::density_gradient},
      {"cramer_p", &TrainConfig::cramer_p},
      {"grid_size", &TrainConfig::grid_size},
      {"seed", &TrainConfig::seed},
      {"eval_interval", &TrainConfig::eval_interval},
      {"eval_rollouts", &TrainConfig::eval_rollouts},
  }};
  return table;
}

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const std::from_chars_result res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError(std::string(key), "cannot parse '" + std::string(text) + "'");
  }
  return value;
}

void set_from_json(TrainConfig& c, const Field& f, const nlohmann::json& v) {
  const std::string key(f.name);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(c.*member)>;
        if constexpr (is_enum_field<T>) {
          if (!v.is_string()) throw ConfigError(key, "expected a string");
          c.*member = enum_from_string<T>(v.get<std::string>());
        } else if constexpr (std::is_floating_point_v<T>) {
          if (!v.is_number()) throw ConfigError(key, "expected a number");
          c.*member = v.get<double>();
        } else {
          if (!v.is_number_unsigned()) {
            throw ConfigError(key, "expected a non-negative integer");
          }
          c.*member = v.get<T>();
        }
      },
      f.member);
}

}  // namespace

std::string_view to_string(BatchReduction r) {
  return r == BatchReduction::mean_loss ? "mean_loss" : "mean_squared_loss";
}

BatchReduction batch_reduction_from_string(std::string_view name) {
  if (name == "mean_loss") return BatchReduction::mean_loss;
  if (name == "mean_squared_loss") return BatchReduction::mean_squared_loss;
  throw ConfigError("batch_reduction", "expected 'mean_loss' or 'mean_squared_loss', got '" +
                                           std::string(name) + "'");
}

std::string_view to_string(DensityGradient g) {
  return g == DensityGradient::base_sample ? "base_sample" : "fixed_return";
}

DensityGradient density_gradient_from_string(std::string_view name) {
  if (name == "base_sample") return DensityGradient::base_sample;
  if (name == "fixed_return") return DensityGradient::fixed_return;
  throw ConfigError("density_gradient", "expected 'base_sample' or 'fixed_return', got '" +
                                            std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(total_timesteps >= 1, "total_timesteps", "must be >= 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate", "must be > 0");
  require(max_norm > 0.0, "max_norm", "must be > 0");
  require(num_envs >= 1, "num_envs", "must be >= 1");
  require(buffer_size >= 1, "buffer_size", "must be >= 1");
  require(gamma > 0.0 && gamma <= 1.0, "gamma", "must lie in (0, 1]");
  require(target_network_frequency >= 1, "target_network_frequency", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(batch_size <= buffer_size, "batch_size", "must not exceed buffer_size");
  require(start_e <= 1.0, "start_e", "must be <= 1");
  require(end_e > 0.0 && end_e <= start_e, "end_e", "must satisfy 0 < end_e <= start_e");
  require(exploration_fraction >= 0.0 && exploration_fraction <= 1.0, "exploration_fraction",
          "must lie in [0, 1]");
  require(train_frequency >= 1, "train_frequency", "must be >= 1");
  require(hidden_size_1 >= 1, "hidden_size_1", "must be >= 1");
  require(hidden_size_2 >= 1, "hidden_size_2", "must be >= 1");
  require(n_flows == 1, "n_flows", "only a single CDF flow layer is supported");
  require(n_components >= 1, "n_components", "must be >= 1");
  require(n_samples >= 2, "n_samples", "must be >= 2");
  require(final_reward_variance > 0.0, "final_reward_variance", "must be > 0");
  require(bandwidth > 0.0, "bandwidth", "must be > 0");
  require(cramer_p > 0.0, "cramer_p", "must be > 0");
  require(grid_size >= 2, "grid_size", "must be >= 2");
  require(eval_interval >= 1, "eval_interval", "must be >= 1");
  require(eval_rollouts >= 1, "eval_rollouts", "must be >= 1");
}

LossSettings TrainConfig::loss_settings(double mdp_gamma) const {
  LossSettings s;
  s.kind = loss_kind;
  s.cramer_p = cramer_p;
  s.reduction = batch_reduction;
  s.density_gradient = density_gradient;
  s.alignment.gamma = mdp_gamma;
  s.alignment.sigma_final = final_reward_variance;
  s.alignment.bandwidth = bandwidth;
  s.alignment.grid_size = grid_size;
  return s;
}

NetworkShape TrainConfig::network_shape(std::size_t n_states, std::size_t n_actions) const {
  return {n_states, hidden_size_1, hidden_size_2, n_actions, n_components};
}

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(c.*member)>;
          if constexpr (is_enum_field<T>) {
            j[std::string(f.name)] = std::string(to_string(c.*member));
          } else {
            j[std::string(f.name)] = c.*member;
          }
        },
        f.member);
  }
  return j;
}

void apply_config_json(TrainConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(key, "unknown configuration field");
    set_from_json(config, *f, value);
  }
}

void apply_config_override(TrainConfig& config, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError(std::string(key), "unknown configuration field");
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(config.*member)>;
        if constexpr (is_enum_field<T>) {
          config.*member = enum_from_string<T>(value);
        } else {
          config.*member = parse_number<T>(key, value);
        }
      },
      f->member);
}

TrainConfig reference_hyperparameters() {
  TrainConfig c;
  c.total_timesteps = 10'000'000;
  c.learning_rate = 5e-5;
  c.max_norm = 3.0;
  c.num_envs = 4;
  c.buffer_size = 1'000'000;
  c.gamma = 0.99;
  c.target_network_frequency = 1;
  c.batch_size = 64;
  c.start_e = 1.0;
  c.end_e = 0.01;
  c.exploration_fraction = 0.2;
  c.learning_starts = 30'000;
  c.train_frequency = 4;
  c.hidden_size_1 = 512;
  c.hidden_size_2 = 256;
  c.n_flows = 1;
  c.n_components = 4;
  c.n_samples = 500;
  c.final_reward_variance = 0.1;
  c.bandwidth = 0.05;
  return c;
}

}  // namespace nfdrl
