#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfdrl/transition.hpp"

namespace nfdrl {

using Rng = std::mt19937_64;

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Law of the reward attached to one (state, action, next state) edge.
class RewardSpec {
 public:
  enum class Kind { constant, gaussian, gaussian_mixture };

  RewardSpec() = default;
  static RewardSpec constant(double value);
  static RewardSpec gaussian(double mean, double stddev);
  static RewardSpec mixture(std::vector<GaussianComponent> components);

  Kind kind() const { return kind_; }
  const std::vector<GaussianComponent>& components() const { return components_; }
  double mean() const;
  double sample(Rng& rng) const;

 private:
  Kind kind_ = Kind::constant;
  std::vector<GaussianComponent> components_{{1.0, 0.0, 0.0}};
};

/// Finite MDP with categorical transitions. State `start_state` begins every
/// episode; terminal states absorb with zero reward.
struct TabularMdp {
  std::string name;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t start_state = 0;
  double gamma = 1.0;
  std::vector<bool> terminal;
  std::vector<std::vector<double>> transitions;  // [s * n_actions + a][s']
  std::vector<std::vector<RewardSpec>> rewards;  // [s * n_actions + a][s']

  const std::vector<double>& row(std::size_t s, std::size_t a) const {
    return transitions[s * n_actions + a];
  }
  const RewardSpec& reward(std::size_t s, std::size_t a, std::size_t next) const {
    return rewards[s * n_actions + a][next];
  }

  /// Throws DomainError if any invariant is violated.
  void validate() const;
};

/// Builds an MDP with every row initialised to a zero-reward self-loop.
TabularMdp make_empty_mdp(std::string name, std::size_t n_states, std::size_t n_actions,
                          double gamma);

/// s1 -> s2 -> s3 (terminal); rewards N(r1, sigma) then N(r2, sigma); gamma 0.9.
TabularMdp make_mdp1(double sigma_final = 0.1, double r1 = -0.8, double r2 = 0.3);

/// s1 branches with p = 0.5 to two terminal states paying N(r1, sigma) / N(r2, sigma).
TabularMdp make_mdp2(double sigma_final = 0.1, double r1 = 0.8, double r2 = 0.3);

/// s1 -> s2 -> s3 -> s4 -> end, zero rewards except the last step which pays
/// 0.5 N(-2, 1) + 0.5 N(2, upper_stddev); gamma 1.
TabularMdp make_mdp3(double upper_stddev = 1.0);

/// One decision state whose single action reaches two terminal states with
/// equal probability, paying 0 and 1.
TabularMdp make_bernoulli_mdp(double gamma = 1.0);

/// Canonical 4x4 FrozenLake (S at 0, G at 15, holes 5, 7, 11, 12). Actions
/// 0 left, 1 down, 2 right, 3 up. Reward 1 on entering G.
TabularMdp make_frozen_lake(bool slippery = true, double gamma = 0.99);

/// Samples one step from a non-terminal state.
Transition step(const TabularMdp& mdp, std::size_t state, std::size_t action, Rng& rng);

inline constexpr std::size_t kMaxRolloutSteps = 10000;

/// Monte-Carlo discounted returns from (state, action), following `policy`
/// (one action per state) afterwards. An empty policy means action 0.
/// A rollout stops early once the discount drops below 1e-16; an
/// undiscounted rollout longer than kMaxRolloutSteps throws ConvergenceError.
std::vector<double> true_return_distribution(const TabularMdp& mdp, std::size_t state,
                                             std::size_t action, std::size_t n_rollouts,
                                             Rng& rng,
                                             std::span<const std::size_t> policy = {});

/// Fraction of episodes from the start state that reach `goal` within
/// kMaxRolloutSteps steps when following `policy`.
double episode_success_rate(const TabularMdp& mdp, std::span<const std::size_t> policy,
                            std::size_t goal, std::size_t episodes, Rng& rng);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);

}  // namespace nfdrl
