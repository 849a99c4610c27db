#include "nfdrl/envs.hpp"

#include <cmath>
#include <string>

#include "nfdrl/errors.hpp"

namespace nfdrl {

RewardSpec RewardSpec::constant(double value) {
  RewardSpec r;
  r.kind_ = Kind::constant;
  r.components_ = {{1.0, value, 0.0}};
  return r;
}

RewardSpec RewardSpec::gaussian(double mean, double stddev) {
  if (!(stddev > 0.0)) throw DomainError("gaussian reward: stddev must be > 0");
  RewardSpec r;
  r.kind_ = Kind::gaussian;
  r.components_ = {{1.0, mean, stddev}};
  return r;
}

RewardSpec RewardSpec::mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw DomainError("mixture reward: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.stddev > 0.0)) throw DomainError("mixture reward: stddev must be > 0");
    if (!(c.weight >= 0.0)) throw DomainError("mixture reward: weight must be >= 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture reward: weights must sum to 1");
  RewardSpec r;
  r.kind_ = Kind::gaussian_mixture;
  r.components_ = std::move(components);
  return r;
}

double RewardSpec::mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double RewardSpec::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::constant:
      return components_.front().mean;
    case Kind::gaussian: {
      std::normal_distribution<double> n(components_.front().mean, components_.front().stddev);
      return n(rng);
    }
    case Kind::gaussian_mixture: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double pick = u(rng);
      double acc = 0.0;
      std::size_t chosen = components_.size() - 1;
      for (std::size_t i = 0; i < components_.size(); ++i) {
        acc += components_[i].weight;
        if (pick < acc) {
          chosen = i;
          break;
        }
      }
      std::normal_distribution<double> n(components_[chosen].mean, components_[chosen].stddev);
      return n(rng);
    }
  }
  return 0.0;
}

void TabularMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw DomainError(name + ": empty state or action set");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError(name + ": gamma must lie in (0, 1]");
  if (start_state >= n_states) throw DomainError(name + ": start state out of range");
  if (terminal.size() != n_states || transitions.size() != n_states * n_actions ||
      rewards.size() != n_states * n_actions) {
    throw DomainError(name + ": table sizes do not match state/action counts");
  }
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto& p = row(s, a);
      if (p.size() != n_states || rewards[s * n_actions + a].size() != n_states) {
        throw DomainError(name + ": transition row has wrong length");
      }
      double total = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw DomainError(name + ": negative transition probability");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw DomainError(name + ": transition row (" + std::to_string(s) + ", " +
                          std::to_string(a) + ") does not sum to 1");
      }
      if (terminal[s]) {
        const auto& r = reward(s, a, s);
        if (p[s] != 1.0 || r.kind() != RewardSpec::Kind::constant || r.mean() != 0.0) {
          throw DomainError(name + ": terminal states must self-loop with zero reward");
        }
      }
    }
  }
}

TabularMdp make_empty_mdp(std::string name, std::size_t n_states, std::size_t n_actions,
                          double gamma) {
  TabularMdp mdp;
  mdp.name = std::move(name);
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.terminal.assign(n_states, false);
  mdp.transitions.assign(n_states * n_actions, std::vector<double>(n_states, 0.0));
  mdp.rewards.assign(n_states * n_actions,
                     std::vector<RewardSpec>(n_states, RewardSpec::constant(0.0)));
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) mdp.transitions[s * n_actions + a][s] = 1.0;
  }
  return mdp;
}

namespace {

void set_edge(TabularMdp& mdp, std::size_t s, std::size_t a, std::size_t next, double p,
              RewardSpec reward) {
  auto& row = mdp.transitions[s * mdp.n_actions + a];
  if (row[s] == 1.0 && next != s) row[s] = 0.0;  // drop the placeholder self-loop
  row[next] += p;
  mdp.rewards[s * mdp.n_actions + a][next] = std::move(reward);
}

}  // namespace

TabularMdp make_mdp1(double sigma_final, double r1, double r2) {
  TabularMdp mdp = make_empty_mdp("mdp1", 3, 1, 0.9);
  set_edge(mdp, 0, 0, 1, 1.0, RewardSpec::gaussian(r1, sigma_final));
  set_edge(mdp, 1, 0, 2, 1.0, RewardSpec::gaussian(r2, sigma_final));
  mdp.terminal[2] = true;
  mdp.validate();
  return mdp;
}

TabularMdp make_mdp2(double sigma_final, double r1, double r2) {
  TabularMdp mdp = make_empty_mdp("mdp2", 3, 1, 0.99);
  set_edge(mdp, 0, 0, 1, 0.5, RewardSpec::gaussian(r1, sigma_final));
  set_edge(mdp, 0, 0, 2, 0.5, RewardSpec::gaussian(r2, sigma_final));
  mdp.terminal[1] = true;
  mdp.terminal[2] = true;
  mdp.validate();
  return mdp;
}

TabularMdp make_mdp3(double upper_stddev) {
  TabularMdp mdp = make_empty_mdp("mdp3", 5, 1, 1.0);
  set_edge(mdp, 0, 0, 1, 1.0, RewardSpec::constant(0.0));
  set_edge(mdp, 1, 0, 2, 1.0, RewardSpec::constant(0.0));
  set_edge(mdp, 2, 0, 3, 1.0, RewardSpec::constant(0.0));
  set_edge(mdp, 3, 0, 4, 1.0,
           RewardSpec::mixture({{0.5, -2.0, 1.0}, {0.5, 2.0, upper_stddev}}));
  mdp.terminal[4] = true;
  mdp.validate();
  return mdp;
}

TabularMdp make_bernoulli_mdp(double gamma) {
  TabularMdp mdp = make_empty_mdp("bernoulli", 3, 1, gamma);
  set_edge(mdp, 0, 0, 1, 0.5, RewardSpec::constant(0.0));
  set_edge(mdp, 0, 0, 2, 0.5, RewardSpec::constant(1.0));
  mdp.terminal[1] = true;
  mdp.terminal[2] = true;
  mdp.validate();
  return mdp;
}

TabularMdp make_frozen_lake(bool slippery, double gamma) {
  constexpr std::size_t kSide = 4;
  constexpr std::size_t kGoal = 15;
  TabularMdp mdp = make_empty_mdp(slippery ? "frozenlake" : "frozenlake_deterministic",
                                  kSide * kSide, 4, gamma);
  for (std::size_t s : {5u, 7u, 11u, 12u, 15u}) mdp.terminal[s] = true;

  auto move = [](std::size_t s, std::size_t a) {
    std::size_t row = s / kSide;
    std::size_t col = s % kSide;
    switch (a) {
      case 0: col = col > 0 ? col - 1 : col; break;            // left
      case 1: row = row + 1 < kSide ? row + 1 : row; break;    // down
      case 2: col = col + 1 < kSide ? col + 1 : col; break;    // right
      case 3: row = row > 0 ? row - 1 : row; break;            // up
      default: break;
    }
    return row * kSide + col;
  };

  for (std::size_t s = 0; s < kSide * kSide; ++s) {
    if (mdp.terminal[s]) continue;
    for (std::size_t a = 0; a < 4; ++a) {
      auto& row = mdp.transitions[s * 4 + a];
      std::fill(row.begin(), row.end(), 0.0);
      auto& rew = mdp.rewards[s * 4 + a];
      const std::vector<std::size_t> moves =
          slippery ? std::vector<std::size_t>{(a + 3) % 4, a, (a + 1) % 4}
                   : std::vector<std::size_t>{a};
      for (std::size_t m : moves) {
        const std::size_t next = move(s, m);
        row[next] += 1.0 / static_cast<double>(moves.size());
        rew[next] = RewardSpec::constant(next == kGoal ? 1.0 : 0.0);
      }
      // 1/3 + 1/3 + 1/3 may round away from 1; fold the residue into the
      // intended move.
      double total = 0.0;
      for (double v : row) total += v;
      row[move(s, a)] += 1.0 - total;
    }
  }
  mdp.validate();
  return mdp;
}

Transition step(const TabularMdp& mdp, std::size_t state, std::size_t action, Rng& rng) {
  if (state >= mdp.n_states || action >= mdp.n_actions) {
    throw DomainError("step: state or action out of range");
  }
  if (mdp.terminal[state]) throw DomainError("step: state " + std::to_string(state) + " is terminal");
  const auto& p = mdp.row(state, action);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pick = u(rng);
  double acc = 0.0;
  std::size_t next = mdp.n_states;
  std::size_t last_positive = 0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    last_positive = s;
    acc += p[s];
    if (pick < acc) {
      next = s;
      break;
    }
  }
  if (next == mdp.n_states) next = last_positive;
  const double r = mdp.reward(state, action, next).sample(rng);
  return {state, action, r, next, static_cast<bool>(mdp.terminal[next])};
}

std::vector<double> true_return_distribution(const TabularMdp& mdp, std::size_t state,
                                             std::size_t action, std::size_t n_rollouts,
                                             Rng& rng, std::span<const std::size_t> policy) {
  if (n_rollouts == 0) throw DomainError("true_return_distribution: n_rollouts must be >= 1");
  std::vector<double> out;
  out.reserve(n_rollouts);
  if (mdp.terminal[state]) {
    out.assign(n_rollouts, 0.0);
    return out;
  }
  for (std::size_t k = 0; k < n_rollouts; ++k) {
    double ret = 0.0;
    double discount = 1.0;
    std::size_t s = state;
    std::size_t a = action;
    std::size_t steps = 0;
    while (true) {
      const Transition t = step(mdp, s, a, rng);
      ret += discount * t.reward;
      discount *= mdp.gamma;
      if (t.done) break;
      // Policies may cycle forever; with gamma < 1 the remaining tail is
      // negligible long before the cap.
      if (discount < 1e-16) break;
      if (++steps >= kMaxRolloutSteps) {
        throw ConvergenceError("true_return_distribution: rollout exceeded step cap");
      }
      s = t.next_state;
      a = policy.empty() ? 0 : policy[s];
    }
    out.push_back(ret);
  }
  return out;
}

double episode_success_rate(const TabularMdp& mdp, std::span<const std::size_t> policy,
                            std::size_t goal, std::size_t episodes, Rng& rng) {
  if (episodes == 0) throw DomainError("episode_success_rate: episodes must be >= 1");
  if (policy.size() != mdp.n_states) throw DomainError("episode_success_rate: policy size mismatch");
  std::size_t hits = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = mdp.start_state;
    for (std::size_t k = 0; k < kMaxRolloutSteps && !mdp.terminal[s]; ++k) {
      s = step(mdp, s, policy[s], rng).next_state;
    }
    if (s == goal) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(episodes);
}

namespace {

std::string_view kind_name(RewardSpec::Kind k) {
  switch (k) {
    case RewardSpec::Kind::constant: return "constant";
    case RewardSpec::Kind::gaussian: return "gaussian";
    case RewardSpec::Kind::gaussian_mixture: return "gaussian_mixture";
  }
  return "constant";
}

nlohmann::json reward_to_json(const RewardSpec& r) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.components()) comps.push_back({c.weight, c.mean, c.stddev});
  return {{"kind", kind_name(r.kind())}, {"components", comps}};
}

RewardSpec reward_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const auto& comps = j.at("components");
  if (kind == "constant") return RewardSpec::constant(comps.at(0).at(1).get<double>());
  if (kind == "gaussian") {
    return RewardSpec::gaussian(comps.at(0).at(1).get<double>(), comps.at(0).at(2).get<double>());
  }
  if (kind == "gaussian_mixture") {
    std::vector<GaussianComponent> out;
    for (const auto& c : comps) {
      out.push_back({c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()});
    }
    return RewardSpec::mixture(std::move(out));
  }
  throw DomainError("unknown reward kind '" + kind + "'");
}

}  // namespace

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& row : mdp.rewards) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& spec : row) r.push_back(reward_to_json(spec));
    rewards.push_back(std::move(r));
  }
  std::vector<bool> terminal(mdp.terminal.begin(), mdp.terminal.end());
  return {{"name", mdp.name},
          {"states", mdp.n_states},
          {"actions", mdp.n_actions},
          {"start_state", mdp.start_state},
          {"gamma", mdp.gamma},
          {"terminal", terminal},
          {"transitions", mdp.transitions},
          {"rewards", rewards}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
  TabularMdp mdp;
  mdp.name = j.value("name", std::string("custom"));
  mdp.n_states = j.at("states").get<std::size_t>();
  mdp.n_actions = j.at("actions").get<std::size_t>();
  mdp.start_state = j.value("start_state", std::size_t{0});
  mdp.gamma = j.at("gamma").get<double>();
  mdp.terminal = j.at("terminal").get<std::vector<bool>>();
  mdp.transitions = j.at("transitions").get<std::vector<std::vector<double>>>();
  for (const auto& row : j.at("rewards")) {
    std::vector<RewardSpec> r;
    for (const auto& spec : row) r.push_back(reward_from_json(spec));
    mdp.rewards.push_back(std::move(r));
  }
  mdp.validate();
  return mdp;
}

}  // namespace nfdrl
