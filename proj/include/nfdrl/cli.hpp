#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nfdrl/agent.hpp"
#include "nfdrl/config.hpp"
#include "nfdrl/envs.hpp"

namespace nfdrl {

inline constexpr int kCheckpointFormat = 1;

/// Builds a known environment. MDP1/MDP2 reward noise follows
/// config.final_reward_variance; FrozenLake takes config.gamma.
TabularMdp make_env(std::string_view id, const TrainConfig& config);

std::string metrics_csv(std::span<const MetricsRow> rows);
std::string distributions_csv(std::span<const DistributionTable> tables);

/// Entry point behind the `nfdrl` binary. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 invalid configuration or input.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace nfdrl
