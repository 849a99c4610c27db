#include "nfdrl/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "nfdrl/errors.hpp"
#include "nfdrl/evaluation.hpp"
#include "nfdrl/io.hpp"
#include "nfdrl/oracles.hpp"

namespace nfdrl {

namespace fs = std::filesystem;

namespace {

// Signals exit code 2 for malformed inputs that are not config fields.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string config_path;
  std::string env = "mdp1";
  std::optional<std::uint64_t> seed;
  std::string out = "runs/latest";
  std::string loss;
  std::string checkpoint;
  std::size_t trials = 1000;
  std::vector<std::pair<std::string, std::string>> overrides;
};

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    const nlohmann::json defaults = config_to_json(TrainConfig{});
    for (const auto& item : defaults.items()) k.insert(item.key());
    return k;
  }();
  return keys;
}

// Pulls `--<config field> value` pairs out of the argument list; the rest
// goes to CLI11.
std::vector<std::string> extract_overrides(std::span<const std::string> args,
                                           RunOptions& opts) {
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a != "--seed") {
      std::string key = a.substr(2);
      std::string value;
      bool inline_value = false;
      if (auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
        inline_value = true;
      }
      for (char& c : key) {
        if (c == '-') c = '_';
      }
      if (config_keys().count(key) != 0) {
        if (!inline_value) {
          if (i + 1 >= args.size()) throw ConfigError(key, "missing value for --" + key);
          value = args[++i];
        }
        opts.overrides.emplace_back(key, value);
        continue;
      }
    }
    rest.push_back(a);
  }
  return rest;
}

TrainConfig effective_config(const RunOptions& opts) {
  TrainConfig config;
  if (!opts.config_path.empty()) {
    if (!fs::exists(opts.config_path)) {
      throw ConfigError("config", "config file not found: " + opts.config_path);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(opts.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config", std::string("config is not valid JSON: ") + e.what());
    }
    apply_config_json(config, j);
  }
  for (const auto& [key, value] : opts.overrides) apply_config_override(config, key, value);
  if (!opts.loss.empty()) config.loss_kind = loss_kind_from_string(opts.loss);
  if (opts.seed) config.seed = *opts.seed;
  config.validate();
  return config;
}

struct Checkpoint {
  std::string env;
  TrainConfig config;
  NetworkParams net;
  std::size_t step = 0;
};

Checkpoint load_checkpoint(const std::string& path) {
  if (path.empty()) throw InputError("--checkpoint is required");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormat) {
      throw InputError("unsupported checkpoint format_version");
    }
    Checkpoint c;
    c.env = j.at("env").get<std::string>();
    apply_config_json(c.config, j.at("config"));
    c.net = network_from_json(j.at("network"));
    c.step = j.at("step").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint schema mismatch: ") + e.what());
  } catch (const DomainError& e) {
    throw InputError(std::string("checkpoint schema mismatch: ") + e.what());
  }
}

void check_shape(const NetworkParams& net, const TabularMdp& mdp) {
  if (net.shape().input_dim != mdp.n_states || net.shape().n_actions != mdp.n_actions) {
    throw InputError("checkpoint network does not match env " + mdp.name);
  }
}

int cmd_train(const RunOptions& opts, std::ostream& out) {
  const TrainConfig config = effective_config(opts);
  const TabularMdp mdp = make_env(opts.env, config);
  const fs::path dir(opts.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", config_to_json(config).dump(2) + "\n");

  const TrainResult result = train(mdp, config, [](const MetricsRow& row) {
    log(LogLevel::info, "step " + std::to_string(row.step) + " loss " + format_double(row.loss) +
                            " eval_cramer " + format_double(row.eval_cramer_mean));
  });

  write_file_atomic(dir / "metrics.csv", metrics_csv(result.metrics));
  const nlohmann::json checkpoint = {{"format_version", kCheckpointFormat},
                                     {"env", opts.env},
                                     {"config", config_to_json(config)},
                                     {"network", network_to_json(result.net)},
                                     {"optimizer", result.optimizer.to_json()},
                                     {"step", result.timesteps}};
  write_file_atomic(dir / "checkpoint.json", checkpoint.dump() + "\n");
  write_file_atomic(dir / "distributions.csv", distributions_csv(export_all(result.net)));
  out << "wrote " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_export(const RunOptions& opts, std::ostream& out) {
  const Checkpoint c = load_checkpoint(opts.checkpoint);
  const std::string env = opts.env.empty() ? c.env : opts.env;
  check_shape(c.net, make_env(env, c.config));
  const fs::path path = fs::path(opts.out) / "distributions.csv";
  write_file_atomic(path, distributions_csv(export_all(c.net)));
  out << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_eval(const RunOptions& opts, std::ostream& out) {
  const Checkpoint c = load_checkpoint(opts.checkpoint);
  TrainConfig config = c.config;
  for (const auto& [key, value] : opts.overrides) apply_config_override(config, key, value);
  if (opts.seed) config.seed = *opts.seed;
  const std::string env = opts.env.empty() ? c.env : opts.env;
  const TabularMdp mdp = make_env(env, config);
  check_shape(c.net, mdp);

  Rng rng(config.seed);
  const std::vector<double> z = normal_quantile_grid(config.n_samples);
  const std::vector<std::size_t> policy = greedy_policy(c.net, z);
  std::ostringstream csv;
  csv << "state,action,q_estimate,stddev,cramer_to_truth\n";
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    const auto flows = forward_params(c.net, one_hot(s, mdp.n_states));
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto truth = true_return_distribution(mdp, s, a, config.eval_rollouts, rng, policy);
      const Moments m = flow_moments(flows[a]);
      csv << s << ',' << a << ',' << format_double(estimate_q(flows[a], z)) << ','
          << format_double(m.stddev) << ',' << format_double(cramer_to_samples(flows[a], truth))
          << '\n';
    }
  }
  const EvalResult summary = evaluate(c.net, mdp, config.eval_rollouts, rng);
  const fs::path path = fs::path(opts.out) / "eval.csv";
  write_file_atomic(path, csv.str());
  out << "eval_cramer_mean " << format_double(summary.cramer_mean) << "\n"
      << "greedy_return_mean " << format_double(summary.greedy_return_mean) << "\n";
  return 0;
}

int cmd_props(const RunOptions& opts, std::ostream& out) {
  if (opts.trials == 0) throw ConfigError("trials", "--trials must be >= 1");
  const std::vector<PropertyReport> reports = run_properties(opts.trials, opts.seed.value_or(0));
  std::string lines;
  bool ok = true;
  for (const PropertyReport& r : reports) {
    lines += report_to_json(r).dump() + "\n";
    ok = ok && r.pass;
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " max_violation "
        << format_double(r.max_violation) << (r.asserted ? "" : " (measured)") << "\n";
  }
  write_file_atomic(fs::path(opts.out) / "props.jsonl", lines);
  return ok ? 0 : 1;
}

}  // namespace

TabularMdp make_env(std::string_view id, const TrainConfig& config) {
  const double sigma = config.final_reward_variance;
  if (id == "mdp1") return make_mdp1(sigma);
  if (id == "mdp2") return make_mdp2(sigma);
  if (id == "mdp3") return make_mdp3();
  if (id == "bernoulli") return make_bernoulli_mdp();
  if (id == "frozenlake") return make_frozen_lake(true, config.gamma);
  throw ConfigError("env", "unknown env '" + std::string(id) +
                               "' (expected mdp1, mdp2, mdp3, bernoulli or frozenlake)");
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string s = "step,loss,eval_cramer_mean,greedy_return_mean,epsilon\n";
  for (const MetricsRow& r : rows) {
    s += std::to_string(r.step) + ',' + format_double(r.loss) + ',' +
         format_double(r.eval_cramer_mean) + ',' + format_double(r.greedy_return_mean) + ',' +
         format_double(r.epsilon) + '\n';
  }
  return s;
}

std::string distributions_csv(std::span<const DistributionTable> tables) {
  std::string s = "state,action,support,density\n";
  for (const DistributionTable& t : tables) {
    const std::string prefix = std::to_string(t.state) + ',' + std::to_string(t.action) + ',';
    for (std::size_t i = 0; i < t.support.size(); ++i) {
      s += prefix + format_double(t.support[i]) + ',' + format_double(t.density[i]) + '\n';
    }
  }
  return s;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  RunOptions opts;
  try {
    std::vector<std::string> rest = extract_overrides(args.subspan(std::min<std::size_t>(1, args.size())), opts);

    CLI::App app{"Normalizing-flow distributional RL"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
      sub->add_option("--config", opts.config_path, "JSON config file");
      sub->add_option("--env", opts.env, "mdp1, mdp2, mdp3, bernoulli or frozenlake");
      sub->add_option("--seed", seed, "random seed");
      sub->add_option("--out", opts.out, "output directory");
    };
    CLI::App* train_cmd = app.add_subcommand("train", "train an agent");
    add_common(train_cmd);
    train_cmd->add_option("--loss", opts.loss, "exact or surrogate");
    CLI::App* props_cmd = app.add_subcommand("props", "run the property oracles");
    add_common(props_cmd);
    props_cmd->add_option("--trials", opts.trials, "random trials per property");
    CLI::App* export_cmd = app.add_subcommand("export", "export learned densities");
    add_common(export_cmd);
    export_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint.json")->required();
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint.json")->required();

    std::reverse(rest.begin(), rest.end());
    try {
      app.parse(rest);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    for (CLI::App* sub : app.get_subcommands()) {
      if (sub->count("--seed") > 0) opts.seed = seed;
      if ((sub == export_cmd || sub == eval_cmd) && sub->count("--env") == 0) opts.env.clear();
    }

    if (train_cmd->parsed()) return cmd_train(opts, out);
    if (props_cmd->parsed()) return cmd_props(opts, out);
    if (export_cmd->parsed()) return cmd_export(opts, out);
    return cmd_eval(opts, out);
  } catch (const ConfigError& e) {
    err << "config error (" << e.field() << "): " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nfdrl
