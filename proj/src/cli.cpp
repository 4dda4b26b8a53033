#include "distirl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace distirl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Config-key errors are usage errors (exit 2), unlike I/O or validation
/// failures (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Wrapper around a JSON object that tracks key consumption so leftovers can
/// be rejected.
class Config {
 public:
  Config(json object, std::string origin)
      : object_(std::move(object)), origin_(std::move(origin)) {
    if (!object_.is_object()) {
      throw UsageError(origin_ + ": config must be a JSON object");
    }
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!object_.contains(key)) {
      throw UsageError(origin_ + ": missing required key '" + key + "'");
    }
    return get<T>(key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    if (!object_.contains(key)) return fallback;
    return get<T>(key);
  }

  Config sub(const std::string& key) {
    if (!object_.contains(key)) {
      throw UsageError(origin_ + ": missing required key '" + key + "'");
    }
    consumed_.insert(key);
    return Config(object_.at(key), origin_ + "." + key);
  }

  bool has_sub(const std::string& key) const {
    return object_.contains(key) && object_.at(key).is_object();
  }

  const json& raw(const std::string& key) {
    consumed_.insert(key);
    return object_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!consumed_.contains(key)) {
        throw UsageError(origin_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  template <typename T>
  T get(const std::string& key) {
    consumed_.insert(key);
    try {
      return object_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError(origin_ + ": key '" + key + "': " + e.what());
    }
  }

  json object_;
  std::string origin_;
  std::set<std::string> consumed_;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config file '" + path + "': " + e.what());
  }
}

IrlConfig irl_config_from(Config& cfg) {
  IrlConfig c;
  c.reward_kind = parse_reward_kind(
      cfg.get_or<std::string>("reward_kind", reward_kind_name(c.reward_kind)));
  c.critic_kind = parse_critic_kind(
      cfg.get_or<std::string>("critic_kind", critic_kind_name(c.critic_kind)));
  c.reward_loss = parse_reward_loss_kind(cfg.get_or<std::string>(
      "reward_loss", reward_loss_kind_name(c.reward_loss)));
  c.distortion = Distortion::parse(
      cfg.get_or<std::string>("distortion", c.distortion.to_string()));
  c.beta = cfg.get_or<double>("beta", c.beta);
  c.eta_critic = cfg.get_or<double>("eta_critic", c.eta_critic);
  c.eta_reward = cfg.get_or<double>("eta_reward", c.eta_reward);
  c.kl_weight = cfg.get_or<double>("kl_weight", c.kl_weight);
  c.batch_size = cfg.get_or<int>("batch_size", c.batch_size);
  c.iterations = cfg.get_or<int>("iterations", c.iterations);
  c.return_samples = cfg.get_or<int>("return_samples", c.return_samples);
  c.horizon = cfg.get_or<int>("horizon", c.horizon);
  c.n_quantiles = cfg.get_or<int>("n_quantiles", c.n_quantiles);
  c.kappa = cfg.get_or<double>("kappa", c.kappa);
  c.gamma = cfg.get_or<double>("gamma", c.gamma);
  c.r_min = cfg.get_or<double>("r_min", c.r_min);
  c.r_max = cfg.get_or<double>("r_max", c.r_max);
  c.critic_steps_per_iter =
      cfg.get_or<int>("critic_steps_per_iter", c.critic_steps_per_iter);
  c.kl_mc_samples = cfg.get_or<int>("kl_mc_samples", c.kl_mc_samples);
  c.init_sigma = cfg.get_or<double>("init_sigma", c.init_sigma);
  c.off_support_penalty =
      cfg.get_or<double>("off_support_penalty", c.off_support_penalty);
  c.state_coupling = cfg.get_or<double>("state_coupling", c.state_coupling);
  c.seed = cfg.get_or<std::uint64_t>("seed", c.seed);
  c.validate();
  return c;
}

json irl_config_to_json(const IrlConfig& c) {
  json j;
  j["reward_kind"] = reward_kind_name(c.reward_kind);
  j["critic_kind"] = critic_kind_name(c.critic_kind);
  j["reward_loss"] = reward_loss_kind_name(c.reward_loss);
  j["distortion"] = c.distortion.to_string();
  j["beta"] = c.beta;
  j["eta_critic"] = c.eta_critic;
  j["eta_reward"] = c.eta_reward;
  j["kl_weight"] = c.kl_weight;
  j["batch_size"] = c.batch_size;
  j["iterations"] = c.iterations;
  j["return_samples"] = c.return_samples;
  j["horizon"] = c.horizon;
  j["n_quantiles"] = c.n_quantiles;
  j["kappa"] = c.kappa;
  j["gamma"] = c.gamma;
  j["r_min"] = c.r_min;
  j["r_max"] = c.r_max;
  j["critic_steps_per_iter"] = c.critic_steps_per_iter;
  j["kl_mc_samples"] = c.kl_mc_samples;
  j["init_sigma"] = c.init_sigma;
  j["off_support_penalty"] = c.off_support_penalty;
  j["state_coupling"] = c.state_coupling;
  j["seed"] = c.seed;
  return j;
}

ExpertConfig expert_config_from(Config& cfg) {
  ExpertConfig c;
  c.distortion = Distortion::parse(
      cfg.get_or<std::string>("distortion", c.distortion.to_string()));
  c.episodes = cfg.get_or<int>("episodes", c.episodes);
  c.step_size = cfg.get_or<double>("step_size", c.step_size);
  c.eps_start = cfg.get_or<double>("eps_start", c.eps_start);
  c.eps_end = cfg.get_or<double>("eps_end", c.eps_end);
  c.horizon = cfg.get_or<int>("horizon", c.horizon);
  c.n_quantiles = cfg.get_or<int>("n_quantiles", c.n_quantiles);
  c.kappa = cfg.get_or<double>("kappa", c.kappa);
  c.beta_greedy = cfg.get_or<double>("beta_greedy", c.beta_greedy);
  c.seed = cfg.get_or<std::uint64_t>("seed", c.seed);
  c.validate();
  return c;
}

/// Output-directory helper enforcing the no-silent-overwrite rule.
class OutputDir {
 public:
  OutputDir(std::string dir, bool force) : dir_(std::move(dir)), force_(force) {
    fs::create_directories(dir_);
  }

  std::string path_for(const std::string& name) const {
    const fs::path p = fs::path(dir_) / name;
    if (!force_ && fs::exists(p)) {
      throw std::runtime_error("refusing to overwrite '" + p.string() +
                               "' (pass --force to allow)");
    }
    return p.string();
  }

  std::string dir() const { return dir_; }

 private:
  std::string dir_;
  bool force_;
};

struct Env {
  TabularMdp mdp;
  TrueRewardSpec rewards;
};

Env load_env(const std::string& dir) {
  return Env{load_mdp((fs::path(dir) / "env.mdp").string()),
             load_rewards((fs::path(dir) / "env.rewards").string())};
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << content;
  if (!out.good()) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_make_env(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string kind = cfg.require<std::string>("env_kind");
  if (kind == "gridworld") {
    const int width = cfg.require<int>("width");
    const int height = cfg.require<int>("height");
    const auto start_arr = cfg.require<std::vector<int>>("start");
    if (start_arr.size() != 2) {
      throw UsageError(config_path + ": 'start' must be [row, col]");
    }
    std::vector<GridGoal> goals;
    for (const json& goal : cfg.raw("goals")) {
      const auto cell = goal.at("cell").get<std::vector<int>>();
      if (cell.size() != 2) {
        throw UsageError(config_path + ": goal 'cell' must be [row, col]");
      }
      goals.push_back(GridGoal{
          GridCell{cell[0], cell[1]},
          RewardSpec::parse(goal.at("reward").get<std::string>())});
    }
    const double step_cost = cfg.get_or<double>("step_cost", 0.0);
    const double slip_prob = cfg.get_or<double>("slip_prob", 0.0);
    const double gamma = cfg.get_or<double>("gamma", 0.79);
    const bool on_entry = cfg.get_or<bool>("goal_reward_on_entry", false);
    cfg.finish();
    const GridworldEnv env =
        build_gridworld(width, height, GridCell{start_arr[0], start_arr[1]},
                        goals, step_cost, slip_prob, gamma, on_entry);
    save_mdp(env.mdp, out.path_for("env.mdp"));
    save_rewards(env.rewards, out.path_for("env.rewards"));
  } else if (kind == "bandit") {
    const auto arms = cfg.require<std::vector<std::string>>("arms");
    if (arms.empty()) {
      throw UsageError(config_path + ": 'arms' must be non-empty");
    }
    const double gamma = cfg.get_or<double>("gamma", 0.5);
    cfg.finish();
    const int A = static_cast<int>(arms.size());
    std::vector<double> transition(static_cast<std::size_t>(A), 1.0);
    TabularMdp mdp(1, A, std::move(transition), gamma, {1.0});
    TrueRewardSpec rewards(1, A);
    for (int a = 0; a < A; ++a) {
      rewards.set(0, a, RewardSpec::parse(arms[static_cast<std::size_t>(a)]));
    }
    save_mdp(mdp, out.path_for("env.mdp"));
    save_rewards(rewards, out.path_for("env.rewards"));
  } else {
    throw UsageError(config_path + ": unknown env_kind '" + kind + "'");
  }
}

void cmd_train_expert(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string env_dir = cfg.require<std::string>("env");
  const ExpertConfig expert_cfg = expert_config_from(cfg);
  cfg.finish();
  const Env env = load_env(env_dir);
  const ExpertResult expert = train_expert(env.mdp, env.rewards, expert_cfg);
  expert.critic.save(out.path_for("expert_critic.txt"));
  expert.policy.save(out.path_for("expert_policy.txt"));
}

void cmd_gen_demos(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string env_dir = cfg.require<std::string>("env");
  const int n_traj = cfg.require<int>("n_traj");
  const int horizon = cfg.require<int>("horizon");
  const auto seed = cfg.get_or<std::uint64_t>("seed", 0);
  const Env env = load_env(env_dir);

  if (cfg.has("commit_goals")) {
    // Port-commitment demos: each episode commits to one goal state via a
    // softmax over the expert critic's risk-adjusted goal values.
    const auto goals = cfg.require<std::vector<int>>("commit_goals");
    const QuantileCritic critic =
        QuantileCritic::load(cfg.require<std::string>("critic"));
    const Distortion d = Distortion::parse(
        cfg.get_or<std::string>("distortion", "cvar(0.05)"));
    const double commit_beta = cfg.get_or<double>("commit_beta", 0.65);
    cfg.finish();
    Rng rng(seed, 1);
    const DemoSet demos =
        generate_commitment_demos(env.mdp, env.rewards, critic, d, goals,
                                  commit_beta, n_traj, horizon, rng);
    save_demos(demos, out.path_for("demos.txt"));
    return;
  }

  RiskPolicy policy(env.mdp.n_states(), env.mdp.n_actions());
  if (cfg.has("policy")) {
    policy = RiskPolicy::load(cfg.require<std::string>("policy"));
  } else {
    const QuantileCritic critic =
        QuantileCritic::load(cfg.require<std::string>("critic"));
    const Distortion d = Distortion::parse(
        cfg.get_or<std::string>("distortion", "cvar(0.05)"));
    const double beta = cfg.get_or<double>("beta", 0.1);
    policy = RiskPolicy::from_quantile_critic(critic, d, beta);
  }
  cfg.finish();

  Rng rng(seed);
  const DemoSet demos =
      generate_demos(env.mdp, env.rewards, policy, n_traj, horizon, rng);
  save_demos(demos, out.path_for("demos.txt"));
}

void cmd_train_irl(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string demos_path = cfg.require<std::string>("demos");
  const IrlConfig irl_cfg = irl_config_from(cfg);
  cfg.finish();
  const DemoSet demos = load_demos(demos_path);
  const TrainResult result =
      train(demos.n_states, demos.n_actions, demos, irl_cfg);
  result.model.save(out.path_for("reward_model.txt"));
  result.policy.save(out.path_for("policy.txt"));
  if (irl_cfg.critic_kind == CriticKind::Quantile) {
    result.critic.save(out.path_for("critic.txt"));
  } else {
    result.mean_critic.save(out.path_for("critic.txt"));
  }
  result.log.save_csv(out.path_for("trainlog.csv"));
  json resolved = irl_config_to_json(irl_cfg);
  resolved["demos"] = demos_path;
  write_text_file(out.path_for("config.json"), resolved.dump(2) + "\n");
}

void cmd_eval(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string env_dir = cfg.require<std::string>("env");
  const std::string run_dir = cfg.require<std::string>("run");
  const std::string demos_path = cfg.require<std::string>("demos");
  EvalSettings settings;
  settings.eval_rollouts = cfg.get_or<int>("eval_rollouts", settings.eval_rollouts);
  settings.horizon = cfg.get_or<int>("horizon", settings.horizon);
  settings.n_atoms = cfg.get_or<int>("n_atoms", settings.n_atoms);
  settings.ref_samples = cfg.get_or<int>("ref_samples", settings.ref_samples);
  settings.cvar_alpha = cfg.get_or<double>("cvar_alpha", settings.cvar_alpha);
  settings.seed = cfg.get_or<std::uint64_t>("seed", settings.seed);
  cfg.finish();

  const Env env = load_env(env_dir);
  const RewardModel model =
      RewardModel::load((fs::path(run_dir) / "reward_model.txt").string());
  const RiskPolicy policy =
      RiskPolicy::load((fs::path(run_dir) / "policy.txt").string());
  const DemoSet demos = load_demos(demos_path);
  const EvalReport report =
      evaluate(model, policy, env.mdp, &env.rewards, demos, settings);
  if (report.restricted) {
    std::cerr << "warning: no overlap between demo coverage and the report; "
                 "emitting a restricted report\n";
  }

  std::ostringstream pairs_csv;
  pairs_csv << "s,a,visits,learned_mean,learned_sd,ref_mean,ref_sd,w1\n";
  for (const PairEval& pe : report.pairs) {
    pairs_csv << pe.s << "," << pe.a << "," << pe.visits << ","
              << format_double(pe.learned_mean) << ","
              << format_double(pe.learned_sd) << ","
              << format_double(pe.ref_mean) << "," << format_double(pe.ref_sd)
              << "," << format_double(pe.w1) << "\n";
  }
  write_text_file(out.path_for("eval_pairs.csv"), pairs_csv.str());

  std::ostringstream summary;
  summary << "metric,value\n";
  summary << "pearson_mean," << format_double(report.pearson_mean) << "\n";
  summary << "mean_w1," << format_double(report.mean_w1) << "\n";
  summary << "fsd_policy_over_expert,"
          << format_double(report.fsd_policy_over_expert) << "\n";
  summary << "policy_return_mean," << format_double(report.policy_return_mean)
          << "\n";
  summary << "policy_return_cvar," << format_double(report.policy_return_cvar)
          << "\n";
  summary << "expert_return_mean," << format_double(report.expert_return_mean)
          << "\n";
  summary << "covered_pairs," << report.pairs.size() << "\n";
  write_text_file(out.path_for("eval_summary.csv"), summary.str());
}

void cmd_export_cdf(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string run_dir = cfg.require<std::string>("run");
  const std::string demos_path = cfg.require<std::string>("demos");
  const int n_atoms = cfg.get_or<int>("n_atoms", 200);
  const int samples = cfg.get_or<int>("samples", 4096);
  const auto seed = cfg.get_or<std::uint64_t>("seed", 0);
  cfg.finish();

  const RewardModel model =
      RewardModel::load((fs::path(run_dir) / "reward_model.txt").string());
  const RiskPolicy policy =
      RiskPolicy::load((fs::path(run_dir) / "policy.txt").string());
  Config run_cfg(load_json_file((fs::path(run_dir) / "config.json").string()),
                 run_dir + "/config.json");
  const double gamma = run_cfg.require<double>("gamma");
  const int horizon = run_cfg.require<int>("horizon");
  const DemoSet demos = load_demos(demos_path);
  Rng rng(seed);

  const auto write_cdf = [&](const std::string& name,
                             const QuantileDistribution& dist) {
    std::ostringstream csv;
    csv << "value,cum_prob\n";
    for (const auto& [value, prob] : cdf_table(dist)) {
      csv << format_double(value) << "," << format_double(prob) << "\n";
    }
    write_text_file(out.path_for(name), csv.str());
  };

  // Per-(s,a) reward CDFs for demo-covered cells.
  std::vector<bool> covered(static_cast<std::size_t>(model.n_pairs()), false);
  for (const Trajectory& traj : demos.trajectories) {
    for (const auto& [s, a] : traj.steps) {
      covered[static_cast<std::size_t>(s * model.n_actions() + a)] = true;
    }
  }
  for (int s = 0; s < model.n_states(); ++s) {
    for (int a = 0; a < model.n_actions(); ++a) {
      if (!covered[static_cast<std::size_t>(s * model.n_actions() + a)]) {
        continue;
      }
      std::vector<double> draws(static_cast<std::size_t>(samples));
      for (double& v : draws) {
        const auto [e0, e1] = rng.normal_pair();
        v = model.sample(s, a, e0, e1);
      }
      write_cdf("reward_cdf_s" + std::to_string(s) + "_a" + std::to_string(a) +
                    ".csv",
                empirical_quantiles(draws, n_atoms));
    }
  }

  // Return-level CDFs from the learned model along expert data.
  const auto [z_pi, z_e] = sample_returns_offline(demos, policy, model, gamma,
                                                  horizon, samples, rng);
  write_cdf("return_cdf_policy.csv",
            empirical_quantiles(batch_values(z_pi, model), n_atoms));
  write_cdf("return_cdf_expert.csv",
            empirical_quantiles(batch_values(z_e, model), n_atoms));
}

const char* const kAblationNames[6] = {"Dis-Qt-FSD",  "Dis-Qt-Mean",
                                       "Det-Qt-Mean", "Dis-TD-FSD",
                                       "Dis-TD-Mean", "Det-TD-Mean"};

IrlConfig ablation_variant(const IrlConfig& base, int index) {
  IrlConfig c = base;
  const bool dis = index == 0 || index == 1 || index == 3 || index == 4;
  const bool quantile = index <= 2;
  const bool fsd = index == 0 || index == 3;
  if (!dis) c.reward_kind = RewardKind::Deterministic;
  c.critic_kind = quantile ? CriticKind::Quantile : CriticKind::Mean;
  c.reward_loss = fsd ? RewardLossKind::Fsd : RewardLossKind::Mean;
  return c;
}

void cmd_ablate(const std::string& config_path, const OutputDir& out) {
  Config cfg(load_json_file(config_path), config_path);
  const std::string env_dir = cfg.require<std::string>("env");
  const int n_seeds = cfg.get_or<int>("n_seeds", 5);
  const auto seed_base = cfg.get_or<std::uint64_t>("seed_base", 0);

  Config expert_cfg_json = cfg.sub("expert");
  const ExpertConfig expert_cfg = expert_config_from(expert_cfg_json);
  expert_cfg_json.finish();

  Config demo_cfg = cfg.sub("demo");
  const int demo_n_traj = demo_cfg.require<int>("n_traj");
  const int demo_horizon = demo_cfg.require<int>("horizon");
  const double demo_beta = demo_cfg.get_or<double>("beta", 0.1);
  demo_cfg.finish();

  Config irl_cfg_json = cfg.sub("irl");
  const IrlConfig base_irl = irl_config_from(irl_cfg_json);
  irl_cfg_json.finish();
  cfg.finish();

  Env env = load_env(env_dir);
  AblationSpec spec{std::move(env.mdp), std::move(env.rewards), expert_cfg,
                    demo_n_traj,        demo_horizon,           demo_beta,
                    base_irl,           n_seeds,                seed_base};
  const std::vector<AblationRow> rows = run_ablation(spec);

  std::ostringstream csv;
  csv << "config,seed,raw_return,scaled_return\n";
  for (const AblationRow& row : rows) {
    csv << row.config_name << "," << row.seed << ","
        << format_double(row.raw_return) << ","
        << format_double(row.scaled_return) << "\n";
  }
  write_text_file(out.path_for("ablation.csv"), csv.str());
}

}  // namespace

IrlConfig irl_config_from_json_text(const std::string& text) {
  Config cfg(json::parse(text), "<config>");
  IrlConfig c = irl_config_from(cfg);
  cfg.finish();
  return c;
}

std::vector<AblationRow> run_ablation(const AblationSpec& spec) {
  if (spec.n_seeds < 1) {
    throw std::invalid_argument("run_ablation: n_seeds must be >= 1");
  }

  // Risk-adjusted true return of a policy: the base distortion applied to
  // the Monte-Carlo return distribution under the true rewards. With a
  // neutral distortion this is the plain expected return.
  const auto score_policy = [&](const RiskPolicy& policy,
                                std::uint64_t eval_seed) {
    const int rollouts = 20000;
    Rng rng(eval_seed, 0xab1a7e);
    std::vector<double> returns(static_cast<std::size_t>(rollouts));
    for (int i = 0; i < rollouts; ++i) {
      Rng episode = rng.split(static_cast<std::uint64_t>(i));
      const Trajectory traj = rollout(spec.mdp, policy.matrix(), spec.rewards,
                                      spec.demo_horizon, episode);
      returns[static_cast<std::size_t>(i)] = discounted_signal_return(
          traj, spec.mdp.gamma(), spec.demo_horizon);
    }
    return drm(empirical_quantiles(returns, 200), spec.base_irl.distortion);
  };

  std::vector<AblationRow> rows;
  for (int seed_idx = 0; seed_idx < spec.n_seeds; ++seed_idx) {
    const std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(seed_idx);

    ExpertConfig expert_cfg = spec.expert;
    expert_cfg.seed = seed;
    const ExpertResult expert =
        train_expert(spec.mdp, spec.rewards, expert_cfg);

    std::vector<int> goal_states;
    for (int s = 0; s < spec.mdp.n_states(); ++s) {
      bool absorbing = true;
      for (int a = 0; a < spec.mdp.n_actions(); ++a) {
        if (spec.mdp.transition(s, a, s) != 1.0) absorbing = false;
      }
      if (absorbing) goal_states.push_back(s);
    }
    Rng demo_rng(seed, 1);
    const DemoSet demos =
        goal_states.size() >= 2
            ? generate_commitment_demos(spec.mdp, spec.rewards, expert.critic,
                                        expert_cfg.distortion, goal_states,
                                        spec.demo_beta, spec.demo_n_traj,
                                        spec.demo_horizon, demo_rng)
            : generate_demos(spec.mdp, spec.rewards,
                             RiskPolicy::from_quantile_critic(
                                 expert.critic, expert_cfg.distortion,
                                 spec.demo_beta),
                             spec.demo_n_traj, spec.demo_horizon, demo_rng);

    double scores[6];
    for (int v = 0; v < 6; ++v) {
      IrlConfig variant = ablation_variant(spec.base_irl, v);
      variant.seed = seed;
      const TrainResult result =
          train(spec.mdp.n_states(), spec.mdp.n_actions(), demos, variant);
      scores[v] = score_policy(result.policy, seed);
    }
    const double lo = *std::min_element(scores, scores + 6);
    const double hi = *std::max_element(scores, scores + 6);
    for (int v = 0; v < 6; ++v) {
      const double scaled =
          hi > lo ? (scores[v] - lo) / (hi - lo) : 1.0;
      rows.push_back(AblationRow{kAblationNames[v],
                                 static_cast<int>(seed), scores[v], scaled});
    }
  }
  return rows;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Distributional inverse reinforcement learning for tabular "
               "MDPs"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out;
    bool force = false;
  };

  const char* const names[7] = {"make-env",  "train-expert", "gen-demos",
                                "train-irl", "eval",         "export-cdf",
                                "ablate"};
  const char* const descriptions[7] = {
      "Build an environment (MDP + true reward table)",
      "Train a risk-averse expert on the true rewards",
      "Roll out expert demonstrations",
      "Run distributional IRL on demonstrations",
      "Compare a trained run against the true rewards",
      "Export reward and return CDF data",
      "Run the six-way reward/critic/loss ablation"};

  SubArgs sub_args[7];
  CLI::App* subs[7];
  for (int i = 0; i < 7; ++i) {
    subs[i] = app.add_subcommand(names[i], descriptions[i]);
    subs[i]->add_option("--config", sub_args[i].config, "JSON config file")
        ->required();
    subs[i]->add_option("--out", sub_args[i].out, "output directory")
        ->required();
    subs[i]->add_flag("--force", sub_args[i].force,
                      "allow overwriting existing outputs");
  }

  std::vector<const char*> argv;
  argv.push_back("distirl");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (int i = 0; i < 7; ++i) {
      if (!subs[i]->parsed()) continue;
      const OutputDir out(sub_args[i].out, sub_args[i].force);
      switch (i) {
        case 0: cmd_make_env(sub_args[i].config, out); break;
        case 1: cmd_train_expert(sub_args[i].config, out); break;
        case 2: cmd_gen_demos(sub_args[i].config, out); break;
        case 3: cmd_train_irl(sub_args[i].config, out); break;
        case 4: cmd_eval(sub_args[i].config, out); break;
        case 5: cmd_export_cdf(sub_args[i].config, out); break;
        case 6: cmd_ablate(sub_args[i].config, out); break;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace distirl::cli
