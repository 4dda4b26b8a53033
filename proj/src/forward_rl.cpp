#include "distirl/forward_rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace distirl {

void ExpertConfig::validate() const {
  if (episodes < 1) {
    throw std::invalid_argument("ExpertConfig: episodes must be >= 1");
  }
  if (!(step_size > 0.0)) {
    throw std::invalid_argument("ExpertConfig: step_size must be > 0");
  }
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 &&
        eps_end <= 1.0)) {
    throw std::invalid_argument("ExpertConfig: epsilon rates must lie in [0,1]");
  }
  if (horizon < 1) {
    throw std::invalid_argument("ExpertConfig: horizon must be >= 1");
  }
  if (n_quantiles < 1) {
    throw std::invalid_argument("ExpertConfig: n_quantiles must be >= 1");
  }
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("ExpertConfig: kappa must be > 0");
  }
  if (!(beta_greedy > 0.0)) {
    throw std::invalid_argument("ExpertConfig: beta_greedy must be > 0");
  }
}

ExpertResult train_expert(const TabularMdp& mdp, const TrueRewardSpec& spec,
                          const ExpertConfig& config) {
  config.validate();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  QuantileCritic critic(S, A, config.n_quantiles);
  Rng rng(config.seed);

  // DRM values are cached per (s,a) and refreshed only for the cell an
  // update touches.
  const std::vector<double> weights =
      distortion_weights(config.distortion, config.n_quantiles);
  std::vector<double> drm_cache(static_cast<std::size_t>(S) *
                                    static_cast<std::size_t>(A),
                                0.0);
  const auto refresh_cell = [&](int s, int a) {
    const auto atoms = critic.atoms(s, a);
    double acc = 0.0;
    for (int i = 0; i < config.n_quantiles; ++i) {
      acc += weights[static_cast<std::size_t>(i)] *
             atoms[static_cast<std::size_t>(i)];
    }
    drm_cache[static_cast<std::size_t>(s) * static_cast<std::size_t>(A) +
              static_cast<std::size_t>(a)] = acc;
  };
  const auto greedy_action = [&](int s) {
    int best = 0;
    double best_value =
        drm_cache[static_cast<std::size_t>(s) * static_cast<std::size_t>(A)];
    for (int a = 1; a < A; ++a) {
      const double v = drm_cache[static_cast<std::size_t>(s) *
                                     static_cast<std::size_t>(A) +
                                 static_cast<std::size_t>(a)];
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    return best;
  };

  // Epsilon anneals linearly over the first half of the episodes; the step
  // size holds flat over the same span and then decays linearly to a tenth,
  // so the slow-moving tail atoms travel early and settle late.
  const int anneal_span = std::max(1, config.episodes / 2);
  for (int episode = 0; episode < config.episodes; ++episode) {
    const double frac =
        std::min(1.0, static_cast<double>(episode) /
                          static_cast<double>(anneal_span));
    const double eps =
        config.eps_start + (config.eps_end - config.eps_start) * frac;
    const double late = std::max(
        0.0, static_cast<double>(episode - anneal_span) /
                 static_cast<double>(std::max(1, config.episodes - anneal_span)));
    const double step = config.step_size * (1.0 - 0.9 * late);
    int s = mdp.sample_initial(rng);
    for (int t = 0; t < config.horizon; ++t) {
      const int a = rng.uniform() < eps ? rng.below(A) : greedy_action(s);
      const double r = spec.at(s, a).sample(rng);
      const int s_next = mdp.sample_next(s, a, rng);
      const int a_star = greedy_action(s_next);
      qr_td_update(critic, {s, a, r, s_next, a_star}, mdp.gamma(),
                   config.kappa, step);
      refresh_cell(s, a);
      s = s_next;
    }
  }

  RiskPolicy policy = RiskPolicy::from_quantile_critic(
      critic, config.distortion, config.beta_greedy);
  return {std::move(critic), std::move(policy)};
}

RiskPolicy goal_directed_policy(const TabularMdp& mdp, int goal_state) {
  if (goal_state < 0 || goal_state >= mdp.n_states()) {
    throw std::invalid_argument("goal_directed_policy: goal out of range");
  }
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  // Discount below one even for gamma = 0 so arrival time still orders the
  // actions.
  const double gamma = std::max(mdp.gamma(), 0.5);
  std::vector<double> v(static_cast<std::size_t>(S), 0.0);
  std::vector<double> q(static_cast<std::size_t>(S) *
                        static_cast<std::size_t>(A));
  for (int sweep = 0; sweep < 4 * S + 64; ++sweep) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double acc = s == goal_state ? 1.0 : 0.0;
        const auto row = mdp.transition_row(s, a);
        for (int s2 = 0; s2 < S; ++s2) {
          const double p = row[static_cast<std::size_t>(s2)];
          if (p != 0.0) acc += gamma * p * v[static_cast<std::size_t>(s2)];
        }
        q[static_cast<std::size_t>(s * A + a)] = acc;
      }
    }
    for (int s = 0; s < S; ++s) {
      double best = q[static_cast<std::size_t>(s * A)];
      for (int a = 1; a < A; ++a) {
        best = std::max(best, q[static_cast<std::size_t>(s * A + a)]);
      }
      v[static_cast<std::size_t>(s)] = best;
    }
  }
  // One-hot argmax rows with a first-index tie break, so the policy is
  // deterministic even where actions tie (e.g. on the goal's self-loops).
  std::vector<double> one_hot(static_cast<std::size_t>(S) *
                                  static_cast<std::size_t>(A),
                              0.0);
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int a = 1; a < A; ++a) {
      if (q[static_cast<std::size_t>(s * A + a)] >
          q[static_cast<std::size_t>(s * A + best)]) {
        best = a;
      }
    }
    one_hot[static_cast<std::size_t>(s * A + best)] = 1.0;
  }
  return RiskPolicy::from_probabilities(S, A, one_hot);
}

DemoSet generate_commitment_demos(const TabularMdp& mdp,
                                  const TrueRewardSpec& spec,
                                  const QuantileCritic& expert_critic,
                                  const Distortion& distortion,
                                  std::span<const int> goal_states,
                                  double commit_beta, int n_traj, int horizon,
                                  Rng& rng) {
  if (goal_states.empty()) {
    throw std::invalid_argument("generate_commitment_demos: no goals");
  }
  if (!(commit_beta > 0.0)) {
    throw std::invalid_argument(
        "generate_commitment_demos: commit_beta must be > 0");
  }
  if (n_traj < 1 || horizon < 1) {
    throw std::invalid_argument(
        "generate_commitment_demos: n_traj and horizon must be >= 1");
  }

  // Expected arrival time at each goal from the start distribution, walked
  // under that goal's own policy (deterministic dynamics give the exact
  // step count; stochastic ones an estimate, which only shifts the
  // commitment temperature).
  std::vector<RiskPolicy> policies;
  std::vector<double> values;
  for (const int g : goal_states) {
    RiskPolicy policy = goal_directed_policy(mdp, g);
    Rng probe = rng.split(0x9e37);
    double arrival = 0.0;
    const int probes = 32;
    for (int rep = 0; rep < probes; ++rep) {
      int s = mdp.sample_initial(probe);
      int t = 0;
      while (s != g && t < 4 * mdp.n_states()) {
        s = mdp.sample_next(s, policy.act(s, probe), probe);
        ++t;
      }
      arrival += t;
    }
    arrival /= probes;
    double drm_at_goal = expert_critic.drm(g, 0, distortion);
    for (int a = 1; a < mdp.n_actions(); ++a) {
      drm_at_goal =
          std::max(drm_at_goal, expert_critic.drm(g, a, distortion));
    }
    values.push_back(std::pow(mdp.gamma(), arrival) * drm_at_goal);
    policies.push_back(std::move(policy));
  }

  double top = values[0];
  for (double v : values) top = std::max(top, v);
  std::vector<double> probs(values.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    probs[i] = std::exp((values[i] - top) / commit_beta);
    norm += probs[i];
  }
  for (double& p : probs) p /= norm;

  DemoSet demos;
  demos.n_states = mdp.n_states();
  demos.n_actions = mdp.n_actions();
  demos.trajectories.reserve(static_cast<std::size_t>(n_traj));
  for (int episode = 0; episode < n_traj; ++episode) {
    Rng episode_rng = rng.split(static_cast<std::uint64_t>(episode) + 1);
    const int committed = episode_rng.categorical(probs);
    demos.trajectories.push_back(
        rollout(mdp, policies[static_cast<std::size_t>(committed)].matrix(),
                spec, horizon, episode_rng));
  }
  demos.validate();
  return demos;
}

DemoSet generate_demos(const TabularMdp& mdp, const TrueRewardSpec& spec,
                       const RiskPolicy& policy, int n_traj, int horizon,
                       Rng& rng) {
  if (n_traj < 1) {
    throw std::invalid_argument("generate_demos: n_traj must be >= 1");
  }
  if (horizon < 1) {
    throw std::invalid_argument("generate_demos: horizon must be >= 1");
  }
  DemoSet demos;
  demos.n_states = mdp.n_states();
  demos.n_actions = mdp.n_actions();
  demos.trajectories.reserve(static_cast<std::size_t>(n_traj));
  for (int episode = 0; episode < n_traj; ++episode) {
    Rng episode_rng = rng.split(static_cast<std::uint64_t>(episode));
    demos.trajectories.push_back(
        rollout(mdp, policy.matrix(), spec, horizon, episode_rng));
  }
  demos.validate();
  return demos;
}

}  // namespace distirl
