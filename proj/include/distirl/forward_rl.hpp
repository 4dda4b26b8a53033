#pragma once

#include <cstdint>
#include <utility>

#include "distirl/critic.hpp"
#include "distirl/mdp.hpp"
#include "distirl/policy.hpp"
#include "distirl/quantile.hpp"
#include "distirl/rng.hpp"

namespace distirl {

struct ExpertConfig {
  Distortion distortion = Distortion::cvar(0.05);
  int episodes = 20000;
  double step_size = 0.1;
  double eps_start = 1.0;   // epsilon-greedy, annealed linearly over the
  double eps_end = 0.05;    // first half of the episodes
  int horizon = 40;
  int n_quantiles = 200;
  double kappa = 1.0;
  double beta_greedy = 1e-3;  // temperature of the returned policy
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExpertResult {
  QuantileCritic critic;
  RiskPolicy policy;
};

/// Online tabular distributional Q-learning on the true stochastic reward:
/// behavior is epsilon-greedy over the critic's distortion risk measure and
/// targets use the risk-greedy next action. Returns the critic and the
/// near-greedy softmax policy.
ExpertResult train_expert(const TabularMdp& mdp, const TrueRewardSpec& spec,
                          const ExpertConfig& config);

/// Roll out n_traj demonstrations under the given policy; true rewards are
/// recorded in each trajectory's signals (for evaluation only, never shown
/// to the IRL learner). Episode i uses its own rng stream so results are
/// reproducible per (seed, episode).
DemoSet generate_demos(const TabularMdp& mdp, const TrueRewardSpec& spec,
                       const RiskPolicy& policy, int n_traj, int horizon,
                       Rng& rng);

/// Fastest-arrival policy for one target state: value iteration on the
/// indicator reward of being at the target.
RiskPolicy goal_directed_policy(const TabularMdp& mdp, int goal_state);

/// Demonstrations from a port-committing agent: each episode commits to one
/// goal with probability softmax(v_g / commit_beta) and then follows that
/// goal's fastest-arrival policy. The commitment value v_g is the expert
/// critic's distortion risk measure of the goal's absorbing return,
/// discounted by the arrival time from the start state, so a risk-averse
/// distortion concentrates episodes on the reliable goal.
DemoSet generate_commitment_demos(const TabularMdp& mdp,
                                  const TrueRewardSpec& spec,
                                  const QuantileCritic& expert_critic,
                                  const Distortion& distortion,
                                  std::span<const int> goal_states,
                                  double commit_beta, int n_traj, int horizon,
                                  Rng& rng);

}  // namespace distirl
