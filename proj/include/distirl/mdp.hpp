#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distirl/rng.hpp"

namespace distirl {

/// Ground-truth reward law for one (state, action) pair.
struct RewardSpec {
  enum class Kind { Deterministic, Gaussian, SkewNormal, BernoulliPenalty };

  Kind kind = Kind::Deterministic;
  double p0 = 0.0;  // value | mu | loc | base
  double p1 = 0.0;  // - | sigma | scale | penalty probability
  double p2 = 0.0;  // - | - | alpha | penalty magnitude

  static RewardSpec deterministic(double value);
  static RewardSpec gaussian(double mu, double sigma);
  static RewardSpec skew_normal(double loc, double scale, double alpha);
  static RewardSpec bernoulli_penalty(double base, double p, double penalty);

  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;

  std::string to_string() const;
  static RewardSpec parse(const std::string& text);
};

/// Per-(s,a) table of ground-truth reward laws.
class TrueRewardSpec {
 public:
  TrueRewardSpec(int n_states, int n_actions,
                 RewardSpec fill = RewardSpec::deterministic(0.0));

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  const RewardSpec& at(int s, int a) const;
  void set(int s, int a, RewardSpec spec);

 private:
  int n_states_;
  int n_actions_;
  std::vector<RewardSpec> specs_;
};

double sample_true_reward(const TrueRewardSpec& spec, int s, int a, Rng& rng);

/// Finite MDP with validated transition tensor and initial distribution.
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions, std::vector<double> transition,
             double gamma, std::vector<double> init_dist);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }

  double transition(int s, int a, int s_next) const;
  std::span<const double> transition_row(int s, int a) const;
  std::span<const double> init_dist() const { return init_dist_; }

  int sample_next(int s, int a, Rng& rng) const;
  int sample_initial(Rng& rng) const;

 private:
  int n_states_;
  int n_actions_;
  std::vector<double> transition_;  // (s * A + a) * S + s_next
  double gamma_;
  std::vector<double> init_dist_;
};

struct Trajectory {
  std::vector<std::pair<int, int>> steps;  // (state, action)
  std::vector<double> signals;             // empty, or one value per step

  int length() const { return static_cast<int>(steps.size()); }
  bool has_signals() const { return !signals.empty(); }
};

struct DemoSet {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::string> metadata;

  void validate() const;  // index ranges, non-empty trajectories
};

struct GridCell {
  int row = 0;
  int col = 0;
};

struct GridGoal {
  GridCell cell;
  RewardSpec reward;
};

struct GridworldEnv {
  TabularMdp mdp;
  TrueRewardSpec rewards;
  int width = 0;
  int height = 0;
};

/// Grid navigation MDP: four actions (up, down, left, right), moves succeed
/// with probability 1 - slip_prob and otherwise go uniformly to one of the
/// other three directions; off-grid moves stay in place; goal cells are
/// absorbing self-loops. By default a goal's reward spec sits on the goal
/// cell itself and is re-emitted every absorbed step; with
/// goal_reward_on_entry the spec instead sits on the (state, action) pairs
/// whose intended move enters the goal, and the self-loop pays zero.
GridworldEnv build_gridworld(int width, int height, GridCell start,
                             const std::vector<GridGoal>& goals,
                             double step_cost, double slip_prob,
                             double gamma = 0.79,
                             bool goal_reward_on_entry = false);

inline int grid_state(int width, GridCell cell) {
  return cell.row * width + cell.col;
}

/// Discounted state-action occupancy d(s,a) = (1-gamma) sum_t gamma^t
/// Pr(s_t = s) pi(a|s), computed by geometric iteration until the remaining
/// tail mass drops below 1e-10. Output sums to one. The policy is a
/// row-major S x A stochastic matrix.
std::vector<double> occupancy_measure(const TabularMdp& mdp,
                                      std::span<const double> policy);

/// Expected discounted return from the initial distribution under the given
/// policy and per-(s,a) mean rewards: sum_{s,a} d(s,a) rbar(s,a) / (1-gamma).
double expected_return(const TabularMdp& mdp, std::span<const double> policy,
                       std::span<const double> mean_rewards);

/// Sample a length-horizon trajectory; true rewards are recorded in
/// Trajectory::signals.
Trajectory rollout(const TabularMdp& mdp, std::span<const double> policy,
                   const TrueRewardSpec& spec, int horizon, Rng& rng);

/// Discounted return of a recorded trajectory's signals.
double discounted_signal_return(const Trajectory& traj, double gamma,
                                int horizon);

void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);

/// Environment checkpoint: header plus nonzero init/transition entries.
void save_mdp(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp(const std::string& path);

/// Reward-spec table as one `s a spec` row per pair.
void save_rewards(const TrueRewardSpec& rewards, const std::string& path);
TrueRewardSpec load_rewards(const std::string& path);

}  // namespace distirl
