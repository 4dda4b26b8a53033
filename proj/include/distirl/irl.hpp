#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distirl/critic.hpp"
#include "distirl/mdp.hpp"
#include "distirl/policy.hpp"
#include "distirl/quantile.hpp"
#include "distirl/reward_model.hpp"
#include "distirl/rng.hpp"

namespace distirl {

enum class CriticKind { Quantile, Mean };
enum class RewardLossKind { Fsd, Mean };

std::string critic_kind_name(CriticKind kind);
CriticKind parse_critic_kind(const std::string& text);
std::string reward_loss_kind_name(RewardLossKind kind);
RewardLossKind parse_reward_loss_kind(const std::string& text);

struct IrlConfig {
  RewardKind reward_kind = RewardKind::Gaussian;
  CriticKind critic_kind = CriticKind::Quantile;
  RewardLossKind reward_loss = RewardLossKind::Fsd;
  Distortion distortion = Distortion::cvar(0.05);
  double beta = 0.1;            // entropy temperature
  double eta_critic = 3e-4;
  double eta_reward = 3e-4;
  double kl_weight = 0.01;
  int batch_size = 512;
  int iterations = 5000;
  int return_samples = 64;      // M return draws per side
  int horizon = 40;
  int n_quantiles = 200;
  double kappa = 1.0;
  double gamma = 0.79;
  double r_min = 0.0;
  double r_max = 2.0;
  int critic_steps_per_iter = 5;
  int kl_mc_samples = 8;
  double init_sigma = 0.1;
  double off_support_penalty = 0.15;  // pessimism for never-updated actions
  double state_coupling = 0.0;        // per-state shrinkage of reward params
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainRecord {
  int iteration = 0;
  double fsd_violation = 0.0;     // data term of the reward loss
  double kl_term = 0.0;
  double critic_loss = 0.0;
  double policy_entropy = 0.0;
  double drm_policy_return = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;

  void save_csv(const std::string& path) const;
};

/// One reward draw along a return path: cell, discount weight gamma^t, and
/// the reparameterization noise that produced it.
struct ReturnStep {
  int s = 0;
  int a = 0;
  double coeff = 1.0;
  double eps0 = 0.0;
  double eps1 = 0.0;
};

struct ReturnPath {
  std::vector<ReturnStep> steps;
};

/// A batch of return paths; values are recomputed against a reward model so
/// the same noise can be re-evaluated after parameter changes.
struct ReturnBatch {
  std::vector<ReturnPath> paths;

  int size() const { return static_cast<int>(paths.size()); }
};

double path_value(const ReturnPath& path, const RewardModel& model);
std::vector<double> batch_values(const ReturnBatch& batch,
                                 const RewardModel& model);

/// Draw M offline return samples per side from expert trajectories: for each
/// sample one trajectory is chosen and truncated at the horizon; the expert
/// side replays its recorded actions while the policy side samples fresh
/// actions at the same states. Rewards on both sides come from the reward
/// model via recorded noise.
std::pair<ReturnBatch, ReturnBatch> sample_returns_offline(
    const DemoSet& demos, const RiskPolicy& policy, const RewardModel& model,
    double gamma, int horizon, int n_samples, Rng& rng);

/// KL regularizer batch: the (s,a) cells of the iteration's expert
/// mini-batch (with multiplicity) plus per-entry Monte-Carlo noise for the
/// skew-normal case.
struct KlBatch {
  std::vector<int> cells;  // s * n_actions + a
  int n_mc = 0;
  std::vector<std::pair<double, double>> noise;  // cells.size() * n_mc
};

KlBatch make_kl_batch(std::span<const std::pair<int, int>> pairs,
                      int n_actions, int n_mc, RewardKind kind, Rng& rng);

struct RewardLossResult {
  double loss = 0.0;
  double data_term = 0.0;
  double kl_term = 0.0;
  std::vector<RewardGrad> grads;  // dense, S * A
};

/// FSD reward loss: (1/M) sum_i [sort(Z_pi)_i - sort(Z_E)_i]_+ plus
/// kl_weight times the mean KL over the batch cells. Gradients flow through
/// the sample occupying each rank; ties are broken by sample index and the
/// positive-part derivative at zero is taken as zero.
RewardLossResult reward_loss_fsd(const ReturnBatch& z_pi,
                                 const ReturnBatch& z_e,
                                 const RewardModel& model, double kl_weight,
                                 const KlBatch& kl_batch);

/// Mean-matching ablation loss: mean(Z_pi) - mean(Z_E) plus the same KL term.
RewardLossResult reward_loss_mean(const ReturnBatch& z_pi,
                                  const ReturnBatch& z_e,
                                  const RewardModel& model, double kl_weight,
                                  const KlBatch& kl_batch);

struct TrainResult {
  RewardModel model;
  RiskPolicy policy;
  QuantileCritic critic;
  MeanCritic mean_critic;
  TrainLog log;
};

/// Full training loop: per iteration an expert mini-batch is drawn, offline
/// returns are sampled, the critic takes critic_steps_per_iter passes, the
/// policy is rebuilt from the critic's risk measure, and the reward model
/// takes one loss-gradient step. Deterministic given (config, demos, seed).
/// Throws with the iteration and term named if any loss turns NaN.
TrainResult train(int n_states, int n_actions, const DemoSet& demos,
                  const IrlConfig& config);

double pearson(std::span<const double> x, std::span<const double> y);

struct PairEval {
  int s = 0;
  int a = 0;
  int visits = 0;
  double learned_mean = 0.0;
  double learned_sd = 0.0;
  double ref_mean = 0.0;
  double ref_sd = 0.0;
  double w1 = 0.0;
};

struct EvalReport {
  std::vector<PairEval> pairs;  // demo-covered (s,a) cells
  double pearson_mean = 0.0;
  double mean_w1 = 0.0;
  double fsd_policy_over_expert = 0.0;
  double policy_return_mean = 0.0;
  double policy_return_cvar = 0.0;
  double expert_return_mean = 0.0;
  bool has_expert_returns = false;
  bool restricted = false;  // no demo coverage overlap
};

struct EvalSettings {
  int eval_rollouts = 10000;
  int horizon = 40;
  int n_atoms = 200;
  int ref_samples = 4096;
  double cvar_alpha = 0.05;
  std::uint64_t seed = 0;
};

/// Compare the learned reward model and policy against ground truth: per
/// covered (s,a) moments and W-1, Pearson correlation of means, the FSD
/// violation of the policy's on-environment return against the expert's
/// recorded returns, and the policy's return mean / CVaR under the true
/// reward. Reference moments come from true_spec when given, otherwise from
/// recorded demo signals.
EvalReport evaluate(const RewardModel& model, const RiskPolicy& policy,
                    const TabularMdp& mdp, const TrueRewardSpec* true_spec,
                    const DemoSet& demos, const EvalSettings& settings);

}  // namespace distirl
