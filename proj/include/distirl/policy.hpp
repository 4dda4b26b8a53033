#pragma once

#include <span>
#include <string>
#include <vector>

#include "distirl/critic.hpp"
#include "distirl/quantile.hpp"
#include "distirl/rng.hpp"

namespace distirl {

/// Softmax policy over the critic's distortion risk measure:
/// pi(a|s) = exp(M_xi(Z(s,a)) / beta) / Z_s, the closed-form maximizer of
/// the entropy-regularized risk objective at tabular scale.
class RiskPolicy {
 public:
  RiskPolicy(int n_states, int n_actions);  // uniform rows

  static RiskPolicy from_quantile_critic(const QuantileCritic& critic,
                                         const Distortion& d, double beta);
  static RiskPolicy from_mean_critic(const MeanCritic& critic, double beta);

  /// Rows proportional to exp(score(s,a) / beta), with max subtraction.
  static RiskPolicy from_scores(int n_states, int n_actions,
                                std::span<const double> scores, double beta);

  /// Adopt explicit probability rows (validated).
  static RiskPolicy from_probabilities(int n_states, int n_actions,
                                       std::vector<double> probs);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  double prob(int s, int a) const;
  std::span<const double> row(int s) const;
  std::span<const double> matrix() const { return probs_; }

  double entropy(int s) const;
  double mean_entropy() const;

  int act(int s, Rng& rng) const;

  void save(const std::string& path) const;
  static RiskPolicy load(const std::string& path);

 private:
  int n_states_;
  int n_actions_;
  std::vector<double> probs_;
};

inline RiskPolicy policy_from_critic(const QuantileCritic& critic,
                                     const Distortion& d, double beta) {
  return RiskPolicy::from_quantile_critic(critic, d, beta);
}

}  // namespace distirl
