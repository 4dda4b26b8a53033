#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distirl/rng.hpp"

namespace distirl {

enum class RewardKind { Deterministic, Gaussian, SkewNormal };

std::string reward_kind_name(RewardKind kind);
RewardKind parse_reward_kind(const std::string& text);

/// Pathwise derivative of one reward draw with respect to the unconstrained
/// parameters of its (s,a) cell.
struct RewardGrad {
  double d_raw_loc = 0.0;
  double d_raw_scale = 0.0;
  double d_raw_alpha = 0.0;
};

/// Location squashed into (r_min, r_max) by a scaled tanh.
double squash_location(double raw_loc, double r_min, double r_max);

/// Learnable per-(s,a) reward distribution q(r|s,a). The location is the
/// squashed raw_loc, the scale is softplus(raw_scale) with a small floor,
/// and the skew parameter is raw_alpha unchanged. Sampling is
/// reparameterized so gradients flow through the draws.
class RewardModel {
 public:
  RewardModel(RewardKind kind, int n_states, int n_actions, double r_min,
              double r_max, double init_sigma = 0.1);

  RewardKind kind() const { return kind_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  int n_pairs() const { return n_states_ * n_actions_; }

  double location(int s, int a) const;
  double scale(int s, int a) const;
  double alpha(int s, int a) const;

  double raw_loc(int s, int a) const { return raw_loc_[index(s, a)]; }
  double raw_scale(int s, int a) const { return raw_scale_[index(s, a)]; }
  double raw_alpha(int s, int a) const { return raw_alpha_[index(s, a)]; }

  void set_raw(int s, int a, double loc, double scale, double alpha);

  /// Draw a reward from cell (s,a) with the supplied standard-normal noise
  /// pair; optionally reports the pathwise gradient of the draw.
  double sample(int s, int a, double eps0, double eps1,
                RewardGrad* grad = nullptr) const;

  /// Analytic (mean, variance) of the cell's distribution.
  std::pair<double, double> analytic_moments(int s, int a) const;

  /// KL(q(.|s,a) || N(0,1)). Closed form for Gaussian, mu^2/2 for
  /// Deterministic, and a fixed-noise Monte-Carlo estimate for SkewNormal.
  /// The noise span supplies the SkewNormal draws (ignored otherwise); the
  /// optional gradient is the total derivative of the estimator.
  double kl_estimate(int s, int a,
                     std::span<const std::pair<double, double>> noise,
                     RewardGrad* grad = nullptr) const;

  /// Convenience wrapper drawing n_mc noise pairs from the rng.
  double kl_to_prior(int s, int a, int n_mc, Rng& rng) const;

  /// One gradient-descent step on the cell's unconstrained parameters.
  void apply_gradient(int s, int a, const RewardGrad& grad, double step);

  bool all_finite() const;

  void save(const std::string& path) const;
  static RewardModel load(const std::string& path);

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) +
           static_cast<std::size_t>(a);
  }

  RewardKind kind_;
  int n_states_;
  int n_actions_;
  double r_min_;
  double r_max_;
  std::vector<double> raw_loc_;
  std::vector<double> raw_scale_;
  std::vector<double> raw_alpha_;
};

}  // namespace distirl
