#pragma once

#include <span>
#include <string>
#include <vector>

#include "distirl/quantile.hpp"

namespace distirl {

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  int a_next = 0;
};

/// Distributional critic: N quantile atoms per (s,a), atom i approximating
/// the return quantile at midpoint fraction (2i+1)/(2N). Atoms are re-sorted
/// after every update pass since quantile-regression steps do not preserve
/// monotonicity.
class QuantileCritic {
 public:
  QuantileCritic(int n_states, int n_actions, int n_atoms,
                 double init_value = 0.0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int n_atoms() const { return n_atoms_; }

  std::span<const double> atoms(int s, int a) const;
  std::span<double> atoms(int s, int a);

  QuantileDistribution distribution(int s, int a) const;
  double mean(int s, int a) const;

  /// M_xi(Z(s,a)) for the given distortion (atoms kept sorted).
  double drm(int s, int a, const Distortion& d) const;

  bool all_finite() const;

  void save(const std::string& path) const;
  static QuantileCritic load(const std::string& path);

 private:
  friend double qr_td_update_batch(QuantileCritic&,
                                   std::span<const Transition>, double, double,
                                   double);

  int n_states_;
  int n_actions_;
  int n_atoms_;
  std::vector<double> theta_;  // (s * A + a) * N + i
};

/// One quantile-regression TD step on a single transition: targets
/// r + gamma * theta_j(s',a') are held fixed, atoms of (s,a) move down the
/// gradient of (1/N) sum_ij rho_tau_i^kappa(delta_ij), then get re-sorted.
/// Returns the pre-step loss value.
double qr_td_update(QuantileCritic& critic, const Transition& transition,
                    double gamma, double kappa, double step_size);

/// Batched variant: gradients for all transitions are accumulated against
/// the pre-pass table (order-independent sum), applied once, and the touched
/// cells re-sorted. Returns the mean per-transition loss.
double qr_td_update_batch(QuantileCritic& critic,
                          std::span<const Transition> transitions,
                          double gamma, double kappa, double step_size);

/// Scalar expected-value critic used by the TD ablation.
class MeanCritic {
 public:
  MeanCritic(int n_states, int n_actions, double init_value = 0.0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  double value(int s, int a) const { return q_[index(s, a)]; }
  void set_value(int s, int a, double v) { q_[index(s, a)] = v; }

  bool all_finite() const;

  void save(const std::string& path) const;

 private:
  friend double mean_td_update(MeanCritic&, const Transition&, double, double);
  friend double mean_td_update_batch(MeanCritic&, std::span<const Transition>,
                                     double, double);

  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) +
           static_cast<std::size_t>(a);
  }

  int n_states_;
  int n_actions_;
  std::vector<double> q_;
};

/// SARSA-style expected-value TD step; returns the pre-step squared TD error.
double mean_td_update(MeanCritic& critic, const Transition& transition,
                      double gamma, double step_size);

/// Batched variant with gradients against the pre-pass table.
double mean_td_update_batch(MeanCritic& critic,
                            std::span<const Transition> transitions,
                            double gamma, double step_size);

}  // namespace distirl
