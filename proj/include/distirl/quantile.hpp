#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace distirl {

/// A distribution represented by N equally weighted support atoms, kept in
/// non-decreasing order. Atom i (0-based) stands for the quantile at the
/// midpoint fraction (2i+1)/(2N).
class QuantileDistribution {
 public:
  /// Takes ownership of the atoms and sorts them.
  explicit QuantileDistribution(std::vector<double> atoms);

  int size() const { return static_cast<int>(atoms_.size()); }
  double atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  std::span<const double> atoms() const { return atoms_; }

  double mean() const;
  double variance() const;  // population variance; 0 when N < 2

  /// Step CDF evaluated at z: fraction of atoms <= z.
  double cdf(double z) const;

  /// Shift every atom by c.
  QuantileDistribution shifted(double c) const;

 private:
  std::vector<double> atoms_;
};

/// Midpoint quantile fraction for atom i of N (0-based).
inline double midpoint_fraction(int i, int n) {
  return (2.0 * i + 1.0) / (2.0 * n);
}

/// Empirical quantile distribution of a sample set: atom i is the order
/// statistic at fraction (2i+1)/(2N) by nearest rank. When the sample count
/// equals N the atoms are exactly the sorted samples.
QuantileDistribution empirical_quantiles(std::span<const double> samples,
                                         int n_atoms);

/// Area of [F_X(z) - F_Y(z)]_+ integrated exactly over the union of atoms.
/// Zero iff X first-order stochastically dominates Y at atom resolution.
double fsd_violation_cdf(const QuantileDistribution& x,
                         const QuantileDistribution& y);

/// Quantile-coordinate violation area (1/N) sum_i [x_i - y_i]_+ over
/// rank-aligned atoms; distributions with different atom counts are
/// resampled to the larger count first. Equals fsd_violation_cdf with the
/// arguments exchanged.
double fsd_violation_quantile(const QuantileDistribution& x,
                              const QuantileDistribution& y);

/// Rank-aligned Wasserstein-1 distance (1/N) sum_i |x_i - y_i|.
double wasserstein1(const QuantileDistribution& x,
                    const QuantileDistribution& y);

/// Distortion selecting how quantiles are reweighted by a risk measure.
struct Distortion {
  enum class Kind { Neutral, Cvar, Wang };

  Kind kind = Kind::Neutral;
  double param = 0.0;  // alpha for CVaR, lambda for Wang

  static Distortion neutral() { return {Kind::Neutral, 0.0}; }
  static Distortion cvar(double alpha);
  static Distortion wang(double lambda) { return {Kind::Wang, lambda}; }

  /// Weight-generating CDF on [0,1]: v for neutral, min(v/alpha, 1) for
  /// CVaR, Phi(Phi^{-1}(v) + lambda) for Wang.
  double weight_cdf(double v) const;

  std::string to_string() const;
  static Distortion parse(const std::string& text);
};

/// Per-atom weights induced by a distortion for an N-atom distribution;
/// non-negative and summing to one.
std::vector<double> distortion_weights(const Distortion& d, int n_atoms);

/// Distortion risk measure: the distortion-weighted average of atoms.
/// CVaR(alpha) averages the worst (lowest) alpha-fraction; CVaR(1) and
/// Wang(0) reduce to the mean.
double drm(const QuantileDistribution& x, const Distortion& d);

/// Quantile Huber loss |tau - 1{delta<0}| * H_kappa(delta).
double quantile_huber(double delta, double tau, double kappa);

/// Derivative of quantile_huber with respect to delta.
double quantile_huber_grad(double delta, double tau, double kappa);

/// (value, cumulative probability) rows describing the step CDF of x,
/// one row per atom.
std::vector<std::pair<double, double>> cdf_table(const QuantileDistribution& x);

}  // namespace distirl
