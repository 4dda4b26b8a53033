#include "distirl/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "distirl/normal.hpp"

namespace distirl {

QuantileDistribution::QuantileDistribution(std::vector<double> atoms)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw std::invalid_argument("QuantileDistribution: needs at least one atom");
  }
  std::sort(atoms_.begin(), atoms_.end());
}

double QuantileDistribution::mean() const {
  double acc = 0.0;
  for (double v : atoms_) acc += v;
  return acc / static_cast<double>(atoms_.size());
}

double QuantileDistribution::variance() const {
  if (atoms_.size() < 2) return 0.0;
  const double m = mean();
  double acc = 0.0;
  for (double v : atoms_) acc += (v - m) * (v - m);
  return acc / static_cast<double>(atoms_.size());
}

double QuantileDistribution::cdf(double z) const {
  const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), z);
  return static_cast<double>(it - atoms_.begin()) /
         static_cast<double>(atoms_.size());
}

QuantileDistribution QuantileDistribution::shifted(double c) const {
  std::vector<double> out(atoms_);
  for (double& v : out) v += c;
  return QuantileDistribution(std::move(out));
}

QuantileDistribution empirical_quantiles(std::span<const double> samples,
                                         int n_atoms) {
  if (samples.empty()) {
    throw std::invalid_argument("empirical_quantiles: empty sample set");
  }
  if (n_atoms < 1) {
    throw std::invalid_argument("empirical_quantiles: n_atoms must be >= 1");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<double> atoms(static_cast<std::size_t>(n_atoms));
  for (int i = 0; i < n_atoms; ++i) {
    const double frac = midpoint_fraction(i, n_atoms);
    auto idx = static_cast<std::size_t>(frac * n);
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    atoms[static_cast<std::size_t>(i)] = sorted[idx];
  }
  return QuantileDistribution(std::move(atoms));
}

double fsd_violation_cdf(const QuantileDistribution& x,
                         const QuantileDistribution& y) {
  const auto ax = x.atoms();
  const auto ay = y.atoms();
  const double nx = static_cast<double>(ax.size());
  const double ny = static_cast<double>(ay.size());
  // Walk the merged atom positions; both step CDFs are constant between
  // consecutive distinct positions.
  std::size_t ix = 0, iy = 0;
  double area = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  while (ix < ax.size() || iy < ay.size()) {
    double z;
    if (iy >= ay.size() || (ix < ax.size() && ax[ix] <= ay[iy])) {
      z = ax[ix];
    } else {
      z = ay[iy];
    }
    if (have_prev && z > prev) {
      const double diff =
          static_cast<double>(ix) / nx - static_cast<double>(iy) / ny;
      if (diff > 0.0) area += diff * (z - prev);
    }
    while (ix < ax.size() && ax[ix] == z) ++ix;
    while (iy < ay.size() && ay[iy] == z) ++iy;
    prev = z;
    have_prev = true;
  }
  return area;
}

namespace {

std::vector<double> aligned_atoms(const QuantileDistribution& d, int n) {
  if (d.size() == n) {
    return std::vector<double>(d.atoms().begin(), d.atoms().end());
  }
  const QuantileDistribution r = empirical_quantiles(d.atoms(), n);
  return std::vector<double>(r.atoms().begin(), r.atoms().end());
}

}  // namespace

double fsd_violation_quantile(const QuantileDistribution& x,
                              const QuantileDistribution& y) {
  const int n = std::max(x.size(), y.size());
  const std::vector<double> vx = aligned_atoms(x, n);
  const std::vector<double> vy = aligned_atoms(y, n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double diff = vx[static_cast<std::size_t>(i)] -
                        vy[static_cast<std::size_t>(i)];
    if (diff > 0.0) acc += diff;
  }
  return acc / static_cast<double>(n);
}

double wasserstein1(const QuantileDistribution& x,
                    const QuantileDistribution& y) {
  const int n = std::max(x.size(), y.size());
  const std::vector<double> vx = aligned_atoms(x, n);
  const std::vector<double> vy = aligned_atoms(y, n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += std::abs(vx[static_cast<std::size_t>(i)] -
                    vy[static_cast<std::size_t>(i)]);
  }
  return acc / static_cast<double>(n);
}

Distortion Distortion::cvar(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("Distortion::cvar: alpha must lie in (0, 1]");
  }
  return {Kind::Cvar, alpha};
}

double Distortion::weight_cdf(double v) const {
  switch (kind) {
    case Kind::Neutral:
      return v;
    case Kind::Cvar:
      return std::min(v / param, 1.0);
    case Kind::Wang:
      if (v <= 0.0) return 0.0;
      if (v >= 1.0) return 1.0;
      return norm_cdf(norm_inv_cdf(v) + param);
  }
  return v;
}

std::string Distortion::to_string() const {
  char buf[64];
  switch (kind) {
    case Kind::Neutral:
      return "neutral";
    case Kind::Cvar:
      std::snprintf(buf, sizeof(buf), "cvar(%.17g)", param);
      return buf;
    case Kind::Wang:
      std::snprintf(buf, sizeof(buf), "wang(%.17g)", param);
      return buf;
  }
  return "neutral";
}

Distortion Distortion::parse(const std::string& text) {
  if (text == "neutral") return neutral();
  double value = 0.0;
  if (std::sscanf(text.c_str(), "cvar(%lf)", &value) == 1) return cvar(value);
  if (std::sscanf(text.c_str(), "wang(%lf)", &value) == 1) return wang(value);
  throw std::invalid_argument("Distortion::parse: unrecognized distortion '" +
                              text + "'");
}

std::vector<double> distortion_weights(const Distortion& d, int n_atoms) {
  if (n_atoms < 1) {
    throw std::invalid_argument("distortion_weights: n_atoms must be >= 1");
  }
  std::vector<double> w(static_cast<std::size_t>(n_atoms));
  double prev = 0.0;
  for (int i = 0; i < n_atoms; ++i) {
    const double cur =
        (i + 1 == n_atoms)
            ? 1.0
            : d.weight_cdf(static_cast<double>(i + 1) /
                           static_cast<double>(n_atoms));
    w[static_cast<std::size_t>(i)] = cur - prev;
    prev = cur;
  }
  return w;
}

double drm(const QuantileDistribution& x, const Distortion& d) {
  const std::vector<double> w = distortion_weights(d, x.size());
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    acc += w[static_cast<std::size_t>(i)] * x.atom(i);
  }
  return acc;
}

double quantile_huber(double delta, double tau, double kappa) {
  const double weight = std::abs(tau - (delta < 0.0 ? 1.0 : 0.0));
  const double ad = std::abs(delta);
  const double huber =
      ad <= kappa ? 0.5 * delta * delta : kappa * (ad - 0.5 * kappa);
  return weight * huber;
}

double quantile_huber_grad(double delta, double tau, double kappa) {
  const double weight = std::abs(tau - (delta < 0.0 ? 1.0 : 0.0));
  const double clipped = std::clamp(delta, -kappa, kappa);
  return weight * clipped;
}

std::vector<std::pair<double, double>> cdf_table(
    const QuantileDistribution& x) {
  std::vector<std::pair<double, double>> rows;
  rows.reserve(static_cast<std::size_t>(x.size()));
  const double n = static_cast<double>(x.size());
  for (int i = 0; i < x.size(); ++i) {
    rows.emplace_back(x.atom(i), static_cast<double>(i + 1) / n);
  }
  return rows;
}

}  // namespace distirl
