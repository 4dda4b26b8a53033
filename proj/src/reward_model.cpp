#include "distirl/reward_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "distirl/normal.hpp"

namespace distirl {

namespace {

constexpr double kScaleFloor = 1e-4;
constexpr double kLog2 = 0.69314718055994530941723212145818;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

double softplus_inverse(double y) {
  // log(exp(y) - 1), stable for small and large y.
  return y > 20.0 ? y : std::log(std::expm1(y));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string reward_kind_name(RewardKind kind) {
  switch (kind) {
    case RewardKind::Deterministic:
      return "deterministic";
    case RewardKind::Gaussian:
      return "gaussian";
    case RewardKind::SkewNormal:
      return "skewnormal";
  }
  return "gaussian";
}

RewardKind parse_reward_kind(const std::string& text) {
  if (text == "deterministic") return RewardKind::Deterministic;
  if (text == "gaussian") return RewardKind::Gaussian;
  if (text == "skewnormal") return RewardKind::SkewNormal;
  throw std::invalid_argument("parse_reward_kind: unrecognized kind '" + text +
                              "'");
}

double squash_location(double raw_loc, double r_min, double r_max) {
  if (!(r_min < r_max)) {
    throw std::invalid_argument("squash_location: need r_min < r_max");
  }
  return r_min + (r_max - r_min) * 0.5 * (std::tanh(raw_loc) + 1.0);
}

RewardModel::RewardModel(RewardKind kind, int n_states, int n_actions,
                         double r_min, double r_max, double init_sigma)
    : kind_(kind),
      n_states_(n_states),
      n_actions_(n_actions),
      r_min_(r_min),
      r_max_(r_max) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("RewardModel: shape must be positive");
  }
  if (!(r_min < r_max)) {
    throw std::invalid_argument("RewardModel: need r_min < r_max");
  }
  if (!(init_sigma > kScaleFloor)) {
    throw std::invalid_argument("RewardModel: init_sigma too small");
  }
  const auto n = static_cast<std::size_t>(n_states) *
                 static_cast<std::size_t>(n_actions);
  raw_loc_.assign(n, 0.0);
  raw_scale_.assign(n, softplus_inverse(init_sigma - kScaleFloor));
  raw_alpha_.assign(n, 0.0);
}

double RewardModel::location(int s, int a) const {
  return squash_location(raw_loc_[index(s, a)], r_min_, r_max_);
}

double RewardModel::scale(int s, int a) const {
  return kScaleFloor + softplus(raw_scale_[index(s, a)]);
}

double RewardModel::alpha(int s, int a) const {
  return raw_alpha_[index(s, a)];
}

void RewardModel::set_raw(int s, int a, double loc, double scale,
                          double alpha) {
  raw_loc_[index(s, a)] = loc;
  raw_scale_[index(s, a)] = scale;
  raw_alpha_[index(s, a)] = alpha;
}

double RewardModel::sample(int s, int a, double eps0, double eps1,
                           RewardGrad* grad) const {
  const std::size_t idx = index(s, a);
  const double th = std::tanh(raw_loc_[idx]);
  const double mu = r_min_ + (r_max_ - r_min_) * 0.5 * (th + 1.0);
  const double dmu = (r_max_ - r_min_) * 0.5 * (1.0 - th * th);

  switch (kind_) {
    case RewardKind::Deterministic: {
      if (grad) *grad = {dmu, 0.0, 0.0};
      return mu;
    }
    case RewardKind::Gaussian: {
      const double sig = kScaleFloor + softplus(raw_scale_[idx]);
      if (grad) *grad = {dmu, eps1 * sigmoid(raw_scale_[idx]), 0.0};
      return mu + sig * eps1;
    }
    case RewardKind::SkewNormal: {
      const double sig = kScaleFloor + softplus(raw_scale_[idx]);
      const double al = raw_alpha_[idx];
      const double inv_sq = 1.0 / std::sqrt(1.0 + al * al);
      const double delta = al * inv_sq;
      const double w = delta * std::abs(eps0) + inv_sq * eps1;
      if (grad) {
        const double dw_dalpha =
            inv_sq * inv_sq * inv_sq * (std::abs(eps0) - al * eps1);
        *grad = {dmu, w * sigmoid(raw_scale_[idx]), sig * dw_dalpha};
      }
      return mu + sig * w;
    }
  }
  return mu;
}

std::pair<double, double> RewardModel::analytic_moments(int s, int a) const {
  const double mu = location(s, a);
  switch (kind_) {
    case RewardKind::Deterministic:
      return {mu, 0.0};
    case RewardKind::Gaussian: {
      const double sig = scale(s, a);
      return {mu, sig * sig};
    }
    case RewardKind::SkewNormal: {
      const double sig = scale(s, a);
      const double al = alpha(s, a);
      const double delta2 = al * al / (1.0 + al * al);
      const double delta = al / std::sqrt(1.0 + al * al);
      const double two_over_pi = 2.0 / 3.141592653589793;
      return {mu + sig * delta * std::sqrt(two_over_pi),
              sig * sig * (1.0 - delta2 * two_over_pi)};
    }
  }
  return {mu, 0.0};
}

double RewardModel::kl_estimate(
    int s, int a, std::span<const std::pair<double, double>> noise,
    RewardGrad* grad) const {
  const std::size_t idx = index(s, a);
  const double th = std::tanh(raw_loc_[idx]);
  const double mu = r_min_ + (r_max_ - r_min_) * 0.5 * (th + 1.0);
  const double dmu = (r_max_ - r_min_) * 0.5 * (1.0 - th * th);

  switch (kind_) {
    case RewardKind::Deterministic: {
      if (grad) *grad = {mu * dmu, 0.0, 0.0};
      return 0.5 * mu * mu;
    }
    case RewardKind::Gaussian: {
      const double sig = kScaleFloor + softplus(raw_scale_[idx]);
      if (grad) {
        *grad = {mu * dmu, (sig - 1.0 / sig) * sigmoid(raw_scale_[idx]), 0.0};
      }
      return -std::log(sig) + 0.5 * (sig * sig + mu * mu) - 0.5;
    }
    case RewardKind::SkewNormal: {
      if (noise.empty()) {
        throw std::invalid_argument(
            "RewardModel::kl_estimate: SkewNormal needs Monte-Carlo noise");
      }
      const double sig = kScaleFloor + softplus(raw_scale_[idx]);
      const double dsig = sigmoid(raw_scale_[idx]);
      const double al = raw_alpha_[idx];
      const double inv_sq = 1.0 / std::sqrt(1.0 + al * al);
      const double delta = al * inv_sq;
      double value = 0.0;
      double g_mu = 0.0, g_sig = 0.0, g_al = 0.0;
      for (const auto& [e0, e1] : noise) {
        const double w = delta * std::abs(e0) + inv_sq * e1;
        const double r = mu + sig * w;
        value += kLog2 - std::log(sig) - 0.5 * w * w + log_norm_cdf(al * w) +
                 0.5 * r * r;
        if (grad) {
          const double w_prime =
              inv_sq * inv_sq * inv_sq * (std::abs(e0) - al * e1);
          const double mills = mills_ratio_inv(al * w);
          g_mu += r;
          g_sig += -1.0 / sig + r * w;
          g_al += -w * w_prime + mills * (w + al * w_prime) + r * sig * w_prime;
        }
      }
      const double inv_n = 1.0 / static_cast<double>(noise.size());
      if (grad) {
        *grad = {g_mu * inv_n * dmu, g_sig * inv_n * dsig, g_al * inv_n};
      }
      return value * inv_n;
    }
  }
  return 0.0;
}

double RewardModel::kl_to_prior(int s, int a, int n_mc, Rng& rng) const {
  if (n_mc < 1) {
    throw std::invalid_argument("RewardModel::kl_to_prior: n_mc must be >= 1");
  }
  std::vector<std::pair<double, double>> noise;
  if (kind_ == RewardKind::SkewNormal) {
    noise.reserve(static_cast<std::size_t>(n_mc));
    for (int i = 0; i < n_mc; ++i) noise.push_back(rng.normal_pair());
  }
  return kl_estimate(s, a, noise, nullptr);
}

void RewardModel::apply_gradient(int s, int a, const RewardGrad& grad,
                                 double step) {
  const std::size_t idx = index(s, a);
  raw_loc_[idx] -= step * grad.d_raw_loc;
  raw_scale_[idx] -= step * grad.d_raw_scale;
  raw_alpha_[idx] -= step * grad.d_raw_alpha;
}

bool RewardModel::all_finite() const {
  for (std::size_t i = 0; i < raw_loc_.size(); ++i) {
    if (!std::isfinite(raw_loc_[i]) || !std::isfinite(raw_scale_[i]) ||
        !std::isfinite(raw_alpha_[i])) {
      return false;
    }
  }
  return true;
}

void RewardModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("RewardModel::save: cannot open '" + path + "'");
  }
  out << "s a raw_loc raw_scale raw_alpha kind r_min r_max\n";
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      const std::size_t idx = index(s, a);
      out << s << " " << a << " " << format_double(raw_loc_[idx]) << " "
          << format_double(raw_scale_[idx]) << " "
          << format_double(raw_alpha_[idx]) << " " << reward_kind_name(kind_)
          << " " << format_double(r_min_) << " " << format_double(r_max_)
          << "\n";
    }
  }
  if (!out.good()) {
    throw std::runtime_error("RewardModel::save: write to '" + path +
                             "' failed");
  }
}

RewardModel RewardModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("RewardModel::load: cannot open '" + path + "'");
  }
  std::string header;
  std::getline(in, header);

  struct Row {
    int s, a;
    double loc, scale, alpha;
    std::string kind;
    double r_min, r_max;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row row{};
    if (!(ss >> row.s >> row.a >> row.loc >> row.scale >> row.alpha >>
          row.kind >> row.r_min >> row.r_max)) {
      throw std::runtime_error("RewardModel::load: " + path + ":" +
                               std::to_string(line_no) + ": malformed row");
    }
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw std::runtime_error("RewardModel::load: '" + path + "' has no rows");
  }
  int n_states = 0, n_actions = 0;
  for (const Row& row : rows) {
    n_states = std::max(n_states, row.s + 1);
    n_actions = std::max(n_actions, row.a + 1);
  }
  RewardModel model(parse_reward_kind(rows.front().kind), n_states, n_actions,
                    rows.front().r_min, rows.front().r_max);
  std::vector<bool> seen(static_cast<std::size_t>(n_states) *
                             static_cast<std::size_t>(n_actions),
                         false);
  for (const Row& row : rows) {
    if (row.kind != reward_kind_name(model.kind_) ||
        row.r_min != model.r_min_ || row.r_max != model.r_max_) {
      throw std::runtime_error("RewardModel::load: inconsistent kind/range in '" +
                               path + "'");
    }
    model.set_raw(row.s, row.a, row.loc, row.scale, row.alpha);
    seen[model.index(row.s, row.a)] = true;
  }
  for (bool cell : seen) {
    if (!cell) {
      throw std::runtime_error("RewardModel::load: '" + path +
                               "' does not cover every (s,a)");
    }
  }
  return model;
}

}  // namespace distirl
