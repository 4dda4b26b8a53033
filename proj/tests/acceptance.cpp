// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier end-to-end pipelines run with fixed seeds; every
// tolerance is pinned in code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "distirl/cli.hpp"
#include "distirl/forward_rl.hpp"
#include "distirl/irl.hpp"
#include "distirl/mdp.hpp"
#include "distirl/normal.hpp"
#include "distirl/quantile.hpp"
#include "distirl/reward_model.hpp"
#include "distirl/rng.hpp"

using namespace distirl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool ok, const std::string& detail) {
    if (!ok) {
      failures_.push_back(detail);
    }
  }

  void finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    if (failures_.empty()) {
      std::printf("[PASS] %s (%.1f s)\n", name_.c_str(), seconds);
    } else {
      ++g_failures;
      std::printf("[FAIL] %s (%.1f s)\n", name_.c_str(), seconds);
      for (const std::string& f : failures_) {
        std::printf("       %s\n", f.c_str());
      }
    }
    std::fflush(stdout);
  }

 private:
  std::string name_;
  std::vector<std::string> failures_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, double a, double b = 0.0,
                double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

QuantileDistribution random_dist(Rng& rng, int n) {
  std::vector<double> atoms(static_cast<std::size_t>(n));
  for (double& v : atoms) v = -5.0 + 10.0 * rng.uniform();
  return QuantileDistribution(std::move(atoms));
}

// ---------------------------------------------------------------------------
// P1: CDF-area and quantile-area forms of the FSD violation agree.
// ---------------------------------------------------------------------------
void run_p1() {
  Criterion crit("P1 FSD violation area identity (500 random pairs)");
  Rng rng(1001);
  const int sizes[4] = {2, 16, 64, 200};
  for (int rep = 0; rep < 500; ++rep) {
    const int n = sizes[rep % 4];
    const QuantileDistribution x = random_dist(rng, n);
    const QuantileDistribution y = random_dist(rng, n);
    const double d1 =
        std::abs(fsd_violation_cdf(x, y) - fsd_violation_quantile(y, x));
    const double d2 =
        std::abs(fsd_violation_cdf(y, x) - fsd_violation_quantile(x, y));
    crit.expect(d1 <= 1e-9 && d2 <= 1e-9,
                fmt("pair %d: |cdf - quantile| = %.3g / %.3g", rep,
                    std::max(d1, d2)));
    if (rep == 0) {
      crit.expect(true, "");
    }
  }
  crit.finish();
}

// ---------------------------------------------------------------------------
// P2: distortion weights are probability vectors; neutral parameters give
// the mean; atomwise dominance implies DRM dominance on the full grid.
// ---------------------------------------------------------------------------
void run_p2() {
  Criterion crit("P2 DRM coherence (weights, limits, dominance)");
  std::vector<Distortion> grid;
  for (double a : {0.05, 0.1, 0.25, 0.5, 0.75, 1.0}) {
    grid.push_back(Distortion::cvar(a));
  }
  for (double l : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    grid.push_back(Distortion::wang(l));
  }
  for (const Distortion& d : grid) {
    for (int n : {1, 4, 64, 200}) {
      const std::vector<double> w = distortion_weights(d, n);
      double sum = 0.0;
      for (double wi : w) {
        crit.expect(wi >= 0.0, "negative distortion weight");
        sum += wi;
      }
      crit.expect(std::abs(sum - 1.0) <= 1e-9,
                  fmt("weights sum to %.12f for n=%d", sum, n));
    }
  }
  Rng rng(1002);
  for (int rep = 0; rep < 50; ++rep) {
    const QuantileDistribution x = random_dist(rng, 64);
    crit.expect(std::abs(drm(x, Distortion::cvar(1.0)) - x.mean()) <= 1e-9,
                "CVaR(1) differs from the mean");
    crit.expect(std::abs(drm(x, Distortion::wang(0.0)) - x.mean()) <= 1e-9,
                "Wang(0) differs from the mean");

    std::vector<double> raised(x.atoms().begin(), x.atoms().end());
    for (double& v : raised) v += 3.0 * rng.uniform();
    const QuantileDistribution upper(std::move(raised));
    for (const Distortion& d : grid) {
      crit.expect(drm(upper, d) >= drm(x, d) - 1e-12,
                  "atomwise dominance violated a DRM ordering");
    }
  }
  crit.finish();
}

// ---------------------------------------------------------------------------
// P3: converged quantile critic versus Monte-Carlo return quantiles and a
// linear-solve policy evaluation on a seeded 3-state MDP.
// ---------------------------------------------------------------------------
std::vector<double> solve_policy_q(const TabularMdp& mdp,
                                   const TrueRewardSpec& spec,
                                   std::span<const double> policy) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const int n = S * A;
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int row = s * A + a;
      b[static_cast<std::size_t>(row)] = spec.at(s, a).mean();
      m[static_cast<std::size_t>(row) * n + row] += 1.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdp.transition(s, a, s2);
        if (p == 0.0) continue;
        for (int a2 = 0; a2 < A; ++a2) {
          m[static_cast<std::size_t>(row) * n + (s2 * A + a2)] -=
              mdp.gamma() * p * policy[static_cast<std::size_t>(s2 * A + a2)];
        }
      }
    }
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(m[static_cast<std::size_t>(r) * n + col]) >
          std::abs(m[static_cast<std::size_t>(pivot) * n + col])) {
        pivot = r;
      }
    }
    for (int c2 = 0; c2 < n; ++c2) {
      std::swap(m[static_cast<std::size_t>(col) * n + c2],
                m[static_cast<std::size_t>(pivot) * n + c2]);
    }
    std::swap(b[static_cast<std::size_t>(col)],
              b[static_cast<std::size_t>(pivot)]);
    const double diag = m[static_cast<std::size_t>(col) * n + col];
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = m[static_cast<std::size_t>(r) * n + col] / diag;
      if (factor == 0.0) continue;
      for (int c2 = col; c2 < n; ++c2) {
        m[static_cast<std::size_t>(r) * n + c2] -=
            factor * m[static_cast<std::size_t>(col) * n + c2];
      }
      b[static_cast<std::size_t>(r)] -=
          factor * b[static_cast<std::size_t>(col)];
    }
  }
  std::vector<double> q(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    q[static_cast<std::size_t>(r)] =
        b[static_cast<std::size_t>(r)] / m[static_cast<std::size_t>(r) * n + r];
  }
  return q;
}

void run_p3() {
  Criterion crit("P3 critic oracle (W-1 vs Monte Carlo, mean vs linear solve)");
  std::vector<double> transition(3 * 2 * 3, 0.0);
  const auto idx = [](int s, int a, int s2) { return (s * 2 + a) * 3 + s2; };
  transition[static_cast<std::size_t>(idx(0, 0, 1))] = 0.8;
  transition[static_cast<std::size_t>(idx(0, 0, 2))] = 0.2;
  transition[static_cast<std::size_t>(idx(0, 1, 2))] = 1.0;
  transition[static_cast<std::size_t>(idx(1, 0, 0))] = 0.5;
  transition[static_cast<std::size_t>(idx(1, 0, 2))] = 0.5;
  transition[static_cast<std::size_t>(idx(1, 1, 1))] = 1.0;
  transition[static_cast<std::size_t>(idx(2, 0, 0))] = 1.0;
  transition[static_cast<std::size_t>(idx(2, 1, 0))] = 0.3;
  transition[static_cast<std::size_t>(idx(2, 1, 1))] = 0.7;
  const TabularMdp mdp(3, 2, std::move(transition), 0.8, {1.0, 0.0, 0.0});

  TrueRewardSpec spec(3, 2);
  spec.set(0, 0, RewardSpec::gaussian(1.0, 1.0));
  spec.set(0, 1, RewardSpec::deterministic(0.5));
  spec.set(1, 0, RewardSpec::skew_normal(0.0, 1.0, 4.0));
  spec.set(1, 1, RewardSpec::bernoulli_penalty(1.0, 0.2, 2.0));
  spec.set(2, 0, RewardSpec::gaussian(-0.5, 0.5));
  spec.set(2, 1, RewardSpec::deterministic(0.0));
  const std::vector<double> policy = {0.6, 0.4, 0.3, 0.7, 0.5, 0.5};

  Rng rng(1003);
  QuantileCritic critic(3, 2, 64);
  const int sweeps = 120000;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double step =
        sweep < sweeps / 2
            ? 1.0
            : 1.0 / (1.0 + (sweep - sweeps / 2) / 2000.0);
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        const double r = spec.at(s, a).sample(rng);
        const int s_next = mdp.sample_next(s, a, rng);
        const auto row = std::span<const double>(policy).subspan(
            static_cast<std::size_t>(s_next) * 2, 2);
        const int a_next = rng.categorical(row);
        qr_td_update(critic, {s, a, r, s_next, a_next}, mdp.gamma(), 0.05,
                     step);
      }
    }
  }

  const std::vector<double> q_oracle = solve_policy_q(mdp, spec, policy);
  const int horizon = 90;  // 0.8^90 ~ 2e-9
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      std::vector<double> returns(100000);
      for (double& ret : returns) {
        double acc = 0.0;
        double w = 1.0;
        int cs = s;
        int ca = a;
        for (int t = 0; t < horizon; ++t) {
          acc += w * spec.at(cs, ca).sample(rng);
          w *= mdp.gamma();
          cs = mdp.sample_next(cs, ca, rng);
          const auto row = std::span<const double>(policy).subspan(
              static_cast<std::size_t>(cs) * 2, 2);
          ca = rng.categorical(row);
        }
        ret = acc;
      }
      const QuantileDistribution oracle = empirical_quantiles(returns, 64);
      const double iqr = oracle.atom(47) - oracle.atom(15);
      const double w1 = wasserstein1(critic.distribution(s, a), oracle);
      crit.expect(w1 <= 0.05 * iqr,
                  fmt("W-1 %.4f exceeds 0.05 * IQR %.4f", w1, iqr));
      const double q_ref = q_oracle[static_cast<std::size_t>(s * 2 + a)];
      crit.expect(std::abs(critic.mean(s, a) - q_ref) <= 0.02 * std::abs(q_ref),
                  fmt("mean %.4f vs linear solve %.4f", critic.mean(s, a),
                      q_ref));
    }
  }
  crit.finish();
}

// ---------------------------------------------------------------------------
// P4: pathwise gradients of reward draws and both reward losses match
// central finite differences (step 1e-5) within 1e-3 relative error.
// ---------------------------------------------------------------------------
void run_p4() {
  Criterion crit("P4 gradient suite (finite differences, 1e-3 relative)");
  Rng rng(1004);

  const auto rel_err = [](double got, double want) {
    return std::abs(got - want) / std::max(1e-6, std::abs(want));
  };

  // sample_reward across a parameter grid.
  for (RewardKind kind : {RewardKind::Gaussian, RewardKind::SkewNormal}) {
    for (double loc : {-1.0, 0.0, 0.8}) {
      for (double scale : {-0.8, 0.2, 1.0}) {
        for (double alpha : {-2.0, 0.5, 3.0}) {
          auto [e0, e1] = rng.normal_pair();
          if (std::abs(e0) < 1e-3) e0 = 0.4;
          RewardModel model(kind, 1, 1, -5.0, 5.0);
          model.set_raw(0, 0, loc, scale, alpha);
          RewardGrad grad;
          model.sample(0, 0, e0, e1, &grad);
          const auto value_at = [&](double l, double sc, double al) {
            RewardModel probe(kind, 1, 1, -5.0, 5.0);
            probe.set_raw(0, 0, l, sc, al);
            return probe.sample(0, 0, e0, e1);
          };
          const double h = 1e-5;
          const double fd_loc =
              (value_at(loc + h, scale, alpha) - value_at(loc - h, scale, alpha)) /
              (2 * h);
          const double fd_scale =
              (value_at(loc, scale + h, alpha) - value_at(loc, scale - h, alpha)) /
              (2 * h);
          crit.expect(rel_err(grad.d_raw_loc, fd_loc) <= 1e-3,
                      "raw_loc gradient mismatch in sample_reward");
          crit.expect(rel_err(grad.d_raw_scale, fd_scale) <= 1e-3,
                      "raw_scale gradient mismatch in sample_reward");
          if (kind == RewardKind::SkewNormal) {
            const double fd_alpha = (value_at(loc, scale, alpha + h) -
                                     value_at(loc, scale, alpha - h)) /
                                    (2 * h);
            crit.expect(rel_err(grad.d_raw_alpha, fd_alpha) <= 1e-3,
                        "raw_alpha gradient mismatch in sample_reward");
          }
        }
      }
    }
  }

  // Both reward losses over fixed return batches and KL noise.
  DemoSet demos;
  demos.n_states = 1;
  demos.n_actions = 2;
  Trajectory traj;
  traj.steps = {{0, 0}, {0, 1}, {0, 0}, {0, 1}, {0, 1}};
  demos.trajectories = {traj};
  for (RewardKind kind : {RewardKind::Gaussian, RewardKind::SkewNormal}) {
    RewardModel model(kind, 1, 2, -5.0, 5.0, 0.5);
    model.set_raw(0, 0, 0.4, -0.1, 1.0);
    model.set_raw(0, 1, -0.3, 0.2, -1.5);
    const RiskPolicy policy(1, 2);
    Rng sample_rng(1005);
    const auto [z_pi, z_e] =
        sample_returns_offline(demos, policy, model, 0.9, 5, 32, sample_rng);
    Rng kl_rng(1006);
    const std::vector<std::pair<int, int>> pairs = {{0, 0}, {0, 1}};
    const KlBatch kl = make_kl_batch(pairs, 2, 32, kind, kl_rng);

    for (bool fsd : {true, false}) {
      const auto loss_at = [&](const RewardModel& m) {
        return fsd ? reward_loss_fsd(z_pi, z_e, m, 0.01, kl)
                   : reward_loss_mean(z_pi, z_e, m, 0.01, kl);
      };
      const RewardLossResult result = loss_at(model);
      for (int a = 0; a < 2; ++a) {
        for (int param = 0; param < 3; ++param) {
          if (kind == RewardKind::Gaussian && param == 2) continue;
          const auto perturbed = [&](double h) {
            RewardModel probe = model;
            probe.set_raw(0, a,
                          model.raw_loc(0, a) + (param == 0 ? h : 0.0),
                          model.raw_scale(0, a) + (param == 1 ? h : 0.0),
                          model.raw_alpha(0, a) + (param == 2 ? h : 0.0));
            return loss_at(probe).loss;
          };
          const double h = 1e-5;
          const double fd = (perturbed(h) - perturbed(-h)) / (2 * h);
          const RewardGrad& g = result.grads[static_cast<std::size_t>(a)];
          const double got = param == 0   ? g.d_raw_loc
                             : param == 1 ? g.d_raw_scale
                                          : g.d_raw_alpha;
          if (std::abs(fd) < 1e-7 && std::abs(got) < 1e-7) continue;
          crit.expect(rel_err(got, fd) <= 1e-3,
                      fmt("loss gradient mismatch: got %.6g, fd %.6g", got,
                          fd));
        }
      }
    }
  }
  crit.finish();
}

// ---------------------------------------------------------------------------
// Gridworld pipeline shared by G1-G3.
// ---------------------------------------------------------------------------
struct CellStats {
  double mean = 0.0;
  double sd = 0.0;
};

std::vector<CellStats> cell_stats(const RewardModel& model,
                                  const DemoSet& demos) {
  const int S = model.n_states();
  const int A = model.n_actions();
  std::vector<int> visits(static_cast<std::size_t>(S) * A, 0);
  for (const Trajectory& traj : demos.trajectories) {
    for (const auto& [s, a] : traj.steps) {
      ++visits[static_cast<std::size_t>(s * A + a)];
    }
  }
  std::vector<CellStats> out(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    double wsum = 0.0;
    for (int a = 0; a < A; ++a) wsum += visits[static_cast<std::size_t>(s * A + a)];
    double mean = 0.0, var = 0.0;
    for (int a = 0; a < A; ++a) {
      const double w =
          wsum > 0.0 ? visits[static_cast<std::size_t>(s * A + a)] / wsum
                     : 1.0 / A;
      const auto [m, v] = model.analytic_moments(s, a);
      mean += w * m;
      var += w * v;
    }
    out[static_cast<std::size_t>(s)] = {mean, std::sqrt(std::max(var, 0.0))};
  }
  return out;
}

struct GridOutcome {
  bool g1 = false;       // goal cells are the top-2 inferred means
  bool g2 = false;       // sd(top) > sd(bottom) and >= 2x median non-goal
  int demo_top = 0;
  double sd_top = 0.0, sd_bottom = 0.0, sd_median = 0.0;
};

GridOutcome grid_outcome(const RewardModel& model, const DemoSet& demos,
                         int top, int bottom) {
  const std::vector<CellStats> stats = cell_stats(model, demos);
  std::vector<int> order(stats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return stats[static_cast<std::size_t>(a)].mean >
           stats[static_cast<std::size_t>(b)].mean;
  });
  GridOutcome out;
  out.g1 = (order[0] == top && order[1] == bottom) ||
           (order[0] == bottom && order[1] == top);
  std::vector<double> nongoal;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (static_cast<int>(i) != top && static_cast<int>(i) != bottom) {
      nongoal.push_back(stats[i].sd);
    }
  }
  std::sort(nongoal.begin(), nongoal.end());
  out.sd_median = nongoal[nongoal.size() / 2];
  out.sd_top = stats[static_cast<std::size_t>(top)].sd;
  out.sd_bottom = stats[static_cast<std::size_t>(bottom)].sd;
  out.g2 = out.sd_top > out.sd_bottom && out.sd_top >= 2.0 * out.sd_median;
  return out;
}

IrlConfig gridworld_irl_config(std::uint64_t seed) {
  IrlConfig cfg;  // Gaussian reward model, quantile critic, FSD loss
  cfg.gamma = 0.79;
  cfg.horizon = 40;
  cfg.r_min = 0.0;
  cfg.r_max = 2.0;
  cfg.eta_critic = 0.5;
  cfg.off_support_penalty = 0.3;
  cfg.init_sigma = 0.08;
  cfg.seed = seed;
  return cfg;
}

ExpertConfig gridworld_expert_config(std::uint64_t seed) {
  ExpertConfig cfg;
  cfg.episodes = 100000;
  cfg.horizon = 40;
  cfg.step_size = 0.3;
  cfg.kappa = 0.05;
  cfg.eps_end = 0.1;
  cfg.seed = seed;
  return cfg;
}

void run_gridworld_criteria() {
  Criterion g1("G1 gridworld inferred means rank both goals top-2 (>=4/5 seeds)");
  Criterion g2("G2 gridworld inferred sd orders the stochastic goal (>=4/5 seeds)");
  Criterion g3("G3 mean-matching ablation misses the variance structure (>=4/5 seeds)");

  const GridworldEnv env = build_gridworld(
      5, 5, GridCell{2, 0},
      {GridGoal{GridCell{0, 4}, RewardSpec::gaussian(1.0, 1.0)},
       GridGoal{GridCell{4, 4}, RewardSpec::deterministic(1.0)}},
      0.0, 0.0, 0.79);
  const int top = grid_state(5, {0, 4});
  const int bottom = grid_state(5, {4, 4});
  const std::vector<int> goals = {top, bottom};

  int pass_g1 = 0, pass_g2 = 0, pass_g3 = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ExpertResult expert =
        train_expert(env.mdp, env.rewards, gridworld_expert_config(seed));
    Rng demo_rng(seed, 1);
    const DemoSet demos = generate_commitment_demos(
        env.mdp, env.rewards, expert.critic, Distortion::cvar(0.05), goals,
        0.65, 10, 40, demo_rng);

    const TrainResult dist_irl =
        train(25, 4, demos, gridworld_irl_config(seed));
    const GridOutcome fsd = grid_outcome(dist_irl.model, demos, top, bottom);
    pass_g1 += fsd.g1 ? 1 : 0;
    pass_g2 += fsd.g2 ? 1 : 0;

    IrlConfig mean_cfg = gridworld_irl_config(seed);  // Dis-TD-Mean analog
    mean_cfg.critic_kind = CriticKind::Mean;
    mean_cfg.reward_loss = RewardLossKind::Mean;
    const TrainResult birl = train(25, 4, demos, mean_cfg);
    const GridOutcome mean = grid_outcome(birl.model, demos, top, bottom);
    pass_g3 += mean.g2 ? 0 : 1;

    std::printf(
        "       seed %llu: fsd g1=%d g2=%d (sd top %.3f bottom %.3f median "
        "%.3f) | mean-ablation g2=%d (sd top %.3f)\n",
        static_cast<unsigned long long>(seed), fsd.g1 ? 1 : 0, fsd.g2 ? 1 : 0,
        fsd.sd_top, fsd.sd_bottom, fsd.sd_median, mean.g2 ? 1 : 0,
        mean.sd_top);
    std::fflush(stdout);
  }
  g1.expect(pass_g1 >= 4, fmt("only %.0f of 5 seeds ranked both goals top-2",
                              pass_g1));
  g2.expect(pass_g2 >= 4,
            fmt("only %.0f of 5 seeds ordered the goal deviations", pass_g2));
  g3.expect(pass_g3 >= 4,
            fmt("mean-matching captured the variance in %.0f of 5 seeds",
                5.0 - pass_g3));
  g1.finish();
  g2.finish();
  g3.finish();
}

// ---------------------------------------------------------------------------
// A1: six-way ablation ordering on the right-skewed two-port task.
// ---------------------------------------------------------------------------
void run_a1() {
  Criterion crit(
      "A1 ablation ordering Dis-Qt-FSD above Dis-Qt-Mean and Det-TD-Mean "
      "(>=4/5 seeds)");
  GridworldEnv env = build_gridworld(
      5, 5, GridCell{2, 0},
      {GridGoal{GridCell{0, 4}, RewardSpec::skew_normal(-0.3, 1.6, 5.0)},
       GridGoal{GridCell{4, 4}, RewardSpec::deterministic(1.0)}},
      0.0, 0.0, 0.79);

  IrlConfig base = gridworld_irl_config(0);
  base.batch_size = 256;
  base.n_quantiles = 100;
  base.state_coupling = 0.002;

  cli::AblationSpec spec{std::move(env.mdp), std::move(env.rewards),
                         gridworld_expert_config(0),
                         10, 40, 0.65, base, 5, 0};
  const std::vector<cli::AblationRow> rows = cli::run_ablation(spec);

  int ordered = 0;
  for (int seed = 0; seed < 5; ++seed) {
    double fsd = 0.0, qt_mean = 0.0, td_mean = 0.0;
    for (const cli::AblationRow& row : rows) {
      if (row.seed != seed) continue;
      if (row.config_name == "Dis-Qt-FSD") fsd = row.raw_return;
      if (row.config_name == "Dis-Qt-Mean") qt_mean = row.raw_return;
      if (row.config_name == "Det-TD-Mean") td_mean = row.raw_return;
    }
    const bool ok = fsd > qt_mean && fsd > td_mean;
    ordered += ok ? 1 : 0;
    std::printf(
        "       seed %d: Dis-Qt-FSD %.4f vs Dis-Qt-Mean %.4f vs Det-TD-Mean "
        "%.4f -> %s\n",
        seed, fsd, qt_mean, td_mean, ok ? "ordered" : "NOT ordered");
    std::fflush(stdout);
  }
  crit.expect(ordered >= 4, fmt("ordering held in %.0f of 5 seeds", ordered));
  crit.finish();
}

// ---------------------------------------------------------------------------
// A2: risk-sensitive imitation on the Bernoulli-penalty task.
// ---------------------------------------------------------------------------
void run_a2() {
  Criterion crit("A2 imitation CVaR reaches 90% of the expert's");
  TabularMdp mdp(1, 2, {1.0, 1.0}, 0.5, {1.0});
  TrueRewardSpec spec(1, 2);
  spec.set(0, 0, RewardSpec::deterministic(1.0));
  spec.set(0, 1, RewardSpec::bernoulli_penalty(1.2, 0.1, 5.0));

  ExpertConfig ecfg;
  ecfg.episodes = 20000;
  ecfg.horizon = 16;
  ecfg.n_quantiles = 100;
  ecfg.step_size = 0.2;
  ecfg.kappa = 0.05;
  ecfg.seed = 0;
  const ExpertResult expert = train_expert(mdp, spec, ecfg);

  Rng demo_rng(0, 1);
  const DemoSet demos =
      generate_demos(mdp, spec, expert.policy, 10, 16, demo_rng);

  IrlConfig cfg;
  cfg.gamma = 0.5;
  cfg.horizon = 16;
  cfg.r_min = -5.0;
  cfg.r_max = 5.0;
  cfg.iterations = 2000;
  cfg.batch_size = 256;
  cfg.n_quantiles = 100;
  cfg.eta_critic = 0.5;
  cfg.off_support_penalty = 0.8;
  cfg.seed = 0;
  const TrainResult result = train(1, 2, demos, cfg);

  const auto true_cvar = [&](const RiskPolicy& policy, std::uint64_t seed) {
    Rng rng(seed, 77);
    std::vector<double> returns(10000);
    for (int i = 0; i < 10000; ++i) {
      Rng episode = rng.split(static_cast<std::uint64_t>(i));
      returns[static_cast<std::size_t>(i)] = discounted_signal_return(
          rollout(mdp, policy.matrix(), spec, 16, episode), 0.5, 16);
    }
    return drm(empirical_quantiles(returns, 200), Distortion::cvar(0.05));
  };

  const double policy_cvar = true_cvar(result.policy, 11);
  const double expert_cvar = true_cvar(expert.policy, 12);
  std::printf("       policy CVaR %.4f, expert CVaR %.4f (ratio %.3f)\n",
              policy_cvar, expert_cvar, policy_cvar / expert_cvar);
  crit.expect(policy_cvar >= 0.9 * expert_cvar,
              fmt("policy CVaR %.4f below 0.9 x expert %.4f", policy_cvar,
                  expert_cvar));
  crit.finish();
}

// ---------------------------------------------------------------------------
// D1: every pipeline stage is bitwise deterministic.
// ---------------------------------------------------------------------------
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

void run_d1() {
  Criterion crit("D1 pipeline stages are bitwise deterministic");
  const fs::path root = fs::temp_directory_path() / "distirl_acceptance_d1";
  fs::remove_all(root);
  fs::create_directories(root);

  write_file(root / "env.json", R"json({
    "env_kind": "gridworld", "width": 3, "height": 3, "start": [1, 0],
    "goals": [
      {"cell": [0, 2], "reward": "gaussian(1,1)"},
      {"cell": [2, 2], "reward": "deterministic(1)"}
    ],
    "step_cost": 0.0, "slip_prob": 0.0, "gamma": 0.7
  })json");
  write_file(root / "expert.json",
             R"json({"env": ")json" + (root / "env_a").string() +
                 R"json(", "episodes": 1500, "horizon": 10,
                 "n_quantiles": 32, "step_size": 0.2, "seed": 5})json");
  write_file(root / "demos.json",
             R"json({"env": ")json" + (root / "env_a").string() +
                 R"json(", "critic": ")json" +
                 (root / "expert_a" / "expert_critic.txt").string() +
                 R"json(", "commit_goals": [2, 8], "commit_beta": 0.5,
                 "n_traj": 6, "horizon": 10, "seed": 6})json");
  write_file(root / "irl.json",
             R"json({"demos": ")json" +
                 (root / "demos_a" / "demos.txt").string() +
                 R"json(", "iterations": 50, "batch_size": 32,
                 "return_samples": 16, "horizon": 10, "n_quantiles": 32,
                 "gamma": 0.7, "r_min": 0.0, "r_max": 2.0, "seed": 7})json");
  write_file(root / "eval.json",
             R"json({"env": ")json" + (root / "env_a").string() +
                 R"json(", "run": ")json" + (root / "run_a").string() +
                 R"json(", "demos": ")json" +
                 (root / "demos_a" / "demos.txt").string() +
                 R"json(", "eval_rollouts": 400, "horizon": 10,
                 "n_atoms": 32, "ref_samples": 128, "seed": 8})json");
  write_file(root / "cdf.json",
             R"json({"run": ")json" + (root / "run_a").string() +
                 R"json(", "demos": ")json" +
                 (root / "demos_a" / "demos.txt").string() +
                 R"json(", "n_atoms": 16, "samples": 64, "seed": 9})json");

  const auto stage = [&](const std::string& name,
                         const std::string& config_name,
                         const std::string& out_name) {
    return cli::run({name, "--config", (root / config_name).string(), "--out",
                     (root / out_name).string()});
  };

  // First pass builds the chain; stage inputs reference the *_a outputs.
  crit.expect(stage("make-env", "env.json", "env_a") == 0, "make-env A failed");
  crit.expect(stage("train-expert", "expert.json", "expert_a") == 0,
              "train-expert A failed");
  crit.expect(stage("gen-demos", "demos.json", "demos_a") == 0,
              "gen-demos A failed");
  crit.expect(stage("train-irl", "irl.json", "run_a") == 0,
              "train-irl A failed");
  crit.expect(stage("eval", "eval.json", "eval_a") == 0, "eval A failed");
  crit.expect(stage("export-cdf", "cdf.json", "cdf_a") == 0,
              "export-cdf A failed");

  // Second pass into fresh directories with identical configs/inputs.
  crit.expect(stage("make-env", "env.json", "env_b") == 0, "make-env B failed");
  crit.expect(stage("train-expert", "expert.json", "expert_b") == 0,
              "train-expert B failed");
  crit.expect(stage("gen-demos", "demos.json", "demos_b") == 0,
              "gen-demos B failed");
  crit.expect(stage("train-irl", "irl.json", "run_b") == 0,
              "train-irl B failed");
  crit.expect(stage("eval", "eval.json", "eval_b") == 0, "eval B failed");
  crit.expect(stage("export-cdf", "cdf.json", "cdf_b") == 0,
              "export-cdf B failed");

  const std::pair<std::string, std::string> dirs[6] = {
      {"env_a", "env_b"},     {"expert_a", "expert_b"},
      {"demos_a", "demos_b"}, {"run_a", "run_b"},
      {"eval_a", "eval_b"},   {"cdf_a", "cdf_b"}};
  for (const auto& [a, b] : dirs) {
    for (const auto& entry : fs::directory_iterator(root / a)) {
      const fs::path name = entry.path().filename();
      const std::string lhs = slurp(entry.path());
      const std::string rhs = slurp(root / b / name);
      crit.expect(!lhs.empty() && lhs == rhs,
                  a + "/" + name.string() + " differs between reruns");
    }
  }
  crit.finish();
}

}  // namespace

int main() {
  std::printf("distirl acceptance suite\n");
  run_p1();
  run_p2();
  run_p3();
  run_p4();
  run_d1();
  run_a2();
  run_a1();
  run_gridworld_criteria();
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
