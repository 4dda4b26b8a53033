#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "distirl/critic.hpp"
#include "distirl/mdp.hpp"
#include "distirl/quantile.hpp"
#include "distirl/rng.hpp"

using namespace distirl;

namespace {

/// Train a quantile critic to convergence on transitions drawn on-policy
/// from the MDP (test harness for fixed-point checks).
void fit_critic(QuantileCritic& critic, const TabularMdp& mdp,
                const TrueRewardSpec& spec, std::span<const double> policy,
                int sweeps, double kappa, double step0, Rng& rng) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  // Flat step for the first half so the extreme quantile atoms (whose
  // pinball-zone gradient scales with tau) can travel, then 1/t decay to
  // kill the dithering.
  const int half = sweeps / 2;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double step =
        sweep < half
            ? step0
            : step0 / (1.0 + static_cast<double>(sweep - half) / 2000.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double r = spec.at(s, a).sample(rng);
        const int s_next = mdp.sample_next(s, a, rng);
        const auto row = policy.subspan(
            static_cast<std::size_t>(s_next) * static_cast<std::size_t>(A),
            static_cast<std::size_t>(A));
        const int a_next = rng.categorical(row);
        qr_td_update(critic, {s, a, r, s_next, a_next}, mdp.gamma(), kappa,
                     step);
      }
    }
  }
}

/// Monte-Carlo return distribution from (s0, a0) under the policy.
std::vector<double> mc_returns(const TabularMdp& mdp,
                               const TrueRewardSpec& spec,
                               std::span<const double> policy, int s0, int a0,
                               int episodes, int horizon, Rng& rng) {
  const int A = mdp.n_actions();
  std::vector<double> returns(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    double acc = 0.0;
    double w = 1.0;
    int s = s0;
    int a = a0;
    for (int t = 0; t < horizon; ++t) {
      acc += w * spec.at(s, a).sample(rng);
      w *= mdp.gamma();
      s = mdp.sample_next(s, a, rng);
      const auto row =
          policy.subspan(static_cast<std::size_t>(s) *
                             static_cast<std::size_t>(A),
                         static_cast<std::size_t>(A));
      a = rng.categorical(row);
    }
    returns[static_cast<std::size_t>(e)] = acc;
  }
  return returns;
}

/// Exact policy evaluation of mean returns via Gaussian elimination on
/// Q = rbar + gamma P Pi Q (test-only oracle).
std::vector<double> solve_policy_q(const TabularMdp& mdp,
                                   const TrueRewardSpec& spec,
                                   std::span<const double> policy) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const int n = S * A;
  std::vector<double> m(static_cast<std::size_t>(n) *
                            static_cast<std::size_t>(n),
                        0.0);
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int row = s * A + a;
      b[static_cast<std::size_t>(row)] = spec.at(s, a).mean();
      m[static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(row)] += 1.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdp.transition(s, a, s2);
        if (p == 0.0) continue;
        for (int a2 = 0; a2 < A; ++a2) {
          m[static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(s2 * A + a2)] -=
              mdp.gamma() * p *
              policy[static_cast<std::size_t>(s2 * A + a2)];
        }
      }
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(m[static_cast<std::size_t>(r) * n + col]) >
          std::abs(m[static_cast<std::size_t>(pivot) * n + col])) {
        pivot = r;
      }
    }
    for (int c = 0; c < n; ++c) {
      std::swap(m[static_cast<std::size_t>(col) * n + c],
                m[static_cast<std::size_t>(pivot) * n + c]);
    }
    std::swap(b[static_cast<std::size_t>(col)],
              b[static_cast<std::size_t>(pivot)]);
    const double diag = m[static_cast<std::size_t>(col) * n + col];
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = m[static_cast<std::size_t>(r) * n + col] / diag;
      if (factor == 0.0) continue;
      for (int c = col; c < n; ++c) {
        m[static_cast<std::size_t>(r) * n + c] -=
            factor * m[static_cast<std::size_t>(col) * n + c];
      }
      b[static_cast<std::size_t>(r)] -= factor * b[static_cast<std::size_t>(col)];
    }
  }
  std::vector<double> q(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    q[static_cast<std::size_t>(r)] =
        b[static_cast<std::size_t>(r)] / m[static_cast<std::size_t>(r) * n + r];
  }
  return q;
}

}  // namespace

TEST_CASE("qr fixed point with gamma 0 and a constant reward") {
  QuantileCritic critic(1, 1, 16);
  for (int i = 0; i < 500; ++i) {
    qr_td_update(critic, {0, 0, 3.0, 0, 0}, 0.0, 1.0, 0.5);
  }
  for (double atom : critic.atoms(0, 0)) {
    CHECK(atom == doctest::Approx(3.0).epsilon(0.01));
  }
}

TEST_CASE("qr fixed point with discounting reaches r/(1-gamma)") {
  QuantileCritic critic(1, 1, 8);
  for (int i = 0; i < 4000; ++i) {
    qr_td_update(critic, {0, 0, 1.0, 0, 0}, 0.9, 1.0, 0.5);
  }
  for (double atom : critic.atoms(0, 0)) {
    CHECK(atom == doctest::Approx(10.0).epsilon(0.01));
  }
}

TEST_CASE("qr critic learns the quantiles of a fair coin") {
  Rng rng(101);
  QuantileCritic critic(1, 1, 32);
  for (int i = 0; i < 60000; ++i) {
    const double step = 0.3 / (1.0 + i / 5000.0);
    const double r = rng.uniform() < 0.5 ? 0.0 : 1.0;
    qr_td_update(critic, {0, 0, r, 0, 0}, 0.0, 0.01, step);
  }
  std::vector<double> coin_draws(200000);
  for (double& v : coin_draws) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const QuantileDistribution oracle = empirical_quantiles(coin_draws, 32);
  CHECK(wasserstein1(critic.distribution(0, 0), oracle) <= 0.05);
}

TEST_CASE("mean critic TD basics") {
  MeanCritic critic(1, 1);
  for (int i = 0; i < 200; ++i) {
    mean_td_update(critic, {0, 0, 2.0, 0, 0}, 0.0, 0.3);
  }
  CHECK(critic.value(0, 0) == doctest::Approx(2.0).epsilon(1e-6));

  const double before = critic.value(0, 0);
  mean_td_update(critic, {0, 0, 100.0, 0, 0}, 0.0, 0.0);
  CHECK(critic.value(0, 0) == before);
}

TEST_CASE("mean critic agrees with the quantile critic's mean") {
  Rng rng(103);
  QuantileCritic qcritic(1, 1, 32);
  MeanCritic mcritic(1, 1);
  const int total = 100000;
  for (int i = 0; i < total; ++i) {
    const double step =
        i < 20000 ? 0.3 : 0.3 / (1.0 + (i - 20000) / 300.0);
    const double r = rng.uniform() < 0.5 ? 0.0 : 1.0;
    qr_td_update(qcritic, {0, 0, r, 0, 0}, 0.5, 0.5, step);
    mean_td_update(mcritic, {0, 0, r, 0, 0}, 0.5, step);
  }
  // Both estimate E[r]/(1-gamma) = 1.
  CHECK(std::abs(qcritic.mean(0, 0) - mcritic.value(0, 0)) <
        0.02 * std::abs(mcritic.value(0, 0)));
}

TEST_CASE("critic drm basics") {
  QuantileCritic critic(1, 1, 4);
  auto atoms = critic.atoms(0, 0);
  atoms[0] = 0.0;
  atoms[1] = 1.0;
  atoms[2] = 2.0;
  atoms[3] = 3.0;
  CHECK(critic.drm(0, 0, Distortion::neutral()) ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(critic.drm(0, 0, Distortion::cvar(0.5)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  QuantileCritic point(2, 2, 16, 1.25);
  for (const Distortion& d :
       {Distortion::neutral(), Distortion::cvar(0.05), Distortion::wang(1.0)}) {
    CHECK(point.drm(1, 1, d) == doctest::Approx(1.25).epsilon(1e-9));
  }
}

TEST_CASE("qr gradient sign matches the pinball gradient outside kappa") {
  Rng rng(107);
  const double kappa = 0.01;
  for (int rep = 0; rep < 200; ++rep) {
    const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                         (kappa + 3.0 * rng.uniform());
    const double tau = 0.9 * rng.uniform() + 0.05;
    const double huber_grad = quantile_huber_grad(delta, tau, kappa);
    const double pinball_grad = tau - (delta < 0.0 ? 1.0 : 0.0);
    CHECK(huber_grad * pinball_grad > 0.0);
  }
}

TEST_CASE("batched update equals accumulating the same transitions") {
  // Order independence: the batch gradient is a sum against the pre-pass
  // table, so permuting transitions changes nothing.
  Rng rng(109);
  std::vector<Transition> batch;
  for (int i = 0; i < 32; ++i) {
    batch.push_back({0, 0, rng.normal(), 0, 0});
  }
  QuantileCritic a(1, 1, 16);
  QuantileCritic b(1, 1, 16);
  qr_td_update_batch(a, batch, 0.5, 1.0, 0.1);
  std::vector<Transition> shuffled = batch;
  std::reverse(shuffled.begin(), shuffled.end());
  qr_td_update_batch(b, shuffled, 0.5, 1.0, 0.1);
  for (int i = 0; i < 16; ++i) {
    CHECK(a.atoms(0, 0)[static_cast<std::size_t>(i)] ==
          doctest::Approx(b.atoms(0, 0)[static_cast<std::size_t>(i)])
              .epsilon(1e-12));
  }
}

TEST_CASE("converged critic matches Monte-Carlo return quantiles") {
  // 3-state, 2-action MDP with mixed stochastic rewards and a fixed policy.
  Rng rng(113);
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

  QuantileCritic critic(3, 2, 64);
  fit_critic(critic, mdp, spec, policy, 120000, 0.05, 1.0, rng);

  const std::vector<double> q_oracle = solve_policy_q(mdp, spec, policy);
  const int horizon = 90;  // gamma^90 ~ 2e-9
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      const std::vector<double> returns =
          mc_returns(mdp, spec, policy, s, a, 50000, horizon, rng);
      const QuantileDistribution oracle = empirical_quantiles(returns, 64);
      const double iqr = oracle.atom(47) - oracle.atom(15);
      const double w1 = wasserstein1(critic.distribution(s, a), oracle);
      CHECK(w1 <= 0.05 * std::max(iqr, 1.0));
      CHECK(std::abs(critic.mean(s, a) -
                     q_oracle[static_cast<std::size_t>(s * 2 + a)]) <=
            0.02 * std::abs(q_oracle[static_cast<std::size_t>(s * 2 + a)]));
    }
  }
}

TEST_CASE("critic checkpoint round trip") {
  QuantileCritic critic(2, 2, 8);
  Rng rng(127);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      auto atoms = critic.atoms(s, a);
      for (double& v : atoms) v = rng.normal();
      std::sort(atoms.begin(), atoms.end());
    }
  }
  const auto dir =
      std::filesystem::temp_directory_path() / "distirl_test_critic";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "critic.txt").string();
  critic.save(path);
  const QuantileCritic loaded = QuantileCritic::load(path);
  CHECK(loaded.n_states() == 2);
  CHECK(loaded.n_actions() == 2);
  CHECK(loaded.n_atoms() == 8);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      for (int i = 0; i < 8; ++i) {
        CHECK(loaded.atoms(s, a)[static_cast<std::size_t>(i)] ==
              critic.atoms(s, a)[static_cast<std::size_t>(i)]);
      }
    }
  }
}

TEST_CASE("update validation") {
  QuantileCritic critic(2, 2, 4);
  CHECK_THROWS_AS(qr_td_update(critic, {5, 0, 0.0, 0, 0}, 0.9, 1.0, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(qr_td_update(critic, {0, 0, 0.0, 0, 0}, 0.9, 0.0, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      qr_td_update(critic, {0, 0, std::nan(""), 0, 0}, 0.9, 1.0, 0.1),
      std::invalid_argument);
}
