#include "distirl/irl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace distirl {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Adam state for the reward table (the learning-rate convention for the
/// reward parameters; the tabular critic keeps plain SGD because its atoms
/// are re-sorted, which would scramble per-slot moments).
class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void begin_step() {
    ++t_;
    bias_m_ = 1.0 - std::pow(0.9, t_);
    bias_v_ = 1.0 - std::pow(0.999, t_);
  }

  double delta(std::size_t i, double g, double lr) {
    m_[i] = 0.9 * m_[i] + 0.1 * g;
    v_[i] = 0.999 * v_[i] + 0.001 * g * g;
    const double mhat = m_[i] / bias_m_;
    const double vhat = v_[i] / bias_v_;
    return lr * mhat / (std::sqrt(vhat) + 1e-8);
  }

 private:
  std::vector<double> m_, v_;
  int t_ = 0;
  double bias_m_ = 1.0, bias_v_ = 1.0;
};

}  // namespace

std::string critic_kind_name(CriticKind kind) {
  return kind == CriticKind::Quantile ? "quantile" : "mean";
}

CriticKind parse_critic_kind(const std::string& text) {
  if (text == "quantile") return CriticKind::Quantile;
  if (text == "mean") return CriticKind::Mean;
  throw std::invalid_argument("parse_critic_kind: unrecognized kind '" + text +
                              "'");
}

std::string reward_loss_kind_name(RewardLossKind kind) {
  return kind == RewardLossKind::Fsd ? "fsd" : "mean";
}

RewardLossKind parse_reward_loss_kind(const std::string& text) {
  if (text == "fsd") return RewardLossKind::Fsd;
  if (text == "mean") return RewardLossKind::Mean;
  throw std::invalid_argument("parse_reward_loss_kind: unrecognized kind '" +
                              text + "'");
}

void IrlConfig::validate() const {
  if (!(eta_critic > 0.0) || !(eta_reward > 0.0)) {
    throw std::invalid_argument("IrlConfig: step sizes must be > 0");
  }
  if (return_samples < 2) {
    throw std::invalid_argument("IrlConfig: return_samples must be >= 2");
  }
  if (iterations < 0) {
    throw std::invalid_argument("IrlConfig: iterations must be >= 0");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("IrlConfig: batch_size must be >= 1");
  }
  if (horizon < 1) {
    throw std::invalid_argument("IrlConfig: horizon must be >= 1");
  }
  if (n_quantiles < 1) {
    throw std::invalid_argument("IrlConfig: n_quantiles must be >= 1");
  }
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("IrlConfig: kappa must be > 0");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("IrlConfig: gamma must lie in [0, 1)");
  }
  if (!(r_min < r_max)) {
    throw std::invalid_argument("IrlConfig: need r_min < r_max");
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("IrlConfig: beta must be > 0");
  }
  if (kl_weight < 0.0) {
    throw std::invalid_argument("IrlConfig: kl_weight must be >= 0");
  }
  if (critic_steps_per_iter < 0) {
    throw std::invalid_argument("IrlConfig: critic_steps_per_iter must be >= 0");
  }
  if (kl_mc_samples < 1) {
    throw std::invalid_argument("IrlConfig: kl_mc_samples must be >= 1");
  }
  if (off_support_penalty < 0.0) {
    throw std::invalid_argument("IrlConfig: off_support_penalty must be >= 0");
  }
  if (state_coupling < 0.0 || state_coupling >= 1.0) {
    throw std::invalid_argument("IrlConfig: state_coupling must lie in [0, 1)");
  }
}

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("TrainLog::save_csv: cannot open '" + path + "'");
  }
  out << "iteration,fsd_violation,kl_term,critic_loss,policy_entropy,"
         "drm_policy_return\n";
  for (const TrainRecord& rec : records) {
    out << rec.iteration << "," << format_double(rec.fsd_violation) << ","
        << format_double(rec.kl_term) << "," << format_double(rec.critic_loss)
        << "," << format_double(rec.policy_entropy) << ","
        << format_double(rec.drm_policy_return) << "\n";
  }
  if (!out.good()) {
    throw std::runtime_error("TrainLog::save_csv: write to '" + path +
                             "' failed");
  }
}

double path_value(const ReturnPath& path, const RewardModel& model) {
  double acc = 0.0;
  for (const ReturnStep& step : path.steps) {
    acc += step.coeff * model.sample(step.s, step.a, step.eps0, step.eps1);
  }
  return acc;
}

std::vector<double> batch_values(const ReturnBatch& batch,
                                 const RewardModel& model) {
  std::vector<double> values;
  values.reserve(batch.paths.size());
  for (const ReturnPath& path : batch.paths) {
    values.push_back(path_value(path, model));
  }
  return values;
}

std::pair<ReturnBatch, ReturnBatch> sample_returns_offline(
    const DemoSet& demos, const RiskPolicy& policy, const RewardModel& model,
    double gamma, int horizon, int n_samples, Rng& rng) {
  if (demos.trajectories.empty()) {
    throw std::invalid_argument("sample_returns_offline: no trajectories");
  }
  if (horizon < 1 || n_samples < 1) {
    throw std::invalid_argument(
        "sample_returns_offline: horizon and sample count must be >= 1");
  }
  (void)model;
  ReturnBatch z_pi, z_e;
  z_pi.paths.resize(static_cast<std::size_t>(n_samples));
  z_e.paths.resize(static_cast<std::size_t>(n_samples));
  const int n_traj = static_cast<int>(demos.trajectories.size());
  for (int m = 0; m < n_samples; ++m) {
    const Trajectory& traj =
        demos.trajectories[static_cast<std::size_t>(rng.below(n_traj))];
    const int steps = std::min<int>(traj.length(), horizon);
    ReturnPath& expert_path = z_e.paths[static_cast<std::size_t>(m)];
    ReturnPath& policy_path = z_pi.paths[static_cast<std::size_t>(m)];
    expert_path.steps.reserve(static_cast<std::size_t>(steps));
    policy_path.steps.reserve(static_cast<std::size_t>(steps));
    double coeff = 1.0;
    for (int t = 0; t < steps; ++t) {
      const auto [s, a_expert] = traj.steps[static_cast<std::size_t>(t)];
      const auto [ee0, ee1] = rng.normal_pair();
      expert_path.steps.push_back({s, a_expert, coeff, ee0, ee1});
      const int a_policy = policy.act(s, rng);
      const auto [pe0, pe1] = rng.normal_pair();
      policy_path.steps.push_back({s, a_policy, coeff, pe0, pe1});
      coeff *= gamma;
    }
  }
  return {std::move(z_pi), std::move(z_e)};
}

KlBatch make_kl_batch(std::span<const std::pair<int, int>> pairs,
                      int n_actions, int n_mc, RewardKind kind, Rng& rng) {
  KlBatch batch;
  batch.cells.reserve(pairs.size());
  for (const auto& [s, a] : pairs) {
    batch.cells.push_back(s * n_actions + a);
  }
  batch.n_mc = n_mc;
  if (kind == RewardKind::SkewNormal) {
    batch.noise.reserve(pairs.size() * static_cast<std::size_t>(n_mc));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (int k = 0; k < n_mc; ++k) {
        batch.noise.push_back(rng.normal_pair());
      }
    }
  }
  return batch;
}

namespace {

struct EvaluatedPath {
  double value = 0.0;
  std::vector<RewardGrad> step_grads;
};

EvaluatedPath evaluate_path(const ReturnPath& path, const RewardModel& model) {
  EvaluatedPath out;
  out.step_grads.resize(path.steps.size());
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const ReturnStep& step = path.steps[i];
    RewardGrad g;
    out.value += step.coeff * model.sample(step.s, step.a, step.eps0,
                                           step.eps1, &g);
    out.step_grads[i] = g;
  }
  return out;
}

void accumulate_path_grads(const ReturnPath& path, const EvaluatedPath& eval,
                           double weight, int n_actions,
                           std::vector<RewardGrad>& grads) {
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const ReturnStep& step = path.steps[i];
    const RewardGrad& g = eval.step_grads[i];
    RewardGrad& target =
        grads[static_cast<std::size_t>(step.s * n_actions + step.a)];
    const double w = weight * step.coeff;
    target.d_raw_loc += w * g.d_raw_loc;
    target.d_raw_scale += w * g.d_raw_scale;
    target.d_raw_alpha += w * g.d_raw_alpha;
  }
}

/// Stable argsort by (value, index); the index tiebreak fixes the
/// subgradient choice at ties.
std::vector<int> rank_order(const std::vector<EvaluatedPath>& evals) {
  std::vector<int> order(evals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    return evals[static_cast<std::size_t>(lhs)].value <
           evals[static_cast<std::size_t>(rhs)].value;
  });
  return order;
}

void add_kl_term(const RewardModel& model, double kl_weight,
                 const KlBatch& kl_batch, RewardLossResult& result) {
  if (kl_batch.cells.empty()) return;
  const int n_actions = model.n_actions();
  const double inv_b = 1.0 / static_cast<double>(kl_batch.cells.size());
  double kl_acc = 0.0;
  for (std::size_t i = 0; i < kl_batch.cells.size(); ++i) {
    const int cell = kl_batch.cells[i];
    const int s = cell / n_actions;
    const int a = cell % n_actions;
    std::span<const std::pair<double, double>> noise;
    if (!kl_batch.noise.empty()) {
      noise = std::span<const std::pair<double, double>>(
          kl_batch.noise.data() + i * static_cast<std::size_t>(kl_batch.n_mc),
          static_cast<std::size_t>(kl_batch.n_mc));
    }
    RewardGrad g;
    kl_acc += model.kl_estimate(s, a, noise, &g);
    RewardGrad& target = result.grads[static_cast<std::size_t>(cell)];
    const double w = kl_weight * inv_b;
    target.d_raw_loc += w * g.d_raw_loc;
    target.d_raw_scale += w * g.d_raw_scale;
    target.d_raw_alpha += w * g.d_raw_alpha;
  }
  result.kl_term = kl_acc * inv_b;
  result.loss += kl_weight * result.kl_term;
}

std::vector<EvaluatedPath> evaluate_batch(const ReturnBatch& batch,
                                          const RewardModel& model) {
  std::vector<EvaluatedPath> evals;
  evals.reserve(batch.paths.size());
  for (const ReturnPath& path : batch.paths) {
    evals.push_back(evaluate_path(path, model));
  }
  return evals;
}

}  // namespace

RewardLossResult reward_loss_fsd(const ReturnBatch& z_pi,
                                 const ReturnBatch& z_e,
                                 const RewardModel& model, double kl_weight,
                                 const KlBatch& kl_batch) {
  if (z_pi.size() != z_e.size() || z_pi.size() == 0) {
    throw std::invalid_argument(
        "reward_loss_fsd: sample counts must match and be positive");
  }
  RewardLossResult result;
  result.grads.assign(static_cast<std::size_t>(model.n_pairs()), RewardGrad{});

  const std::vector<EvaluatedPath> pi_evals = evaluate_batch(z_pi, model);
  const std::vector<EvaluatedPath> e_evals = evaluate_batch(z_e, model);
  const std::vector<int> pi_order = rank_order(pi_evals);
  const std::vector<int> e_order = rank_order(e_evals);

  const int m = z_pi.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  const int n_actions = model.n_actions();
  for (int rank = 0; rank < m; ++rank) {
    const int pi_idx = pi_order[static_cast<std::size_t>(rank)];
    const int e_idx = e_order[static_cast<std::size_t>(rank)];
    const double diff = pi_evals[static_cast<std::size_t>(pi_idx)].value -
                        e_evals[static_cast<std::size_t>(e_idx)].value;
    if (diff > 0.0) {
      result.data_term += diff * inv_m;
      accumulate_path_grads(z_pi.paths[static_cast<std::size_t>(pi_idx)],
                            pi_evals[static_cast<std::size_t>(pi_idx)], inv_m,
                            n_actions, result.grads);
      accumulate_path_grads(z_e.paths[static_cast<std::size_t>(e_idx)],
                            e_evals[static_cast<std::size_t>(e_idx)], -inv_m,
                            n_actions, result.grads);
    }
  }
  result.loss = result.data_term;
  add_kl_term(model, kl_weight, kl_batch, result);
  return result;
}

RewardLossResult reward_loss_mean(const ReturnBatch& z_pi,
                                  const ReturnBatch& z_e,
                                  const RewardModel& model, double kl_weight,
                                  const KlBatch& kl_batch) {
  if (z_pi.size() != z_e.size() || z_pi.size() == 0) {
    throw std::invalid_argument(
        "reward_loss_mean: sample counts must match and be positive");
  }
  RewardLossResult result;
  result.grads.assign(static_cast<std::size_t>(model.n_pairs()), RewardGrad{});

  const std::vector<EvaluatedPath> pi_evals = evaluate_batch(z_pi, model);
  const std::vector<EvaluatedPath> e_evals = evaluate_batch(z_e, model);

  const double inv_m = 1.0 / static_cast<double>(z_pi.size());
  const int n_actions = model.n_actions();
  double mean_pi = 0.0, mean_e = 0.0;
  for (int i = 0; i < z_pi.size(); ++i) {
    mean_pi += pi_evals[static_cast<std::size_t>(i)].value * inv_m;
    mean_e += e_evals[static_cast<std::size_t>(i)].value * inv_m;
    accumulate_path_grads(z_pi.paths[static_cast<std::size_t>(i)],
                          pi_evals[static_cast<std::size_t>(i)], inv_m,
                          n_actions, result.grads);
    accumulate_path_grads(z_e.paths[static_cast<std::size_t>(i)],
                          e_evals[static_cast<std::size_t>(i)], -inv_m,
                          n_actions, result.grads);
  }
  result.data_term = mean_pi - mean_e;
  result.loss = result.data_term;
  add_kl_term(model, kl_weight, kl_batch, result);
  return result;
}

TrainResult train(int n_states, int n_actions, const DemoSet& demos,
                  const IrlConfig& config) {
  config.validate();
  demos.validate();
  if (demos.n_states != n_states || demos.n_actions != n_actions) {
    throw std::invalid_argument("train: demos do not match the MDP shape");
  }

  Rng rng(config.seed);
  TrainResult result{
      RewardModel(config.reward_kind, n_states, n_actions, config.r_min,
                  config.r_max, config.init_sigma),
      RiskPolicy(n_states, n_actions),
      QuantileCritic(n_states, n_actions, config.n_quantiles),
      MeanCritic(n_states, n_actions),
      TrainLog{}};
  result.log.records.reserve(static_cast<std::size_t>(config.iterations));

  // Expert steps that have a successor, for critic transitions.
  std::vector<std::pair<int, int>> pool;  // (trajectory, t)
  for (int traj_idx = 0;
       traj_idx < static_cast<int>(demos.trajectories.size()); ++traj_idx) {
    const Trajectory& traj =
        demos.trajectories[static_cast<std::size_t>(traj_idx)];
    for (int t = 0; t + 1 < traj.length(); ++t) {
      pool.emplace_back(traj_idx, t);
    }
  }

  const auto rebuild_policy = [&]() {
    result.policy =
        config.critic_kind == CriticKind::Quantile
            ? RiskPolicy::from_quantile_critic(result.critic,
                                               config.distortion, config.beta)
            : RiskPolicy::from_mean_critic(result.mean_critic, config.beta);
  };
  rebuild_policy();

  std::vector<std::pair<int, int>> minibatch(
      static_cast<std::size_t>(config.batch_size));
  std::vector<std::pair<int, int>> kl_pairs;
  kl_pairs.reserve(static_cast<std::size_t>(config.batch_size));
  std::vector<Transition> transitions(
      static_cast<std::size_t>(config.batch_size));
  Adam adam(static_cast<std::size_t>(n_states) *
            static_cast<std::size_t>(n_actions) * 3);
  std::vector<bool> updated_pairs(static_cast<std::size_t>(n_states) *
                                      static_cast<std::size_t>(n_actions),
                                  false);
  std::vector<bool> visited_state(static_cast<std::size_t>(n_states), false);
  for (const Trajectory& traj : demos.trajectories) {
    for (const auto& [s, a] : traj.steps) {
      visited_state[static_cast<std::size_t>(s)] = true;
    }
  }

  const auto check_finite = [&](int iteration, double value,
                                const char* term) {
    if (!std::isfinite(value)) {
      throw std::runtime_error("train: iteration " +
                               std::to_string(iteration) + ": " + term +
                               " is not finite");
    }
  };

  for (int k = 0; k < config.iterations; ++k) {
    TrainRecord rec;
    rec.iteration = k;

    // (1) expert mini-batch; the KL regularizer acts once per distinct
    // (s,a) in the batch so visitation counts do not multiply the prior's
    // pull.
    const bool have_pool = !pool.empty();
    kl_pairs.clear();
    for (int b = 0; b < config.batch_size; ++b) {
      const auto [traj_idx, t] =
          have_pool ? pool[static_cast<std::size_t>(
                          rng.below(static_cast<int>(pool.size())))]
                    : std::pair<int, int>{rng.below(static_cast<int>(
                                              demos.trajectories.size())),
                                          0};
      minibatch[static_cast<std::size_t>(b)] = {traj_idx, t};
      kl_pairs.push_back(demos.trajectories[static_cast<std::size_t>(traj_idx)]
                             .steps[static_cast<std::size_t>(t)]);
    }
    std::sort(kl_pairs.begin(), kl_pairs.end());
    kl_pairs.erase(std::unique(kl_pairs.begin(), kl_pairs.end()),
                   kl_pairs.end());

    // (2) offline return samples under the current policy and model
    auto [z_pi, z_e] = sample_returns_offline(
        demos, result.policy, result.model, config.gamma, config.horizon,
        config.return_samples, rng);

    // (3) critic passes on mini-batch transitions; next actions follow the
    // current policy, rewards are drawn from the current model.
    double critic_loss = 0.0;
    if (have_pool && config.critic_steps_per_iter > 0) {
      for (int pass = 0; pass < config.critic_steps_per_iter; ++pass) {
        for (int b = 0; b < config.batch_size; ++b) {
          const auto [traj_idx, t] = minibatch[static_cast<std::size_t>(b)];
          const Trajectory& traj =
              demos.trajectories[static_cast<std::size_t>(traj_idx)];
          const auto [s, a] = traj.steps[static_cast<std::size_t>(t)];
          const int s_next = traj.steps[static_cast<std::size_t>(t) + 1].first;
          const auto [e0, e1] = rng.normal_pair();
          const double r = result.model.sample(s, a, e0, e1);
          const int a_next = result.policy.act(s_next, rng);
          transitions[static_cast<std::size_t>(b)] = {s, a, r, s_next, a_next};
        }
        if (config.critic_kind == CriticKind::Quantile) {
          critic_loss = qr_td_update_batch(result.critic, transitions,
                                           config.gamma, config.kappa,
                                           config.eta_critic);
        } else {
          critic_loss = mean_td_update_batch(result.mean_critic, transitions,
                                             config.gamma, config.eta_critic);
        }
        for (const Transition& t : transitions) {
          updated_pairs[static_cast<std::size_t>(t.s * n_actions + t.a)] =
              true;
        }
      }
      // Off-support fallback: actions the offline data never updates are
      // valued pessimistically at the state's average estimate minus a
      // margin. This is the tabular stand-in for a function approximator
      // generalizing across actions; without it untrained actions sit at
      // the initial value and the softmax either collapses onto the
      // demonstration support or ignores it entirely.
      for (int s = 0; s < n_states; ++s) {
        int known = 0;
        for (int a = 0; a < n_actions; ++a) {
          if (updated_pairs[static_cast<std::size_t>(s * n_actions + a)]) {
            ++known;
          }
        }
        if (known == 0 || known == n_actions) continue;
        if (config.critic_kind == CriticKind::Quantile) {
          std::vector<double> state_mean(
              static_cast<std::size_t>(config.n_quantiles), 0.0);
          for (int a = 0; a < n_actions; ++a) {
            if (!updated_pairs[static_cast<std::size_t>(s * n_actions + a)]) {
              continue;
            }
            const auto atoms = result.critic.atoms(s, a);
            for (int i = 0; i < config.n_quantiles; ++i) {
              state_mean[static_cast<std::size_t>(i)] +=
                  atoms[static_cast<std::size_t>(i)] / known;
            }
          }
          for (int a = 0; a < n_actions; ++a) {
            if (updated_pairs[static_cast<std::size_t>(s * n_actions + a)]) {
              continue;
            }
            auto atoms = result.critic.atoms(s, a);
            for (int i = 0; i < config.n_quantiles; ++i) {
              atoms[static_cast<std::size_t>(i)] =
                  state_mean[static_cast<std::size_t>(i)] -
                  config.off_support_penalty;
            }
          }
        } else {
          double state_mean = 0.0;
          for (int a = 0; a < n_actions; ++a) {
            if (updated_pairs[static_cast<std::size_t>(s * n_actions + a)]) {
              state_mean += result.mean_critic.value(s, a) / known;
            }
          }
          for (int a = 0; a < n_actions; ++a) {
            if (!updated_pairs[static_cast<std::size_t>(s * n_actions + a)]) {
              result.mean_critic.set_value(
                  s, a, state_mean - config.off_support_penalty);
            }
          }
        }
      }
    }
    rec.critic_loss = critic_loss;

    // (4) policy is the KKT softmax of the critic's risk measure
    rebuild_policy();
    rec.policy_entropy = result.policy.mean_entropy();

    // (5) reward update (Adam at eta_reward)
    const KlBatch kl_batch =
        make_kl_batch(kl_pairs, n_actions, config.kl_mc_samples,
                      config.reward_kind, rng);
    const RewardLossResult loss =
        config.reward_loss == RewardLossKind::Fsd
            ? reward_loss_fsd(z_pi, z_e, result.model, config.kl_weight,
                              kl_batch)
            : reward_loss_mean(z_pi, z_e, result.model, config.kl_weight,
                               kl_batch);
    adam.begin_step();
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) {
        const auto cell = static_cast<std::size_t>(s * n_actions + a);
        const RewardGrad& g = loss.grads[cell];
        result.model.set_raw(
            s, a,
            result.model.raw_loc(s, a) -
                adam.delta(cell * 3, g.d_raw_loc, config.eta_reward),
            result.model.raw_scale(s, a) -
                adam.delta(cell * 3 + 1, g.d_raw_scale, config.eta_reward),
            result.model.raw_alpha(s, a) -
                adam.delta(cell * 3 + 2, g.d_raw_alpha, config.eta_reward));
      }
    }
    // Per-state parameter coupling: every action's parameters shrink a
    // little toward the state mean at states the demos visit, standing in
    // for a function approximator's generalization across actions. Without
    // it the one-sided FSD loss freezes once the expert dominates with
    // slack, because probed alternatives stay wherever the ratchet left
    // them.
    if (config.state_coupling > 0.0) {
      for (int s = 0; s < n_states; ++s) {
        if (!visited_state[static_cast<std::size_t>(s)]) continue;
        double mean_loc = 0.0, mean_scale = 0.0, mean_alpha = 0.0;
        for (int a = 0; a < n_actions; ++a) {
          mean_loc += result.model.raw_loc(s, a);
          mean_scale += result.model.raw_scale(s, a);
          mean_alpha += result.model.raw_alpha(s, a);
        }
        mean_loc /= n_actions;
        mean_scale /= n_actions;
        mean_alpha /= n_actions;
        const double keep = 1.0 - config.state_coupling;
        for (int a = 0; a < n_actions; ++a) {
          result.model.set_raw(
              s, a,
              keep * result.model.raw_loc(s, a) +
                  config.state_coupling * mean_loc,
              keep * result.model.raw_scale(s, a) +
                  config.state_coupling * mean_scale,
              keep * result.model.raw_alpha(s, a) +
                  config.state_coupling * mean_alpha);
        }
      }
    }
    rec.fsd_violation = loss.data_term;
    rec.kl_term = loss.kl_term;
    rec.drm_policy_return =
        drm(QuantileDistribution(batch_values(z_pi, result.model)),
            config.distortion);

    check_finite(k, rec.fsd_violation, "fsd_violation");
    check_finite(k, rec.kl_term, "kl_term");
    check_finite(k, rec.critic_loss, "critic_loss");
    check_finite(k, rec.policy_entropy, "policy_entropy");
    check_finite(k, rec.drm_policy_return, "drm_policy_return");
    if ((k + 1) % 100 == 0 && !result.model.all_finite()) {
      throw std::runtime_error("train: iteration " + std::to_string(k) +
                               ": reward parameters are not finite");
    }
    result.log.records.push_back(rec);
  }
  return result;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    throw std::invalid_argument("pearson: inputs must match and be non-empty");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double denom = std::sqrt(sxx * syy);
  return denom > 0.0 ? sxy / denom : 0.0;
}

EvalReport evaluate(const RewardModel& model, const RiskPolicy& policy,
                    const TabularMdp& mdp, const TrueRewardSpec* true_spec,
                    const DemoSet& demos, const EvalSettings& settings) {
  demos.validate();
  EvalReport report;
  Rng rng(settings.seed);

  // Demo coverage.
  std::vector<int> visits(static_cast<std::size_t>(model.n_pairs()), 0);
  std::vector<std::vector<double>> signals_by_pair(
      static_cast<std::size_t>(model.n_pairs()));
  for (const Trajectory& traj : demos.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      const auto [s, a] = traj.steps[static_cast<std::size_t>(t)];
      const auto cell = static_cast<std::size_t>(s * model.n_actions() + a);
      ++visits[cell];
      if (traj.has_signals()) {
        signals_by_pair[cell].push_back(
            traj.signals[static_cast<std::size_t>(t)]);
      }
    }
  }

  double w1_acc = 0.0;
  std::vector<double> learned_means, ref_means;
  for (int s = 0; s < model.n_states(); ++s) {
    for (int a = 0; a < model.n_actions(); ++a) {
      const auto cell = static_cast<std::size_t>(s * model.n_actions() + a);
      if (visits[cell] == 0) continue;
      PairEval pe;
      pe.s = s;
      pe.a = a;
      pe.visits = visits[cell];
      const auto [lm, lv] = model.analytic_moments(s, a);
      pe.learned_mean = lm;
      pe.learned_sd = std::sqrt(std::max(lv, 0.0));

      // Reference distribution: true spec when available, else recorded
      // signals at this pair.
      std::vector<double> ref_draws;
      if (true_spec != nullptr) {
        const RewardSpec& spec = true_spec->at(s, a);
        pe.ref_mean = spec.mean();
        pe.ref_sd = std::sqrt(std::max(spec.variance(), 0.0));
        ref_draws.reserve(static_cast<std::size_t>(settings.ref_samples));
        for (int i = 0; i < settings.ref_samples; ++i) {
          ref_draws.push_back(spec.sample(rng));
        }
      } else if (!signals_by_pair[cell].empty()) {
        ref_draws = signals_by_pair[cell];
        double m = 0.0;
        for (double v : ref_draws) m += v;
        m /= static_cast<double>(ref_draws.size());
        double var = 0.0;
        for (double v : ref_draws) var += (v - m) * (v - m);
        var /= static_cast<double>(ref_draws.size());
        pe.ref_mean = m;
        pe.ref_sd = std::sqrt(var);
      } else {
        continue;  // no reference available for this pair
      }

      std::vector<double> learned_draws(
          static_cast<std::size_t>(settings.ref_samples));
      for (double& v : learned_draws) {
        const auto [e0, e1] = rng.normal_pair();
        v = model.sample(s, a, e0, e1);
      }
      const int atoms = std::min(settings.n_atoms,
                                 static_cast<int>(ref_draws.size()));
      pe.w1 = wasserstein1(
          empirical_quantiles(learned_draws, atoms),
          empirical_quantiles(ref_draws, atoms));

      w1_acc += pe.w1;
      learned_means.push_back(pe.learned_mean);
      ref_means.push_back(pe.ref_mean);
      report.pairs.push_back(pe);
    }
  }

  if (report.pairs.empty()) {
    report.restricted = true;
    return report;
  }
  report.mean_w1 = w1_acc / static_cast<double>(report.pairs.size());
  report.pearson_mean = learned_means.size() >= 2
                            ? pearson(learned_means, ref_means)
                            : 1.0;

  // On-environment policy returns under the true reward.
  if (true_spec != nullptr) {
    std::vector<double> returns(
        static_cast<std::size_t>(settings.eval_rollouts));
    for (int i = 0; i < settings.eval_rollouts; ++i) {
      Rng episode_rng = rng.split(static_cast<std::uint64_t>(i));
      const Trajectory traj = rollout(mdp, policy.matrix(), *true_spec,
                                      settings.horizon, episode_rng);
      returns[static_cast<std::size_t>(i)] =
          discounted_signal_return(traj, mdp.gamma(), settings.horizon);
    }
    const QuantileDistribution policy_dist =
        empirical_quantiles(returns, settings.n_atoms);
    report.policy_return_mean = policy_dist.mean();
    report.policy_return_cvar =
        drm(policy_dist, Distortion::cvar(settings.cvar_alpha));

    std::vector<double> expert_returns;
    for (const Trajectory& traj : demos.trajectories) {
      if (traj.has_signals()) {
        expert_returns.push_back(
            discounted_signal_return(traj, mdp.gamma(), settings.horizon));
      }
    }
    if (!expert_returns.empty()) {
      report.has_expert_returns = true;
      report.expert_return_mean = 0.0;
      for (double v : expert_returns) report.expert_return_mean += v;
      report.expert_return_mean /=
          static_cast<double>(expert_returns.size());
      const int atoms = std::min<int>(settings.n_atoms,
                                      static_cast<int>(expert_returns.size()));
      report.fsd_policy_over_expert = fsd_violation_quantile(
          empirical_quantiles(returns, atoms),
          empirical_quantiles(expert_returns, atoms));
    }
  }
  return report;
}

}  // namespace distirl
