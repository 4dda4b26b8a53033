#include "distirl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace distirl {

namespace {

constexpr double kProbTol = 1e-9;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_distribution(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (p < 0.0) {
      throw std::invalid_argument(what + ": negative probability entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    throw std::invalid_argument(what + ": probabilities sum to " +
                                format_double(sum) + ", expected 1");
  }
}

}  // namespace

RewardSpec RewardSpec::deterministic(double value) {
  return {Kind::Deterministic, value, 0.0, 0.0};
}

RewardSpec RewardSpec::gaussian(double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("RewardSpec::gaussian: sigma must be > 0");
  }
  return {Kind::Gaussian, mu, sigma, 0.0};
}

RewardSpec RewardSpec::skew_normal(double loc, double scale, double alpha) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("RewardSpec::skew_normal: scale must be > 0");
  }
  return {Kind::SkewNormal, loc, scale, alpha};
}

RewardSpec RewardSpec::bernoulli_penalty(double base, double p,
                                         double penalty) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(
        "RewardSpec::bernoulli_penalty: p must lie in [0, 1]");
  }
  return {Kind::BernoulliPenalty, base, p, penalty};
}

double RewardSpec::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Deterministic:
      return p0;
    case Kind::Gaussian:
      return p0 + p1 * rng.normal();
    case Kind::SkewNormal: {
      const auto [e0, e1] = rng.normal_pair();
      const double delta = p2 / std::sqrt(1.0 + p2 * p2);
      return p0 + p1 * (delta * std::abs(e0) +
                        std::sqrt(1.0 - delta * delta) * e1);
    }
    case Kind::BernoulliPenalty:
      return p0 - (rng.uniform() < p1 ? p2 : 0.0);
  }
  return 0.0;
}

double RewardSpec::mean() const {
  switch (kind) {
    case Kind::Deterministic:
      return p0;
    case Kind::Gaussian:
      return p0;
    case Kind::SkewNormal: {
      const double delta = p2 / std::sqrt(1.0 + p2 * p2);
      return p0 + p1 * delta * std::sqrt(2.0 / 3.141592653589793);
    }
    case Kind::BernoulliPenalty:
      return p0 - p1 * p2;
  }
  return 0.0;
}

double RewardSpec::variance() const {
  switch (kind) {
    case Kind::Deterministic:
      return 0.0;
    case Kind::Gaussian:
      return p1 * p1;
    case Kind::SkewNormal: {
      const double delta2 = p2 * p2 / (1.0 + p2 * p2);
      return p1 * p1 * (1.0 - 2.0 * delta2 / 3.141592653589793);
    }
    case Kind::BernoulliPenalty:
      return p2 * p2 * p1 * (1.0 - p1);
  }
  return 0.0;
}

std::string RewardSpec::to_string() const {
  char buf[128];
  switch (kind) {
    case Kind::Deterministic:
      std::snprintf(buf, sizeof(buf), "deterministic(%.17g)", p0);
      break;
    case Kind::Gaussian:
      std::snprintf(buf, sizeof(buf), "gaussian(%.17g,%.17g)", p0, p1);
      break;
    case Kind::SkewNormal:
      std::snprintf(buf, sizeof(buf), "skewnormal(%.17g,%.17g,%.17g)", p0, p1,
                    p2);
      break;
    case Kind::BernoulliPenalty:
      std::snprintf(buf, sizeof(buf), "bernoullipenalty(%.17g,%.17g,%.17g)",
                    p0, p1, p2);
      break;
  }
  return buf;
}

RewardSpec RewardSpec::parse(const std::string& text) {
  double a = 0.0, b = 0.0, c = 0.0;
  if (std::sscanf(text.c_str(), "deterministic(%lf)", &a) == 1) {
    return deterministic(a);
  }
  if (std::sscanf(text.c_str(), "gaussian(%lf,%lf)", &a, &b) == 2) {
    return gaussian(a, b);
  }
  if (std::sscanf(text.c_str(), "skewnormal(%lf,%lf,%lf)", &a, &b, &c) == 3) {
    return skew_normal(a, b, c);
  }
  if (std::sscanf(text.c_str(), "bernoullipenalty(%lf,%lf,%lf)", &a, &b, &c) ==
      3) {
    return bernoulli_penalty(a, b, c);
  }
  throw std::invalid_argument("RewardSpec::parse: unrecognized spec '" + text +
                              "'");
}

TrueRewardSpec::TrueRewardSpec(int n_states, int n_actions, RewardSpec fill)
    : n_states_(n_states),
      n_actions_(n_actions),
      specs_(static_cast<std::size_t>(n_states) *
                 static_cast<std::size_t>(n_actions),
             fill) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("TrueRewardSpec: shape must be positive");
  }
}

const RewardSpec& TrueRewardSpec::at(int s, int a) const {
  return specs_[static_cast<std::size_t>(s) *
                    static_cast<std::size_t>(n_actions_) +
                static_cast<std::size_t>(a)];
}

void TrueRewardSpec::set(int s, int a, RewardSpec spec) {
  specs_[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) +
         static_cast<std::size_t>(a)] = spec;
}

double sample_true_reward(const TrueRewardSpec& spec, int s, int a, Rng& rng) {
  if (s < 0 || s >= spec.n_states() || a < 0 || a >= spec.n_actions()) {
    throw std::invalid_argument("sample_true_reward: (s,a) out of range");
  }
  return spec.at(s, a).sample(rng);
}

TabularMdp::TabularMdp(int n_states, int n_actions,
                       std::vector<double> transition, double gamma,
                       std::vector<double> init_dist)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      gamma_(gamma),
      init_dist_(std::move(init_dist)) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("TabularMdp: shape must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
  }
  const auto expected = static_cast<std::size_t>(n_states) *
                        static_cast<std::size_t>(n_actions) *
                        static_cast<std::size_t>(n_states);
  if (transition_.size() != expected) {
    throw std::invalid_argument("TabularMdp: transition tensor has wrong size");
  }
  if (init_dist_.size() != static_cast<std::size_t>(n_states)) {
    throw std::invalid_argument("TabularMdp: init_dist has wrong size");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      check_distribution(transition_row(s, a),
                         "TabularMdp: transition row (" + std::to_string(s) +
                             "," + std::to_string(a) + ")");
    }
  }
  check_distribution(init_dist_, "TabularMdp: init_dist");
}

double TabularMdp::transition(int s, int a, int s_next) const {
  return transition_row(s, a)[static_cast<std::size_t>(s_next)];
}

std::span<const double> TabularMdp::transition_row(int s, int a) const {
  const auto offset = (static_cast<std::size_t>(s) *
                           static_cast<std::size_t>(n_actions_) +
                       static_cast<std::size_t>(a)) *
                      static_cast<std::size_t>(n_states_);
  return {transition_.data() + offset, static_cast<std::size_t>(n_states_)};
}

int TabularMdp::sample_next(int s, int a, Rng& rng) const {
  return rng.categorical(transition_row(s, a));
}

int TabularMdp::sample_initial(Rng& rng) const {
  return rng.categorical(init_dist_);
}

void DemoSet::validate() const {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("DemoSet: shape must be positive");
  }
  for (const Trajectory& traj : trajectories) {
    if (traj.steps.empty()) {
      throw std::invalid_argument("DemoSet: empty trajectory");
    }
    if (!traj.signals.empty() && traj.signals.size() != traj.steps.size()) {
      throw std::invalid_argument("DemoSet: signal count mismatch");
    }
    for (const auto& [s, a] : traj.steps) {
      if (s < 0 || s >= n_states || a < 0 || a >= n_actions) {
        throw std::invalid_argument("DemoSet: step index out of range");
      }
    }
  }
}

GridworldEnv build_gridworld(int width, int height, GridCell start,
                             const std::vector<GridGoal>& goals,
                             double step_cost, double slip_prob, double gamma,
                             bool goal_reward_on_entry) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("build_gridworld: grid must be non-empty");
  }
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) {
    throw std::invalid_argument("build_gridworld: slip_prob must lie in [0,1)");
  }
  const auto in_bounds = [&](GridCell c) {
    return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width;
  };
  if (!in_bounds(start)) {
    throw std::invalid_argument("build_gridworld: start cell out of bounds");
  }
  for (const GridGoal& g : goals) {
    if (!in_bounds(g.cell)) {
      throw std::invalid_argument("build_gridworld: goal cell out of bounds");
    }
  }

  const int n_states = width * height;
  const int n_actions = 4;  // up, down, left, right
  std::vector<bool> is_goal(static_cast<std::size_t>(n_states), false);
  for (const GridGoal& g : goals) {
    is_goal[static_cast<std::size_t>(grid_state(width, g.cell))] = true;
  }

  const int drow[4] = {-1, 1, 0, 0};
  const int dcol[4] = {0, 0, -1, 1};
  const auto move = [&](int s, int dir) {
    const GridCell c{s / width, s % width};
    const GridCell next{c.row + drow[dir], c.col + dcol[dir]};
    return in_bounds(next) ? grid_state(width, next) : s;
  };

  std::vector<double> transition(static_cast<std::size_t>(n_states) *
                                     static_cast<std::size_t>(n_actions) *
                                     static_cast<std::size_t>(n_states),
                                 0.0);
  const auto cell_of = [&](std::size_t s, std::size_t a, std::size_t s2) {
    return (s * static_cast<std::size_t>(n_actions) + a) *
               static_cast<std::size_t>(n_states) +
           s2;
  };
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      if (is_goal[static_cast<std::size_t>(s)]) {
        transition[cell_of(static_cast<std::size_t>(s),
                           static_cast<std::size_t>(a),
                           static_cast<std::size_t>(s))] = 1.0;
        continue;
      }
      transition[cell_of(static_cast<std::size_t>(s),
                         static_cast<std::size_t>(a),
                         static_cast<std::size_t>(move(s, a)))] +=
          1.0 - slip_prob;
      for (int other = 0; other < n_actions; ++other) {
        if (other == a) continue;
        transition[cell_of(static_cast<std::size_t>(s),
                           static_cast<std::size_t>(a),
                           static_cast<std::size_t>(move(s, other)))] +=
            slip_prob / 3.0;
      }
    }
  }

  std::vector<double> init(static_cast<std::size_t>(n_states), 0.0);
  init[static_cast<std::size_t>(grid_state(width, start))] = 1.0;

  TrueRewardSpec rewards(n_states, n_actions,
                         RewardSpec::deterministic(step_cost));
  for (const GridGoal& g : goals) {
    const int gs = grid_state(width, g.cell);
    if (goal_reward_on_entry) {
      for (int a = 0; a < n_actions; ++a) {
        rewards.set(gs, a, RewardSpec::deterministic(0.0));
      }
      for (int s = 0; s < n_states; ++s) {
        if (is_goal[static_cast<std::size_t>(s)]) continue;
        for (int a = 0; a < n_actions; ++a) {
          if (move(s, a) == gs) rewards.set(s, a, g.reward);
        }
      }
    } else {
      for (int a = 0; a < n_actions; ++a) {
        rewards.set(gs, a, g.reward);
      }
    }
  }

  return GridworldEnv{
      TabularMdp(n_states, n_actions, std::move(transition), gamma,
                 std::move(init)),
      std::move(rewards), width, height};
}

std::vector<double> occupancy_measure(const TabularMdp& mdp,
                                      std::span<const double> policy) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  if (policy.size() != static_cast<std::size_t>(S) * static_cast<std::size_t>(A)) {
    throw std::invalid_argument("occupancy_measure: policy has wrong shape");
  }
  for (int s = 0; s < S; ++s) {
    check_distribution(policy.subspan(static_cast<std::size_t>(s) *
                                          static_cast<std::size_t>(A),
                                      static_cast<std::size_t>(A)),
                       "occupancy_measure: policy row " + std::to_string(s));
  }

  // State-to-state kernel under the policy.
  std::vector<double> kernel(static_cast<std::size_t>(S) *
                                 static_cast<std::size_t>(S),
                             0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double pa = policy[static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(A) +
                               static_cast<std::size_t>(a)];
      if (pa == 0.0) continue;
      const auto row = mdp.transition_row(s, a);
      for (int s2 = 0; s2 < S; ++s2) {
        kernel[static_cast<std::size_t>(s) * static_cast<std::size_t>(S) +
               static_cast<std::size_t>(s2)] +=
            pa * row[static_cast<std::size_t>(s2)];
      }
    }
  }

  const double gamma = mdp.gamma();
  std::vector<double> p(mdp.init_dist().begin(), mdp.init_dist().end());
  std::vector<double> acc(static_cast<std::size_t>(S), 0.0);
  std::vector<double> next(static_cast<std::size_t>(S), 0.0);
  double weight = 1.0;
  while (weight >= 1e-10) {
    for (int s = 0; s < S; ++s) {
      acc[static_cast<std::size_t>(s)] += weight * p[static_cast<std::size_t>(s)];
    }
    weight *= gamma;
    if (weight < 1e-10) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      const double ps = p[static_cast<std::size_t>(s)];
      if (ps == 0.0) continue;
      for (int s2 = 0; s2 < S; ++s2) {
        next[static_cast<std::size_t>(s2)] +=
            ps * kernel[static_cast<std::size_t>(s) *
                            static_cast<std::size_t>(S) +
                        static_cast<std::size_t>(s2)];
      }
    }
    p.swap(next);
  }

  std::vector<double> d(static_cast<std::size_t>(S) *
                            static_cast<std::size_t>(A),
                        0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      d[static_cast<std::size_t>(s) * static_cast<std::size_t>(A) +
        static_cast<std::size_t>(a)] =
          (1.0 - gamma) * acc[static_cast<std::size_t>(s)] *
          policy[static_cast<std::size_t>(s) * static_cast<std::size_t>(A) +
                 static_cast<std::size_t>(a)];
    }
  }
  return d;
}

double expected_return(const TabularMdp& mdp, std::span<const double> policy,
                       std::span<const double> mean_rewards) {
  const std::vector<double> d = occupancy_measure(mdp, policy);
  if (mean_rewards.size() != d.size()) {
    throw std::invalid_argument("expected_return: mean_rewards has wrong shape");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) acc += d[i] * mean_rewards[i];
  return acc / (1.0 - mdp.gamma());
}

Trajectory rollout(const TabularMdp& mdp, std::span<const double> policy,
                   const TrueRewardSpec& spec, int horizon, Rng& rng) {
  if (horizon < 1) {
    throw std::invalid_argument("rollout: horizon must be >= 1");
  }
  const int A = mdp.n_actions();
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(horizon));
  traj.signals.reserve(static_cast<std::size_t>(horizon));
  int s = mdp.sample_initial(rng);
  for (int t = 0; t < horizon; ++t) {
    const auto row = policy.subspan(static_cast<std::size_t>(s) *
                                        static_cast<std::size_t>(A),
                                    static_cast<std::size_t>(A));
    const int a = rng.categorical(row);
    traj.steps.emplace_back(s, a);
    traj.signals.push_back(spec.at(s, a).sample(rng));
    s = mdp.sample_next(s, a, rng);
  }
  return traj;
}

double discounted_signal_return(const Trajectory& traj, double gamma,
                                int horizon) {
  if (!traj.has_signals()) {
    throw std::invalid_argument("discounted_signal_return: no signals");
  }
  const int steps = std::min<int>(traj.length(), horizon);
  double acc = 0.0;
  double weight = 1.0;
  for (int t = 0; t < steps; ++t) {
    acc += weight * traj.signals[static_cast<std::size_t>(t)];
    weight *= gamma;
  }
  return acc;
}

void save_demos(const DemoSet& demos, const std::string& path) {
  demos.validate();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_demos: cannot open '" + path +
                             "' for writing");
  }
  out << "n_states " << demos.n_states << " n_actions " << demos.n_actions
      << "\n";
  for (const auto& [key, value] : demos.metadata) {
    out << "meta " << key << " " << value << "\n";
  }
  for (std::size_t episode = 0; episode < demos.trajectories.size();
       ++episode) {
    const Trajectory& traj = demos.trajectories[episode];
    for (int t = 0; t < traj.length(); ++t) {
      const auto& [s, a] = traj.steps[static_cast<std::size_t>(t)];
      out << episode << " " << t << " " << s << " " << a;
      if (traj.has_signals()) {
        out << " " << format_double(traj.signals[static_cast<std::size_t>(t)]);
      }
      out << "\n";
    }
  }
  if (!out.good()) {
    throw std::runtime_error("save_demos: write to '" + path + "' failed");
  }
}

DemoSet load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_demos: cannot open '" + path + "'");
  }
  DemoSet demos;
  std::string line;
  int line_no = 0;

  const auto parse_error = [&](const std::string& message) {
    return std::runtime_error("load_demos: " + path + ":" +
                              std::to_string(line_no) + ": " + message);
  };

  if (!std::getline(in, line)) {
    throw std::runtime_error("load_demos: '" + path + "' is empty");
  }
  line_no = 1;
  {
    std::istringstream header(line);
    std::string tag_states, tag_actions;
    if (!(header >> tag_states >> demos.n_states >> tag_actions >>
          demos.n_actions) ||
        tag_states != "n_states" || tag_actions != "n_actions") {
      throw parse_error("expected header 'n_states <int> n_actions <int>'");
    }
  }
  if (demos.n_states < 1 || demos.n_actions < 1) {
    throw parse_error("header shape must be positive");
  }

  int current_episode = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("meta ", 0) == 0) {
      const std::size_t key_start = 5;
      const std::size_t key_end = line.find(' ', key_start);
      if (key_end == std::string::npos) {
        throw parse_error("metadata line needs 'meta <key> <value>'");
      }
      demos.metadata[line.substr(key_start, key_end - key_start)] =
          line.substr(key_end + 1);
      continue;
    }
    std::istringstream record(line);
    int episode = 0, t = 0, s = 0, a = 0;
    if (!(record >> episode >> t >> s >> a)) {
      throw parse_error("expected 'episode t state action [signal]'");
    }
    double signal = 0.0;
    bool has_signal = false;
    if (record >> signal) has_signal = true;
    std::string trailing;
    if (record >> trailing) {
      throw parse_error("unexpected trailing field '" + trailing + "'");
    }
    if (s < 0 || s >= demos.n_states) {
      throw parse_error("state " + std::to_string(s) + " out of range [0," +
                        std::to_string(demos.n_states) + ")");
    }
    if (a < 0 || a >= demos.n_actions) {
      throw parse_error("action " + std::to_string(a) + " out of range [0," +
                        std::to_string(demos.n_actions) + ")");
    }
    if (episode != current_episode) {
      if (episode != current_episode + 1 || t != 0) {
        throw parse_error("episodes must be contiguous and start at t=0");
      }
      current_episode = episode;
      demos.trajectories.emplace_back();
    } else if (t != demos.trajectories.back().length()) {
      throw parse_error("step index " + std::to_string(t) +
                        " breaks the per-episode ordering");
    }
    Trajectory& traj = demos.trajectories.back();
    if (!traj.steps.empty() && has_signal != traj.has_signals()) {
      throw parse_error("mixed signal/no-signal records within one episode");
    }
    traj.steps.emplace_back(s, a);
    if (has_signal) traj.signals.push_back(signal);
  }
  demos.validate();
  return demos;
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_mdp: cannot open '" + path + "'");
  }
  out << "n_states " << mdp.n_states() << " n_actions " << mdp.n_actions()
      << " gamma " << format_double(mdp.gamma()) << "\n";
  for (int s = 0; s < mdp.n_states(); ++s) {
    const double p = mdp.init_dist()[static_cast<std::size_t>(s)];
    if (p != 0.0) out << "init " << s << " " << format_double(p) << "\n";
  }
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.transition_row(s, a);
      for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
        const double p = row[static_cast<std::size_t>(s2)];
        if (p != 0.0) {
          out << "trans " << s << " " << a << " " << s2 << " "
              << format_double(p) << "\n";
        }
      }
    }
  }
  if (!out.good()) {
    throw std::runtime_error("save_mdp: write to '" + path + "' failed");
  }
}

TabularMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_mdp: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_mdp: '" + path + "' is empty");
  }
  int n_states = 0, n_actions = 0;
  double gamma = 0.0;
  {
    std::istringstream header(line);
    std::string t0, t1, t2;
    if (!(header >> t0 >> n_states >> t1 >> n_actions >> t2 >> gamma) ||
        t0 != "n_states" || t1 != "n_actions" || t2 != "gamma") {
      throw std::runtime_error("load_mdp: " + path + ":1: malformed header");
    }
  }
  std::vector<double> transition(static_cast<std::size_t>(n_states) *
                                     static_cast<std::size_t>(n_actions) *
                                     static_cast<std::size_t>(n_states),
                                 0.0);
  std::vector<double> init(static_cast<std::size_t>(n_states), 0.0);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "init") {
      int s = 0;
      double p = 0.0;
      if (!(ss >> s >> p) || s < 0 || s >= n_states) {
        throw std::runtime_error("load_mdp: " + path + ":" +
                                 std::to_string(line_no) +
                                 ": malformed init entry");
      }
      init[static_cast<std::size_t>(s)] = p;
    } else if (tag == "trans") {
      int s = 0, a = 0, s2 = 0;
      double p = 0.0;
      if (!(ss >> s >> a >> s2 >> p) || s < 0 || s >= n_states || a < 0 ||
          a >= n_actions || s2 < 0 || s2 >= n_states) {
        throw std::runtime_error("load_mdp: " + path + ":" +
                                 std::to_string(line_no) +
                                 ": malformed transition entry");
      }
      transition[(static_cast<std::size_t>(s) *
                      static_cast<std::size_t>(n_actions) +
                  static_cast<std::size_t>(a)) *
                     static_cast<std::size_t>(n_states) +
                 static_cast<std::size_t>(s2)] = p;
    } else {
      throw std::runtime_error("load_mdp: " + path + ":" +
                               std::to_string(line_no) + ": unknown tag '" +
                               tag + "'");
    }
  }
  return TabularMdp(n_states, n_actions, std::move(transition), gamma,
                    std::move(init));
}

void save_rewards(const TrueRewardSpec& rewards, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_rewards: cannot open '" + path + "'");
  }
  out << "s a spec\n";
  for (int s = 0; s < rewards.n_states(); ++s) {
    for (int a = 0; a < rewards.n_actions(); ++a) {
      out << s << " " << a << " " << rewards.at(s, a).to_string() << "\n";
    }
  }
  if (!out.good()) {
    throw std::runtime_error("save_rewards: write to '" + path + "' failed");
  }
}

TrueRewardSpec load_rewards(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_rewards: cannot open '" + path + "'");
  }
  std::string header;
  std::getline(in, header);
  struct Row {
    int s, a;
    RewardSpec spec;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int s = 0, a = 0;
    std::string spec_text;
    if (!(ss >> s >> a >> spec_text)) {
      throw std::runtime_error("load_rewards: " + path + ":" +
                               std::to_string(line_no) + ": malformed row");
    }
    rows.push_back({s, a, RewardSpec::parse(spec_text)});
  }
  if (rows.empty()) {
    throw std::runtime_error("load_rewards: '" + path + "' has no rows");
  }
  int n_states = 0, n_actions = 0;
  for (const Row& row : rows) {
    n_states = std::max(n_states, row.s + 1);
    n_actions = std::max(n_actions, row.a + 1);
  }
  TrueRewardSpec rewards(n_states, n_actions);
  for (const Row& row : rows) {
    rewards.set(row.s, row.a, row.spec);
  }
  return rewards;
}

}  // namespace distirl
