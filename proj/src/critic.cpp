#include "distirl/critic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace distirl {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_transition(const Transition& t, int n_states, int n_actions,
                      double step_size) {
  if (t.s < 0 || t.s >= n_states || t.s_next < 0 || t.s_next >= n_states ||
      t.a < 0 || t.a >= n_actions || t.a_next < 0 || t.a_next >= n_actions) {
    throw std::invalid_argument("critic update: transition index out of range");
  }
  if (!std::isfinite(t.r)) {
    throw std::invalid_argument("critic update: reward is not finite");
  }
  if (!(step_size >= 0.0)) {
    throw std::invalid_argument("critic update: step_size must be >= 0");
  }
}

}  // namespace

QuantileCritic::QuantileCritic(int n_states, int n_actions, int n_atoms,
                               double init_value)
    : n_states_(n_states), n_actions_(n_actions), n_atoms_(n_atoms) {
  if (n_states < 1 || n_actions < 1 || n_atoms < 1) {
    throw std::invalid_argument("QuantileCritic: shape must be positive");
  }
  theta_.assign(static_cast<std::size_t>(n_states) *
                    static_cast<std::size_t>(n_actions) *
                    static_cast<std::size_t>(n_atoms),
                init_value);
}

std::span<const double> QuantileCritic::atoms(int s, int a) const {
  const auto offset = (static_cast<std::size_t>(s) *
                           static_cast<std::size_t>(n_actions_) +
                       static_cast<std::size_t>(a)) *
                      static_cast<std::size_t>(n_atoms_);
  return {theta_.data() + offset, static_cast<std::size_t>(n_atoms_)};
}

std::span<double> QuantileCritic::atoms(int s, int a) {
  const auto offset = (static_cast<std::size_t>(s) *
                           static_cast<std::size_t>(n_actions_) +
                       static_cast<std::size_t>(a)) *
                      static_cast<std::size_t>(n_atoms_);
  return {theta_.data() + offset, static_cast<std::size_t>(n_atoms_)};
}

QuantileDistribution QuantileCritic::distribution(int s, int a) const {
  const auto span = atoms(s, a);
  return QuantileDistribution(std::vector<double>(span.begin(), span.end()));
}

double QuantileCritic::mean(int s, int a) const {
  const auto span = atoms(s, a);
  double acc = 0.0;
  for (double v : span) acc += v;
  return acc / static_cast<double>(span.size());
}

double QuantileCritic::drm(int s, int a, const Distortion& d) const {
  const std::vector<double> w = distortion_weights(d, n_atoms_);
  const auto span = atoms(s, a);
  double acc = 0.0;
  for (int i = 0; i < n_atoms_; ++i) {
    acc += w[static_cast<std::size_t>(i)] * span[static_cast<std::size_t>(i)];
  }
  return acc;
}

bool QuantileCritic::all_finite() const {
  for (double v : theta_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void QuantileCritic::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("QuantileCritic::save: cannot open '" + path +
                             "'");
  }
  out << "s a atom_index value\n";
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      const auto span = atoms(s, a);
      for (int i = 0; i < n_atoms_; ++i) {
        out << s << " " << a << " " << i << " "
            << format_double(span[static_cast<std::size_t>(i)]) << "\n";
      }
    }
  }
  if (!out.good()) {
    throw std::runtime_error("QuantileCritic::save: write to '" + path +
                             "' failed");
  }
}

QuantileCritic QuantileCritic::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("QuantileCritic::load: cannot open '" + path +
                             "'");
  }
  std::string header;
  std::getline(in, header);
  struct Row {
    int s, a, i;
    double value;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row row{};
    if (!(ss >> row.s >> row.a >> row.i >> row.value)) {
      throw std::runtime_error("QuantileCritic::load: " + path + ":" +
                               std::to_string(line_no) + ": malformed row");
    }
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw std::runtime_error("QuantileCritic::load: '" + path +
                             "' has no rows");
  }
  int S = 0, A = 0, N = 0;
  for (const Row& row : rows) {
    S = std::max(S, row.s + 1);
    A = std::max(A, row.a + 1);
    N = std::max(N, row.i + 1);
  }
  QuantileCritic critic(S, A, N);
  for (const Row& row : rows) {
    critic.atoms(row.s, row.a)[static_cast<std::size_t>(row.i)] = row.value;
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      auto span = critic.atoms(s, a);
      std::sort(span.begin(), span.end());
    }
  }
  return critic;
}

namespace {

/// Loss and gradient of (1/N) sum_ij rho_tau_i^kappa(t_j - theta_i) for one
/// transition, exploiting that both the atoms and the targets are sorted:
/// the kappa-window boundaries advance monotonically with i, giving an O(N)
/// pass with prefix sums instead of the naive N^2 double loop.
double qr_loss_and_grad(std::span<const double> atoms,
                        std::span<const double> targets_sorted, double kappa,
                        std::span<double> grad_out,
                        std::span<const double> prefix_sum,
                        std::span<const double> prefix_sq) {
  const int n = static_cast<int>(atoms.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  int lo = 0, mid = 0, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double theta = atoms[static_cast<std::size_t>(i)];
    const double tau = midpoint_fraction(i, n);
    while (lo < n && targets_sorted[static_cast<std::size_t>(lo)] <
                         theta - kappa) {
      ++lo;
    }
    while (mid < n && targets_sorted[static_cast<std::size_t>(mid)] < theta) {
      ++mid;
    }
    while (hi < n &&
           targets_sorted[static_cast<std::size_t>(hi)] <= theta + kappa) {
      ++hi;
    }

    const auto seg_sum = [&](int from, int to) {
      return prefix_sum[static_cast<std::size_t>(to)] -
             prefix_sum[static_cast<std::size_t>(from)];
    };
    const auto seg_sq = [&](int from, int to) {
      return prefix_sq[static_cast<std::size_t>(to)] -
             prefix_sq[static_cast<std::size_t>(from)];
    };

    const double w_below = 1.0 - tau;
    double l = 0.0;
    double g = 0.0;

    // delta < -kappa: linear branch, weight 1 - tau.
    if (lo > 0) {
      const double cnt = static_cast<double>(lo);
      l += w_below * (kappa * (cnt * theta - seg_sum(0, lo)) -
                      0.5 * kappa * kappa * cnt);
      g += w_below * kappa * cnt;
    }
    // -kappa <= delta < 0: quadratic branch, weight 1 - tau.
    if (mid > lo) {
      const double cnt = static_cast<double>(mid - lo);
      l += 0.5 * w_below *
           (seg_sq(lo, mid) - 2.0 * theta * seg_sum(lo, mid) +
            cnt * theta * theta);
      g += w_below * (cnt * theta - seg_sum(lo, mid));
    }
    // 0 <= delta <= kappa: quadratic branch, weight tau.
    if (hi > mid) {
      const double cnt = static_cast<double>(hi - mid);
      l += 0.5 * tau *
           (seg_sq(mid, hi) - 2.0 * theta * seg_sum(mid, hi) +
            cnt * theta * theta);
      g += tau * (cnt * theta - seg_sum(mid, hi));
    }
    // delta > kappa: linear branch, weight tau.
    if (hi < n) {
      const double cnt = static_cast<double>(n - hi);
      l += tau * (kappa * (seg_sum(hi, n) - cnt * theta) -
                  0.5 * kappa * kappa * cnt);
      g -= tau * kappa * cnt;
    }

    loss += l * inv_n;
    grad_out[static_cast<std::size_t>(i)] += g * inv_n;
  }
  return loss;
}

}  // namespace

double qr_td_update(QuantileCritic& critic, const Transition& transition,
                    double gamma, double kappa, double step_size) {
  return qr_td_update_batch(critic, std::span<const Transition>(&transition, 1),
                            gamma, kappa, step_size);
}

double qr_td_update_batch(QuantileCritic& critic,
                          std::span<const Transition> transitions,
                          double gamma, double kappa, double step_size) {
  if (transitions.empty()) return 0.0;
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("qr_td_update: kappa must be > 0");
  }
  const int n = critic.n_atoms();
  std::vector<double> grad(critic.theta_.size(), 0.0);
  std::vector<int> count(static_cast<std::size_t>(critic.n_states_) *
                             static_cast<std::size_t>(critic.n_actions_),
                         0);
  std::vector<double> targets(static_cast<std::size_t>(n));
  std::vector<double> prefix_sum(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> prefix_sq(static_cast<std::size_t>(n) + 1, 0.0);

  double total_loss = 0.0;
  for (const Transition& t : transitions) {
    check_transition(t, critic.n_states_, critic.n_actions_, step_size);
    const auto next_atoms = critic.atoms(t.s_next, t.a_next);
    for (int j = 0; j < n; ++j) {
      targets[static_cast<std::size_t>(j)] =
          t.r + gamma * next_atoms[static_cast<std::size_t>(j)];
    }
    // next_atoms are sorted and r + gamma * (.) is monotone, so targets are
    // already sorted.
    for (int j = 0; j < n; ++j) {
      const double v = targets[static_cast<std::size_t>(j)];
      prefix_sum[static_cast<std::size_t>(j) + 1] =
          prefix_sum[static_cast<std::size_t>(j)] + v;
      prefix_sq[static_cast<std::size_t>(j) + 1] =
          prefix_sq[static_cast<std::size_t>(j)] + v * v;
    }
    const auto cell = (static_cast<std::size_t>(t.s) *
                           static_cast<std::size_t>(critic.n_actions_) +
                       static_cast<std::size_t>(t.a));
    total_loss += qr_loss_and_grad(
        critic.atoms(t.s, t.a), targets, kappa,
        std::span<double>(grad.data() + cell * static_cast<std::size_t>(n),
                          static_cast<std::size_t>(n)),
        prefix_sum, prefix_sq);
    ++count[cell];
  }

  // Each cell moves by the mean gradient over its own batch occurrences, so
  // visitation counts average noise instead of multiplying the step.
  for (std::size_t cell = 0; cell < count.size(); ++cell) {
    if (count[cell] == 0) continue;
    double* theta = critic.theta_.data() + cell * static_cast<std::size_t>(n);
    const double* g = grad.data() + cell * static_cast<std::size_t>(n);
    const double scale = step_size / static_cast<double>(count[cell]);
    for (int i = 0; i < n; ++i) {
      theta[i] -= scale * g[i];
    }
    std::sort(theta, theta + n);
  }
  return total_loss / static_cast<double>(transitions.size());
}

MeanCritic::MeanCritic(int n_states, int n_actions, double init_value)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("MeanCritic: shape must be positive");
  }
  q_.assign(static_cast<std::size_t>(n_states) *
                static_cast<std::size_t>(n_actions),
            init_value);
}

bool MeanCritic::all_finite() const {
  for (double v : q_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void MeanCritic::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("MeanCritic::save: cannot open '" + path + "'");
  }
  out << "s a value\n";
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      out << s << " " << a << " " << format_double(q_[index(s, a)]) << "\n";
    }
  }
  if (!out.good()) {
    throw std::runtime_error("MeanCritic::save: write to '" + path +
                             "' failed");
  }
}

double mean_td_update(MeanCritic& critic, const Transition& transition,
                      double gamma, double step_size) {
  check_transition(transition, critic.n_states_, critic.n_actions_, step_size);
  const double delta = transition.r +
                       gamma * critic.value(transition.s_next,
                                            transition.a_next) -
                       critic.value(transition.s, transition.a);
  critic.q_[critic.index(transition.s, transition.a)] += step_size * delta;
  return delta * delta;
}

double mean_td_update_batch(MeanCritic& critic,
                            std::span<const Transition> transitions,
                            double gamma, double step_size) {
  if (transitions.empty()) return 0.0;
  std::vector<double> delta_q(critic.q_.size(), 0.0);
  std::vector<int> count(critic.q_.size(), 0);
  double total = 0.0;
  for (const Transition& t : transitions) {
    check_transition(t, critic.n_states_, critic.n_actions_, step_size);
    const double delta = t.r + gamma * critic.value(t.s_next, t.a_next) -
                         critic.value(t.s, t.a);
    delta_q[critic.index(t.s, t.a)] += step_size * delta;
    ++count[critic.index(t.s, t.a)];
    total += delta * delta;
  }
  for (std::size_t i = 0; i < critic.q_.size(); ++i) {
    if (count[i] > 0) critic.q_[i] += delta_q[i] / count[i];
  }
  return total / static_cast<double>(transitions.size());
}

}  // namespace distirl
