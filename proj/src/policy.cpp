#include "distirl/policy.hpp"

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

}  // namespace

RiskPolicy::RiskPolicy(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("RiskPolicy: shape must be positive");
  }
  probs_.assign(static_cast<std::size_t>(n_states) *
                    static_cast<std::size_t>(n_actions),
                1.0 / static_cast<double>(n_actions));
}

RiskPolicy RiskPolicy::from_scores(int n_states, int n_actions,
                                   std::span<const double> scores,
                                   double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("RiskPolicy: beta must be > 0");
  }
  if (scores.size() != static_cast<std::size_t>(n_states) *
                           static_cast<std::size_t>(n_actions)) {
    throw std::invalid_argument("RiskPolicy: score table has wrong shape");
  }
  RiskPolicy policy(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    const auto row = scores.subspan(static_cast<std::size_t>(s) *
                                        static_cast<std::size_t>(n_actions),
                                    static_cast<std::size_t>(n_actions));
    const double top = *std::max_element(row.begin(), row.end());
    double norm = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      const double e = std::exp((row[static_cast<std::size_t>(a)] - top) / beta);
      policy.probs_[static_cast<std::size_t>(s) *
                        static_cast<std::size_t>(n_actions) +
                    static_cast<std::size_t>(a)] = e;
      norm += e;
    }
    for (int a = 0; a < n_actions; ++a) {
      policy.probs_[static_cast<std::size_t>(s) *
                        static_cast<std::size_t>(n_actions) +
                    static_cast<std::size_t>(a)] /= norm;
    }
  }
  return policy;
}

RiskPolicy RiskPolicy::from_probabilities(int n_states, int n_actions,
                                          std::vector<double> probs) {
  RiskPolicy policy(n_states, n_actions);
  if (probs.size() != policy.probs_.size()) {
    throw std::invalid_argument("RiskPolicy: probability table has wrong shape");
  }
  policy.probs_ = std::move(probs);
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (double p : policy.row(s)) {
      if (p < 0.0) {
        throw std::invalid_argument("RiskPolicy: negative probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("RiskPolicy: row does not sum to 1");
    }
  }
  return policy;
}

RiskPolicy RiskPolicy::from_quantile_critic(const QuantileCritic& critic,
                                            const Distortion& d, double beta) {
  const int S = critic.n_states();
  const int A = critic.n_actions();
  std::vector<double> scores(static_cast<std::size_t>(S) *
                             static_cast<std::size_t>(A));
  const std::vector<double> w = distortion_weights(d, critic.n_atoms());
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto atoms = critic.atoms(s, a);
      double acc = 0.0;
      for (int i = 0; i < critic.n_atoms(); ++i) {
        acc += w[static_cast<std::size_t>(i)] *
               atoms[static_cast<std::size_t>(i)];
      }
      scores[static_cast<std::size_t>(s) * static_cast<std::size_t>(A) +
             static_cast<std::size_t>(a)] = acc;
    }
  }
  return from_scores(S, A, scores, beta);
}

RiskPolicy RiskPolicy::from_mean_critic(const MeanCritic& critic, double beta) {
  const int S = critic.n_states();
  const int A = critic.n_actions();
  std::vector<double> scores(static_cast<std::size_t>(S) *
                             static_cast<std::size_t>(A));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      scores[static_cast<std::size_t>(s) * static_cast<std::size_t>(A) +
             static_cast<std::size_t>(a)] = critic.value(s, a);
    }
  }
  return from_scores(S, A, scores, beta);
}

double RiskPolicy::prob(int s, int a) const {
  return probs_[static_cast<std::size_t>(s) *
                    static_cast<std::size_t>(n_actions_) +
                static_cast<std::size_t>(a)];
}

std::span<const double> RiskPolicy::row(int s) const {
  return {probs_.data() + static_cast<std::size_t>(s) *
                              static_cast<std::size_t>(n_actions_),
          static_cast<std::size_t>(n_actions_)};
}

double RiskPolicy::entropy(int s) const {
  double acc = 0.0;
  for (double p : row(s)) {
    if (p > 0.0) acc -= p * std::log(p);
  }
  return acc;
}

double RiskPolicy::mean_entropy() const {
  double acc = 0.0;
  for (int s = 0; s < n_states_; ++s) acc += entropy(s);
  return acc / static_cast<double>(n_states_);
}

int RiskPolicy::act(int s, Rng& rng) const {
  if (s < 0 || s >= n_states_) {
    throw std::invalid_argument("RiskPolicy::act: state out of range");
  }
  return rng.categorical(row(s));
}

void RiskPolicy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("RiskPolicy::save: cannot open '" + path + "'");
  }
  out << "s a prob\n";
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      out << s << " " << a << " " << format_double(prob(s, a)) << "\n";
    }
  }
  if (!out.good()) {
    throw std::runtime_error("RiskPolicy::save: write to '" + path +
                             "' failed");
  }
}

RiskPolicy RiskPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("RiskPolicy::load: cannot open '" + path + "'");
  }
  std::string header;
  std::getline(in, header);
  struct Row {
    int s, a;
    double p;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row row{};
    if (!(ss >> row.s >> row.a >> row.p)) {
      throw std::runtime_error("RiskPolicy::load: " + path + ":" +
                               std::to_string(line_no) + ": malformed row");
    }
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw std::runtime_error("RiskPolicy::load: '" + path + "' has no rows");
  }
  int S = 0, A = 0;
  for (const Row& row : rows) {
    S = std::max(S, row.s + 1);
    A = std::max(A, row.a + 1);
  }
  RiskPolicy policy(S, A);
  for (const Row& row : rows) {
    policy.probs_[static_cast<std::size_t>(row.s) *
                      static_cast<std::size_t>(A) +
                  static_cast<std::size_t>(row.a)] = row.p;
  }
  for (int s = 0; s < S; ++s) {
    double sum = 0.0;
    for (double p : policy.row(s)) {
      if (p < 0.0) {
        throw std::runtime_error("RiskPolicy::load: negative probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::runtime_error("RiskPolicy::load: row " + std::to_string(s) +
                               " sums to " + format_double(sum));
    }
  }
  return policy;
}

}  // namespace distirl
