// Copyright 2026 The GGPI Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Finite MDPs, Markov policies and exact policy evaluation.
//
// Conventions used throughout the library:
//   * state-action pairs are flattened as row = x * n_actions + a;
//   * the transition tensor is an (S*A) x S row-stochastic matrix;
//   * rewards are a S x A table r(x, a);
//   * terminal states are absorbing with zero reward. When terminal states are
//     declared, gamma == 1 is accepted (undiscounted episodic tasks) and the
//     exact solvers pin Q = 0 on terminal rows.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/rng.hpp"

namespace ggpi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a linear solve does not meet its residual contract (for
/// example an improper policy in an undiscounted episodic task).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Row-wise inverse-CDF sampler with a guide table: the draw equals the
/// binary-search inverse CDF for the same uniform, in O(1) expected time.
class RowSampler {
 public:
  RowSampler() = default;
  explicit RowSampler(const Matrix& probs)
      : rows_(static_cast<std::size_t>(probs.rows())), cols_(static_cast<std::size_t>(probs.cols())) {
    cdf_.resize(rows_ * cols_);
    guide_.resize(rows_ * cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      double* c = cdf_.data() + r * cols_;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        acc += probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
        c[j] = acc;
      }
      std::size_t i = 0;
      for (std::size_t b = 0; b < cols_; ++b) {
        const double threshold = static_cast<double>(b) / static_cast<double>(cols_) * acc;
        while (i + 1 < cols_ && c[i] <= threshold) ++i;
        guide_[r * cols_ + b] = static_cast<std::uint32_t>(i);
      }
    }
  }

  std::span<const double> row(std::size_t r) const { return {cdf_.data() + r * cols_, cols_}; }

  std::size_t sample(std::size_t r, RngStream& rng) const {
    const double* c = cdf_.data() + r * cols_;
    const double u0 = rng.uniform();
    const double u = u0 * c[cols_ - 1];
    const std::size_t bucket = std::min(static_cast<std::size_t>(u0 * static_cast<double>(cols_)), cols_ - 1);
    std::size_t i = guide_[r * cols_ + bucket];
    while (i > 0 && c[i - 1] > u) --i;
    while (i + 1 < cols_ && c[i] <= u) ++i;
    return i;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
};

inline Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace detail

/// Per-state action distribution pi(a|x), stored S x A.
class MarkovPolicy {
 public:
  MarkovPolicy() = default;
  explicit MarkovPolicy(Matrix probs) : probs_(std::move(probs)), sampler_(probs_) {}

  static MarkovPolicy deterministic(std::size_t n_actions, const std::vector<std::size_t>& actions) {
    Matrix p = Matrix::Zero(detail::idx(actions.size()), detail::idx(n_actions));
    for (std::size_t x = 0; x < actions.size(); ++x) {
      if (actions[x] >= n_actions) throw std::invalid_argument("MarkovPolicy: action index out of range");
      p(detail::idx(x), detail::idx(actions[x])) = 1.0;
    }
    return MarkovPolicy(std::move(p));
  }

  static MarkovPolicy constant(std::size_t n_states, std::size_t n_actions, std::size_t action) {
    return deterministic(n_actions, std::vector<std::size_t>(n_states, action));
  }

  static MarkovPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return MarkovPolicy(Matrix::Constant(detail::idx(n_states), detail::idx(n_actions),
                                         1.0 / static_cast<double>(n_actions)));
  }

  std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  double prob(std::size_t x, std::size_t a) const { return probs_(detail::idx(x), detail::idx(a)); }

  bool is_deterministic() const {
    return ((probs_.array() == 0.0) || (probs_.array() == 1.0)).all();
  }

  /// The action with the largest probability (lowest index among ties).
  std::size_t mode(std::size_t x) const {
    Eigen::Index best = 0;
    probs_.row(detail::idx(x)).maxCoeff(&best);
    return static_cast<std::size_t>(best);
  }

  std::vector<std::size_t> actions() const {
    std::vector<std::size_t> out(n_states());
    for (std::size_t x = 0; x < out.size(); ++x) out[x] = mode(x);
    return out;
  }

  std::size_t sample(std::size_t x, RngStream& rng) const {
    return sampler_.sample(x, rng);
  }

  bool operator==(const MarkovPolicy& other) const {
    return probs_.rows() == other.probs_.rows() && probs_.cols() == other.probs_.cols() &&
           probs_ == other.probs_;
  }

 private:
  Matrix probs_;
  detail::RowSampler sampler_;
};

/// Tabular action-value function, S x A.
struct QFunction {
  Matrix values;

  double operator()(std::size_t x, std::size_t a) const { return values(detail::idx(x), detail::idx(a)); }
  std::size_t n_states() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(values.cols()); }
};

class Mdp {
 public:
  Mdp(Matrix transition, Matrix reward, double gamma, bool state_reward_only = false,
      std::vector<bool> terminal = {}, std::map<std::size_t, std::string> labels = {})
      : n_states_(static_cast<std::size_t>(reward.rows())),
        n_actions_(static_cast<std::size_t>(reward.cols())),
        transition_(std::move(transition)),
        reward_(std::move(reward)),
        gamma_(gamma),
        state_reward_only_(state_reward_only),
        terminal_(std::move(terminal)),
        labels_(std::move(labels)) {
    if (n_states_ == 0 || n_actions_ == 0) throw std::invalid_argument("Mdp: empty state or action set");
    if (static_cast<std::size_t>(transition_.rows()) != n_states_ * n_actions_ ||
        static_cast<std::size_t>(transition_.cols()) != n_states_) {
      throw std::invalid_argument("Mdp: transition must be (n_states*n_actions) x n_states");
    }
    if (terminal_.empty()) terminal_.assign(n_states_, false);
    if (terminal_.size() != n_states_) throw std::invalid_argument("Mdp: terminal mask has wrong length");
    sampler_ = detail::RowSampler(transition_);
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_pairs() const { return n_states_ * n_actions_; }
  std::size_t pair(std::size_t x, std::size_t a) const { return x * n_actions_ + a; }

  const Matrix& transition() const { return transition_; }
  const Matrix& reward() const { return reward_; }
  double gamma() const { return gamma_; }
  bool state_reward_only() const { return state_reward_only_; }
  const std::vector<bool>& terminal() const { return terminal_; }
  bool is_terminal(std::size_t x) const { return terminal_[x]; }
  bool has_terminal() const { return std::find(terminal_.begin(), terminal_.end(), true) != terminal_.end(); }
  const std::map<std::size_t, std::string>& labels() const { return labels_; }

  double prob(std::size_t x, std::size_t a, std::size_t y) const {
    return transition_(detail::idx(pair(x, a)), detail::idx(y));
  }
  double reward(std::size_t x, std::size_t a) const { return reward_(detail::idx(x), detail::idx(a)); }

  std::size_t draw_next(std::size_t x, std::size_t a, RngStream& rng) const { return sampler_.sample(pair(x, a), rng); }
  std::span<const double> transition_cdf(std::size_t x, std::size_t a) const {
    return sampler_.row(pair(x, a));
  }

  /// Same dynamics, new reward table (the transfer setting).
  Mdp with_reward(Matrix reward, bool state_reward_only = false) const {
    return Mdp(transition_, std::move(reward), gamma_, state_reward_only, terminal_, labels_);
  }

  Mdp with_gamma(double gamma) const {
    return Mdp(transition_, reward_, gamma, state_reward_only_, terminal_, labels_);
  }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Matrix transition_;
  Matrix reward_;
  double gamma_;
  bool state_reward_only_;
  std::vector<bool> terminal_;
  std::map<std::size_t, std::string> labels_;
  detail::RowSampler sampler_;
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  enum class Kind { kRowSum, kNegativeProbability, kNonFiniteReward, kStateRewardMismatch, kDiscount, kTerminal };
  Kind kind;
  std::size_t state = 0;
  std::size_t action = 0;
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& issue : issues) os << issue.message << '\n';
    return os.str();
  }
};

inline constexpr double kRowSumTolerance = 1e-12;

namespace detail {

inline void check_rows(const Matrix& m, std::size_t n_actions, const char* what, ValidationReport& report,
                       double tol) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const std::size_t x = static_cast<std::size_t>(r) / n_actions;
    const std::size_t a = static_cast<std::size_t>(r) % n_actions;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!(m(r, c) >= 0.0)) {
        std::ostringstream os;
        os << what << ": negative or NaN probability " << m(r, c) << " at (x=" << x << ", a=" << a
           << ", y=" << c << ")";
        report.issues.push_back({ValidationIssue::Kind::kNegativeProbability, x, a, m(r, c), os.str()});
      }
    }
    const double sum = m.row(r).sum();
    if (!(std::abs(sum - 1.0) <= tol)) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": row (x=" << x << ", a=" << a << ") sums to " << sum;
      report.issues.push_back({ValidationIssue::Kind::kRowSum, x, a, sum, os.str()});
    }
  }
}

}  // namespace detail

inline ValidationReport validate(const Mdp& mdp) {
  ValidationReport report;
  detail::check_rows(mdp.transition(), mdp.n_actions(), "transition", report, kRowSumTolerance);
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double r = mdp.reward(x, a);
      if (!std::isfinite(r)) {
        std::ostringstream os;
        os << "reward: non-finite value " << r << " at (x=" << x << ", a=" << a << ")";
        report.issues.push_back({ValidationIssue::Kind::kNonFiniteReward, x, a, r, os.str()});
      } else if (mdp.state_reward_only() && r != mdp.reward(x, 0)) {
        std::ostringstream os;
        os << "reward: state_reward_only set but r(" << x << "," << a << ")=" << r << " differs from r(" << x
           << ",0)=" << mdp.reward(x, 0);
        report.issues.push_back({ValidationIssue::Kind::kStateRewardMismatch, x, a, r, os.str()});
      }
    }
    if (mdp.is_terminal(x)) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        if (mdp.prob(x, a, x) != 1.0 || mdp.reward(x, a) != 0.0) {
          std::ostringstream os;
          os << "terminal state " << x << " must be absorbing with zero reward (action " << a << ")";
          report.issues.push_back({ValidationIssue::Kind::kTerminal, x, a, mdp.reward(x, a), os.str()});
        }
      }
    }
  }
  const double g = mdp.gamma();
  const bool episodic_ok = g == 1.0 && mdp.has_terminal();
  if (!((g >= 0.0 && g < 1.0) || episodic_ok)) {
    std::ostringstream os;
    os << "discount " << g << " outside [0, 1) (1 is accepted only with terminal states)";
    report.issues.push_back({ValidationIssue::Kind::kDiscount, 0, 0, g, os.str()});
  }
  return report;
}

inline void validate_or_throw(const Mdp& mdp) {
  const auto report = validate(mdp);
  if (!report.ok()) throw std::invalid_argument("invalid MDP:\n" + report.to_string());
}

inline ValidationReport validate(const MarkovPolicy& pi) {
  ValidationReport report;
  detail::check_rows(pi.probs(), 1, "policy", report, kRowSumTolerance);
  return report;
}

inline void check_dimensions(const Mdp& mdp, const MarkovPolicy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
    std::ostringstream os;
    os << "policy shape " << pi.n_states() << "x" << pi.n_actions() << " does not match MDP "
       << mdp.n_states() << "x" << mdp.n_actions();
    throw std::invalid_argument(os.str());
  }
}

// ---------------------------------------------------------------------------
// Policy-conditioned quantities

/// r^pi(x) = sum_a pi(a|x) r(x, a).
inline Vector policy_reward(const Mdp& mdp, const MarkovPolicy& pi) {
  check_dimensions(mdp, pi);
  return (mdp.reward().array() * pi.probs().array()).rowwise().sum();
}

/// Policy-mixing operator: (S x SA) matrix with entry (x', (x', a')) = pi(a'|x').
inline Matrix policy_mixing(const MarkovPolicy& pi) {
  const std::size_t ns = pi.n_states();
  const std::size_t na = pi.n_actions();
  Matrix mix = Matrix::Zero(detail::idx(ns), detail::idx(ns * na));
  for (std::size_t x = 0; x < ns; ++x) {
    for (std::size_t a = 0; a < na; ++a) mix(detail::idx(x), detail::idx(x * na + a)) = pi.prob(x, a);
  }
  return mix;
}

/// State-action chain P^pi: ((x,a),(x',a')) -> P(x'|x,a) pi(a'|x').
inline Matrix transition_operator(const Mdp& mdp, const MarkovPolicy& pi) {
  check_dimensions(mdp, pi);
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  Matrix op(detail::idx(ns * na), detail::idx(ns * na));
  for (std::size_t row = 0; row < ns * na; ++row) {
    for (std::size_t y = 0; y < ns; ++y) {
      const double p = mdp.transition()(detail::idx(row), detail::idx(y));
      for (std::size_t b = 0; b < na; ++b) op(detail::idx(row), detail::idx(y * na + b)) = p * pi.prob(y, b);
    }
  }
  return op;
}

/// State chain P_pi(x'|x) = sum_a pi(a|x) P(x'|x,a).
inline Matrix state_transition(const Mdp& mdp, const MarkovPolicy& pi) {
  check_dimensions(mdp, pi);
  Matrix out = Matrix::Zero(detail::idx(mdp.n_states()), detail::idx(mdp.n_states()));
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      out.row(detail::idx(x)) += pi.prob(x, a) * mdp.transition().row(detail::idx(mdp.pair(x, a)));
    }
  }
  return out;
}

inline Vector flatten(const Matrix& sa_table) {
  Vector v(sa_table.size());
  const auto na = sa_table.cols();
  for (Eigen::Index x = 0; x < sa_table.rows(); ++x) {
    for (Eigen::Index a = 0; a < na; ++a) v(x * na + a) = sa_table(x, a);
  }
  return v;
}

inline Matrix unflatten(const Vector& v, std::size_t n_actions) {
  const auto na = detail::idx(n_actions);
  Matrix out(v.size() / na, na);
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i / na, i % na) = v(i);
  return out;
}

inline constexpr double kSolveResidualTolerance = 1e-10;

/// Solves q = rhs + scale * op * q over state-action pairs, pinning q = 0 on
/// the rows of terminal states. `op` is row-stochastic (SA x SA). Throws
/// SolverError if the max-norm residual exceeds kSolveResidualTolerance.
inline Vector solve_state_action_system(const Mdp& mdp, const Matrix& op, double scale, const Vector& rhs) {
  const std::size_t na = mdp.n_actions();
  const std::size_t n = mdp.n_pairs();
  std::vector<std::size_t> free_rows;
  free_rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mdp.is_terminal(i / na)) free_rows.push_back(i);
  }
  Vector q = Vector::Zero(detail::idx(n));
  if (!free_rows.empty()) {
    const auto m = detail::idx(free_rows.size());
    Matrix lhs(m, m);
    Vector b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto ri = detail::idx(free_rows[static_cast<std::size_t>(i)]);
      b(i) = rhs(ri);
      for (Eigen::Index j = 0; j < m; ++j) {
        lhs(i, j) = -scale * op(ri, detail::idx(free_rows[static_cast<std::size_t>(j)]));
      }
      lhs(i, i) += 1.0;
    }
    const Vector sol = lhs.partialPivLu().solve(b);
    for (Eigen::Index i = 0; i < m; ++i) q(detail::idx(free_rows[static_cast<std::size_t>(i)])) = sol(i);
  }
  const double residual = (q - rhs - scale * (op * q)).cwiseAbs().maxCoeff();
  if (!(residual <= kSolveResidualTolerance * std::max(1.0, q.cwiseAbs().maxCoeff()))) {
    std::ostringstream os;
    os << "linear solve residual " << residual << " exceeds tolerance (improper policy or singular system)";
    throw SolverError(os.str());
  }
  return q;
}

/// Q^pi solving Q = r + gamma P^pi Q.
inline QFunction exact_q(const Mdp& mdp, const MarkovPolicy& pi) {
  const Vector q = solve_state_action_system(mdp, transition_operator(mdp, pi), mdp.gamma(), flatten(mdp.reward()));
  return QFunction{unflatten(q, mdp.n_actions())};
}

/// V^pi(x) = sum_a pi(a|x) Q^pi(x, a).
inline Vector state_values(const QFunction& q, const MarkovPolicy& pi) {
  return (q.values.array() * pi.probs().array()).rowwise().sum();
}

// ---------------------------------------------------------------------------
// Optimal control

struct ValueIterationResult {
  QFunction q;
  /// Per state, every action within `tol` of the maximum (all actions on terminal states).
  std::vector<std::vector<std::size_t>> optimal_actions;
  std::size_t iterations = 0;
  double residual = 0.0;

  bool is_optimal_action(std::size_t x, std::size_t a) const {
    const auto& set = optimal_actions[x];
    return std::find(set.begin(), set.end(), a) != set.end();
  }
};

inline Vector bellman_optimality(const Mdp& mdp, const Vector& q_flat) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  Vector v(detail::idx(ns));
  for (std::size_t x = 0; x < ns; ++x) {
    v(detail::idx(x)) = mdp.is_terminal(x) ? 0.0 : q_flat.segment(detail::idx(x * na), detail::idx(na)).maxCoeff();
  }
  Vector next = flatten(mdp.reward()) + mdp.gamma() * (mdp.transition() * v);
  for (std::size_t x = 0; x < ns; ++x) {
    if (mdp.is_terminal(x)) next.segment(detail::idx(x * na), detail::idx(na)).setZero();
  }
  return next;
}

/// Value iteration to sup-norm Bellman residual <= tol. Optimal action sets
/// keep every action within `tol` of the state maximum.
inline ValueIterationResult value_iteration(const Mdp& mdp, double tol, std::size_t max_iterations = 10'000'000) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  // Stop early enough that the returned Q is within tol/2 of Q* when gamma < 1.
  const double stop = mdp.gamma() < 1.0 ? std::min(tol, 0.5 * tol * (1.0 - mdp.gamma())) : tol * 1e-3;
  Vector q = Vector::Zero(detail::idx(mdp.n_pairs()));
  ValueIterationResult result;
  for (std::size_t it = 0;; ++it) {
    Vector next = bellman_optimality(mdp, q);
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    result.iterations = it + 1;
    if (delta <= stop) break;
    if (it + 1 >= max_iterations) throw SolverError("value_iteration: did not converge");
  }
  result.residual = (bellman_optimality(mdp, q) - q).cwiseAbs().maxCoeff();
  result.q = QFunction{unflatten(q, mdp.n_actions())};
  result.optimal_actions.resize(mdp.n_states());
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    const double best = result.q.values.row(detail::idx(x)).maxCoeff();
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      if (mdp.is_terminal(x) || result.q(x, a) >= best - tol) result.optimal_actions[x].push_back(a);
    }
  }
  return result;
}

/// True iff every non-terminal state's chosen action lies in its optimal set.
inline bool is_optimal_policy(const ValueIterationResult& vi, const std::vector<std::size_t>& actions,
                              const Mdp& mdp) {
  for (std::size_t x = 0; x < actions.size(); ++x) {
    if (!mdp.is_terminal(x) && !vi.is_optimal_action(x, actions[x])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Simulation

inline std::size_t sample_transition(const Mdp& mdp, std::size_t x, std::size_t a, RngStream& rng) {
  if (x >= mdp.n_states() || a >= mdp.n_actions()) {
    throw std::out_of_range("sample_transition: state or action index out of range");
  }
  return mdp.draw_next(x, a, rng);
}

/// Expected return of an open-loop action script from state x, propagating
/// the state distribution exactly. Stops accumulating at terminal states.
inline double script_return(const Mdp& mdp, std::size_t x, const std::vector<std::size_t>& script) {
  Vector dist = Vector::Zero(detail::idx(mdp.n_states()));
  dist(detail::idx(x)) = 1.0;
  double total = 0.0;
  double discount = 1.0;
  for (const std::size_t a : script) {
    Vector next = Vector::Zero(dist.size());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const double p = dist(detail::idx(s));
      if (p == 0.0 || mdp.is_terminal(s)) continue;
      total += discount * p * mdp.reward(s, a);
      next += p * mdp.transition().row(detail::idx(mdp.pair(s, a))).transpose();
    }
    dist = std::move(next);
    discount *= mdp.gamma();
  }
  return total;
}

}  // namespace ggpi
