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

// Tabular GHM learning with softmax logits: synchronous cross-entropy TD,
// cross-entropy Monte Carlo and the log-L2 bootstrap baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/ghm.hpp"
#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi {

/// (S*A) x S logits; each row parameterises softmax(row) over next states.
class LogitTable {
 public:
  LogitTable() = default;
  LogitTable(Matrix logits, std::size_t n_actions) : logits_(std::move(logits)), n_actions_(n_actions) {
    if (n_actions_ == 0 || logits_.rows() != logits_.cols() * static_cast<Eigen::Index>(n_actions_)) {
      throw std::invalid_argument("LogitTable: logits must be (n_states*n_actions) x n_states");
    }
    if (!logits_.allFinite()) throw std::invalid_argument("LogitTable: logits must be finite");
  }

  static LogitTable zeros(std::size_t n_states, std::size_t n_actions) {
    return LogitTable(Matrix::Zero(detail::idx(n_states * n_actions), detail::idx(n_states)), n_actions);
  }

  const Matrix& logits() const { return logits_; }
  Matrix& mutable_logits() { return logits_; }
  std::size_t n_states() const { return static_cast<std::size_t>(logits_.cols()); }
  std::size_t n_actions() const { return n_actions_; }

  Matrix softmax() const {
    Matrix out(logits_.rows(), logits_.cols());
    for (Eigen::Index r = 0; r < logits_.rows(); ++r) {
      const Eigen::RowVectorXd shifted = logits_.row(r).array() - logits_.row(r).maxCoeff();
      const Eigen::RowVectorXd e = shifted.array().exp();
      out.row(r) = e / e.sum();
    }
    return out;
  }

  Matrix log_softmax() const {
    Matrix out(logits_.rows(), logits_.cols());
    for (Eigen::Index r = 0; r < logits_.rows(); ++r) {
      const double top = logits_.row(r).maxCoeff();
      const double lse = top + std::log((logits_.row(r).array() - top).exp().sum());
      out.row(r) = logits_.row(r).array() - lse;
    }
    return out;
  }

  GhmTable to_ghm(std::string policy_id, double beta) const {
    return GhmTable(std::move(policy_id), beta, softmax(), n_actions_);
  }

  /// Re-centres any row holding a logit beyond `limit` in magnitude.
  void recentre(double limit = 1e6) {
    for (Eigen::Index r = 0; r < logits_.rows(); ++r) {
      if (logits_.row(r).cwiseAbs().maxCoeff() > limit) logits_.row(r).array() -= logits_.row(r).maxCoeff();
    }
  }

 private:
  Matrix logits_;
  std::size_t n_actions_ = 1;
};

struct StepSchedule {
  enum class Kind { kConstant, kPolynomial };
  Kind kind = Kind::kPolynomial;
  double scale = 0.75;
  double power = 0.6;

  static StepSchedule constant(double eps) { return {Kind::kConstant, eps, 0.0}; }
  static StepSchedule polynomial(double c, double p) { return {Kind::kPolynomial, c, p}; }

  double epsilon(std::uint64_t k) const {
    if (kind == Kind::kConstant) return scale;
    return scale * std::pow(static_cast<double>(k) + 1.0, -power);
  }

  /// Sum of steps diverges and sum of squares converges.
  bool robbins_monro() const { return kind == Kind::kPolynomial && power > 0.5 && power <= 1.0; }

  void validate() const {
    if (!(scale > 0.0)) throw std::invalid_argument("StepSchedule: scale must be positive");
    if (kind == Kind::kPolynomial && !(power >= 0.0)) throw std::invalid_argument("StepSchedule: power must be >= 0");
  }
};

struct TraceRecord {
  std::uint64_t iteration = 0;
  double lyapunov = 0.0;
  double max_tv = 0.0;
  double epsilon = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  /// Softmax snapshots aligned with `records` when requested.
  std::vector<Matrix> snapshots;
};

// ---------------------------------------------------------------------------
// Diagnostics

/// sum_{(x,a)} w(x,a) KL(target(.|x,a) || softmax(logits)(.|x,a)); uniform
/// weights when `weights` is empty.
inline double lyapunov(const LogitTable& logits, const Matrix& target, const std::vector<double>& weights = {}) {
  if (target.rows() != logits.logits().rows() || target.cols() != logits.logits().cols()) {
    throw std::invalid_argument("lyapunov: shape mismatch");
  }
  const auto rows = static_cast<std::size_t>(target.rows());
  if (!weights.empty() && weights.size() != rows) throw std::invalid_argument("lyapunov: weight length mismatch");
  const Matrix log_model = logits.log_softmax();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double kl = 0.0;
    for (Eigen::Index y = 0; y < target.cols(); ++y) {
      const double p = target(detail::idx(r), y);
      if (p > 0.0) kl += p * (std::log(p) - log_model(detail::idx(r), y));
    }
    total += (weights.empty() ? 1.0 / static_cast<double>(rows) : weights[r]) * std::max(kl, 0.0);
  }
  return total;
}

inline double lyapunov(const LogitTable& logits, const GhmTable& target, const std::vector<double>& weights = {}) {
  return lyapunov(logits, target.dist(), weights);
}

// ---------------------------------------------------------------------------
// Updates

namespace detail {

inline std::size_t sample_row(const Matrix& probs, Eigen::Index row, std::vector<double>& scratch, RngStream& rng) {
  scratch.resize(static_cast<std::size_t>(probs.cols()));
  double acc = 0.0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) scratch[static_cast<std::size_t>(c)] = acc += probs(row, c);
  return rng.categorical_cdf(scratch);
}

inline void check_step(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("GHM learning step: epsilon must be positive");
}

}  // namespace detail

/// One synchronous cross-entropy TD update of every (x, a) row.
inline LogitTable cetd_sync_step(const LogitTable& logits, const Mdp& mdp, const MarkovPolicy& pi, double gamma,
                                 double eps, RngStream& rng) {
  detail::check_step(eps);
  const Matrix model = logits.softmax();
  LogitTable next = logits;
  Matrix& phi = next.mutable_logits();
  std::vector<double> scratch;
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = detail::idx(mdp.pair(x, a));
      const std::size_t x1 = sample_transition(mdp, x, a, rng);
      const std::size_t a1 = pi.sample(x1, rng);
      const std::size_t x2 = detail::sample_row(model, detail::idx(mdp.pair(x1, a1)), scratch, rng);
      phi.row(row) -= eps * model.row(row);
      phi(row, detail::idx(x1)) += eps * (1.0 - gamma);
      phi(row, detail::idx(x2)) += eps * gamma;
    }
  }
  next.recentre();
  return next;
}

/// One synchronous cross-entropy Monte Carlo update from geometric rollouts.
inline LogitTable cemc_step(const LogitTable& logits, const Mdp& mdp, const MarkovPolicy& pi, double gamma,
                            double eps, RngStream& rng) {
  detail::check_step(eps);
  const Matrix model = logits.softmax();
  LogitTable next = logits;
  Matrix& phi = next.mutable_logits();
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = detail::idx(mdp.pair(x, a));
      const HorizonSample s = rollout_ghm_sample(mdp, pi, gamma, x, a, rng);
      phi.row(row) -= eps * model.row(row);
      phi(row, detail::idx(s.state)) += eps;
    }
  }
  next.recentre();
  return next;
}

inline constexpr double kLogFloor = 1e-12;

/// One synchronous log-L2 bootstrap update; x'' and the bootstrap density
/// come from the frozen `target` table.
inline LogitTable ll2td_step(const LogitTable& logits, const Mdp& mdp, const MarkovPolicy& pi, double gamma,
                             double eps, RngStream& rng, const LogitTable& target) {
  detail::check_step(eps);
  const Matrix model = logits.softmax();
  const Matrix frozen = target.softmax();
  LogitTable next = logits;
  Matrix& phi = next.mutable_logits();
  std::vector<double> scratch;
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = detail::idx(mdp.pair(x, a));
      const std::size_t x1 = sample_transition(mdp, x, a, rng);
      const std::size_t a1 = pi.sample(x1, rng);
      const auto boot = detail::idx(mdp.pair(x1, a1));
      const std::size_t x2 = detail::sample_row(frozen, boot, scratch, rng);
      const auto y = detail::idx(x2);
      const double mixture = (1.0 - gamma) * mdp.prob(x, a, x2) + gamma * frozen(boot, y);
      const double residual = std::log(std::max(model(row, y), kLogFloor)) - std::log(std::max(mixture, kLogFloor));
      // d/dphi log softmax(phi)_y = onehot(y) - softmax(phi)
      phi.row(row) += 2.0 * eps * residual * model.row(row);
      phi(row, y) -= 2.0 * eps * residual;
    }
  }
  next.recentre();
  return next;
}

// ---------------------------------------------------------------------------
// Runs

enum class Learner { kCetd, kCemc, kLl2td };

inline const char* learner_name(Learner l) {
  switch (l) {
    case Learner::kCetd: return "cetd";
    case Learner::kCemc: return "cemc";
    case Learner::kLl2td: return "ll2td";
  }
  return "unknown";
}

struct RunOptions {
  Learner learner = Learner::kCetd;
  StepSchedule schedule = StepSchedule::polynomial(0.75, 0.6);
  std::uint64_t iterations = 100'000;
  std::uint64_t eval_every = 1000;
  std::uint64_t target_period = 200;  ///< target refresh period (log-L2 only)
  bool keep_snapshots = false;
};

struct LearnResult {
  LogitTable logits;
  ConvergenceTrace trace;
};

inline void record(ConvergenceTrace& trace, const LogitTable& logits, const GhmTable& truth, std::uint64_t k,
                   double eps, bool keep_snapshot) {
  const Matrix model = logits.softmax();
  trace.records.push_back({k, lyapunov(logits, truth), max_row_tv(model, truth.dist()), eps});
  if (keep_snapshot) trace.snapshots.push_back(model);
}

/// Runs a learner from `init` for options.iterations synchronous steps and
/// traces it against exact_ghm(mdp, pi, gamma) every eval_every steps.
inline LearnResult learn_ghm(const Mdp& mdp, const MarkovPolicy& pi, double gamma, const LogitTable& init,
                             const RunOptions& options, RngStream& rng) {
  if (options.iterations == 0) throw std::invalid_argument("learn_ghm: iterations must be >= 1");
  if (options.eval_every == 0) throw std::invalid_argument("learn_ghm: eval_every must be >= 1");
  options.schedule.validate();
  const GhmTable truth = exact_ghm(mdp, pi, gamma);
  LearnResult out{init, {}};
  LogitTable target = init;
  record(out.trace, out.logits, truth, 0, options.schedule.epsilon(0), options.keep_snapshots);
  for (std::uint64_t k = 0; k < options.iterations; ++k) {
    const double eps = options.schedule.epsilon(k);
    switch (options.learner) {
      case Learner::kCetd: out.logits = cetd_sync_step(out.logits, mdp, pi, gamma, eps, rng); break;
      case Learner::kCemc: out.logits = cemc_step(out.logits, mdp, pi, gamma, eps, rng); break;
      case Learner::kLl2td:
        if (k % options.target_period == 0) target = out.logits;
        out.logits = ll2td_step(out.logits, mdp, pi, gamma, eps, rng, target);
        break;
    }
    if ((k + 1) % options.eval_every == 0 || k + 1 == options.iterations) {
      record(out.trace, out.logits, truth, k + 1, eps, options.keep_snapshots);
    }
  }
  return out;
}

inline LearnResult run_cetd(const Mdp& mdp, const MarkovPolicy& pi, double gamma, const StepSchedule& schedule,
                            std::uint64_t iters, RngStream& rng, std::uint64_t eval_every,
                            std::optional<LogitTable> init = std::nullopt) {
  RunOptions options;
  options.schedule = schedule;
  options.iterations = iters;
  options.eval_every = eval_every;
  return learn_ghm(mdp, pi, gamma, init ? *init : LogitTable::zeros(mdp.n_states(), mdp.n_actions()), options, rng);
}

}  // namespace ggpi
