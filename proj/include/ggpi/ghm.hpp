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

// Geometric horizon models: mu(y | x, a) is the law of the state reached
// T ~ Geometric(1 - beta) steps after taking a in x and following pi.

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi {

inline constexpr double kGhmRowTolerance = 1e-10;

/// Dense (S*A) x S table of next-visited-state distributions.
class GhmTable {
 public:
  GhmTable() = default;
  GhmTable(std::string policy_id, double beta, Matrix dist, std::size_t n_actions)
      : policy_id_(std::move(policy_id)), beta_(beta), n_actions_(n_actions), dist_(std::move(dist)) {
    if (!(beta_ >= 0.0 && beta_ < 1.0)) throw std::invalid_argument("GhmTable: beta must lie in [0, 1)");
    if (n_actions_ == 0 || dist_.rows() != dist_.cols() * static_cast<Eigen::Index>(n_actions_)) {
      throw std::invalid_argument("GhmTable: dist must be (n_states*n_actions) x n_states");
    }
    for (Eigen::Index r = 0; r < dist_.rows(); ++r) {
      const double sum = dist_.row(r).sum();
      if (!(std::abs(sum - 1.0) <= kGhmRowTolerance) || dist_.row(r).minCoeff() < -kGhmRowTolerance) {
        std::ostringstream os;
        os << "GhmTable: row " << r << " is not a probability vector (sum " << sum << ")";
        throw std::invalid_argument(os.str());
      }
    }
    sampler_ = detail::RowSampler(dist_.cwiseMax(0.0));
  }

  const std::string& policy_id() const { return policy_id_; }
  double beta() const { return beta_; }
  const Matrix& dist() const { return dist_; }
  std::size_t n_states() const { return static_cast<std::size_t>(dist_.cols()); }
  std::size_t n_actions() const { return n_actions_; }
  double prob(std::size_t x, std::size_t a, std::size_t y) const {
    return dist_(detail::idx(x * n_actions_ + a), detail::idx(y));
  }
  /// Unchecked inverse-CDF draw from row (x, a).
  std::size_t draw(std::size_t x, std::size_t a, RngStream& rng) const { return sampler_.sample(x * n_actions_ + a, rng); }
  std::span<const double> cdf(std::size_t x, std::size_t a) const {
    return sampler_.row(x * n_actions_ + a);
  }

 private:
  std::string policy_id_;
  double beta_ = 0.0;
  std::size_t n_actions_ = 0;
  Matrix dist_;
  detail::RowSampler sampler_;
};

struct HorizonSample {
  std::size_t state = 0;
  std::uint64_t hops = 1;
};

/// mu = (1 - beta) (I - beta P^pi)^{-1} P, solved at the state-action level.
inline GhmTable exact_ghm(const Mdp& mdp, const MarkovPolicy& pi, double beta, std::string policy_id = "") {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("exact_ghm: beta must lie in [0, 1)");
  check_dimensions(mdp, pi);
  const Matrix& p = mdp.transition();
  if (beta == 0.0) return GhmTable(std::move(policy_id), beta, p, mdp.n_actions());
  const Matrix chain = transition_operator(mdp, pi);
  const auto n = chain.rows();
  const Matrix lhs = Matrix::Identity(n, n) - beta * chain;
  const Matrix mu = lhs.partialPivLu().solve((1.0 - beta) * p);
  const double residual = (mu - (1.0 - beta) * p - beta * (chain * mu)).cwiseAbs().maxCoeff();
  if (!(residual <= kSolveResidualTolerance)) {
    std::ostringstream os;
    os << "exact_ghm: residual " << residual << " exceeds tolerance";
    throw SolverError(os.str());
  }
  return GhmTable(std::move(policy_id), beta, mu, mdp.n_actions());
}

/// Two-hop table: (mu2 o_pi mu1)(y|x,a) = sum_{x',a'} mu1(x'|x,a) pi(a'|x') mu2(y|x',a').
inline Matrix compose(const Matrix& mu2, const MarkovPolicy& pi, const Matrix& mu1) {
  const auto ns = detail::idx(pi.n_states());
  const auto na = detail::idx(pi.n_actions());
  if (mu1.cols() != ns || mu2.cols() != ns || mu1.rows() != ns * na || mu2.rows() != ns * na) {
    throw std::invalid_argument("compose: shape mismatch");
  }
  return mu1 * (policy_mixing(pi) * mu2);
}

inline Matrix compose(const GhmTable& mu2, const MarkovPolicy& pi, const GhmTable& mu1) {
  return compose(mu2.dist(), pi, mu1.dist());
}

/// Largest total-variation distance between corresponding rows.
inline double max_row_tv(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("max_row_tv: shape mismatch");
  return 0.5 * (a - b).cwiseAbs().rowwise().sum().maxCoeff();
}

inline std::size_t sample_ghm(const GhmTable& table, std::size_t x, std::size_t a, RngStream& rng) {
  if (x >= table.n_states() || a >= table.n_actions()) {
    throw std::out_of_range("sample_ghm: state or action index out of range");
  }
  return table.draw(x, a, rng);
}

/// Simulates T ~ Geometric(1 - beta) environment steps from (x, a) under pi.
inline HorizonSample rollout_ghm_sample(const Mdp& mdp, const MarkovPolicy& pi, double beta, std::size_t x,
                                        std::size_t a, RngStream& rng) {
  const std::uint64_t hops = rng.geometric(beta);
  std::size_t state = sample_transition(mdp, x, a, rng);
  for (std::uint64_t t = 1; t < hops; ++t) {
    const std::size_t action = pi.sample(state, rng);
    state = sample_transition(mdp, state, action, rng);
  }
  return {state, hops};
}

/// Successor features with base features (1 - gamma) * onehot(x') built from
/// the state-level resolvent; returns the max-abs deviation from exact_ghm.
inline double successor_features_check(const Mdp& mdp, const MarkovPolicy& pi, double gamma) {
  const auto ns = detail::idx(mdp.n_states());
  const Matrix resolvent = (Matrix::Identity(ns, ns) - gamma * state_transition(mdp, pi)).partialPivLu().solve(
      Matrix::Identity(ns, ns));
  const Matrix psi = (1.0 - gamma) * (mdp.transition() * resolvent);
  return (psi - exact_ghm(mdp, pi, gamma).dist()).cwiseAbs().maxCoeff();
}

}  // namespace ggpi
