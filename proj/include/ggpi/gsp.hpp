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

// Geometric switching policies: follow pi_1, and before each subsequent
// action switch to the next base policy with probability alpha, staying on
// pi_n forever. Evaluation by sampled GHM chains and by exact linear solves.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/ghm.hpp"
#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi {

/// Named base policies; GSPs refer to them by index.
class PolicyRegistry {
 public:
  std::size_t add(std::string id, MarkovPolicy policy) {
    if (find(id) != kNotFound) throw std::invalid_argument("PolicyRegistry: duplicate id " + id);
    if (!policies_.empty() &&
        (policy.n_states() != policies_[0].n_states() || policy.n_actions() != policies_[0].n_actions())) {
      throw std::invalid_argument("PolicyRegistry: policy shape differs from registry");
    }
    ids_.push_back(std::move(id));
    policies_.push_back(std::move(policy));
    return policies_.size() - 1;
  }

  std::size_t size() const { return policies_.size(); }
  const MarkovPolicy& at(std::size_t i) const { return policies_.at(i); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const { return ids_; }

  static constexpr std::size_t kNotFound = static_cast<std::size_t>(-1);
  std::size_t find(const std::string& id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    return it == ids_.end() ? kNotFound : static_cast<std::size_t>(it - ids_.begin());
  }

 private:
  std::vector<std::string> ids_;
  std::vector<MarkovPolicy> policies_;
};

/// pi_{base[0]} -> ... -> pi_{base[n-1]} with switch probability alpha.
struct Gsp {
  std::vector<std::size_t> base;
  double alpha = 1.0;

  std::size_t depth() const { return base.size(); }

  /// Drops trailing repeats: pi -> pi evaluates identically to pi.
  Gsp canonical() const {
    Gsp out = *this;
    while (out.base.size() > 1 && out.base[out.base.size() - 1] == out.base[out.base.size() - 2]) {
      out.base.pop_back();
    }
    return out;
  }

  /// The GSP with its first base policy dropped (depth > 1 only).
  Gsp suffix() const {
    if (base.size() < 2) throw std::logic_error("Gsp::suffix: depth-1 GSP has no suffix");
    return Gsp{std::vector<std::size_t>(base.begin() + 1, base.end()), alpha};
  }

  void validate(std::size_t n_policies) const {
    if (base.empty()) throw std::invalid_argument("Gsp: at least one base policy required");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("Gsp: alpha must lie in (0, 1]");
    for (const std::size_t p : base) {
      if (p >= n_policies) throw std::invalid_argument("Gsp: policy reference does not resolve");
    }
  }

  std::string to_string(const PolicyRegistry& registry) const {
    std::string out;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (i > 0) out += "->";
      out += registry.id(base[i]);
    }
    return out;
  }

  bool operator==(const Gsp& other) const { return base == other.base && alpha == other.alpha; }
  bool operator<(const Gsp& other) const { return base < other.base; }
};

inline Gsp markov_gsp(std::size_t policy, double alpha = 1.0) { return Gsp{{policy}, alpha}; }

// ---------------------------------------------------------------------------
// Estimator weights

struct EstimatorWeights {
  std::vector<double> head;  ///< w_1 .. w_{n-1}
  double tail = 1.0;         ///< w_n
  double prefactor = 0.0;    ///< gamma / (1 - gamma)

  double sum() const {
    double s = tail;
    for (const double w : head) s += w;
    return s;
  }
};

inline EstimatorWeights estimator_weights(double gamma, double beta, std::size_t n) {
  if (!(gamma < 1.0)) throw std::invalid_argument("estimator_weights: gamma must be < 1");
  if (!(beta >= 0.0 && beta < gamma)) throw std::invalid_argument("estimator_weights: need 0 <= beta < gamma");
  if (n == 0) throw std::invalid_argument("estimator_weights: n must be >= 1");
  EstimatorWeights w;
  const double ratio = (gamma - beta) / (1.0 - beta);
  const double lead = (1.0 - gamma) / (1.0 - beta);
  double power = 1.0;
  for (std::size_t m = 1; m < n; ++m) {
    w.head.push_back(lead * power);
    power *= ratio;
  }
  w.tail = power;
  w.prefactor = gamma / (1.0 - gamma);
  return w;
}

inline double switching_beta(double gamma, double alpha) { return gamma * (1.0 - alpha); }

// ---------------------------------------------------------------------------
// GHM registry

/// Per-policy beta- and gamma-GHMs sharing one (gamma, beta) pair.
class GhmRegistry {
 public:
  GhmRegistry(double gamma, double beta) : gamma_(gamma), beta_(beta) {}

  double gamma() const { return gamma_; }
  double beta() const { return beta_; }

  void put_beta(std::size_t policy, std::shared_ptr<const GhmTable> table) {
    check_discount(*table, beta_, "beta");
    beta_tables_[policy] = std::move(table);
  }
  void put_gamma(std::size_t policy, std::shared_ptr<const GhmTable> table) {
    check_discount(*table, gamma_, "gamma");
    gamma_tables_[policy] = std::move(table);
  }

  bool has_beta(std::size_t policy) const { return beta_tables_.count(policy) != 0; }
  bool has_gamma(std::size_t policy) const { return gamma_tables_.count(policy) != 0; }

  const GhmTable& beta_table(std::size_t policy) const { return lookup(beta_tables_, policy, "beta"); }
  const GhmTable& gamma_table(std::size_t policy) const { return lookup(gamma_tables_, policy, "gamma"); }

  /// Throws unless every table needed to sample `gsp` is present.
  void require(const Gsp& gsp) const {
    for (std::size_t m = 0; m + 1 < gsp.depth(); ++m) beta_table(gsp.base[m]);
    gamma_table(gsp.base.back());
    if (gsp.depth() > 1 && std::abs(switching_beta(gamma_, gsp.alpha) - beta_) > 1e-12) {
      throw std::invalid_argument("GhmRegistry: beta does not equal gamma * (1 - alpha) for this GSP");
    }
  }

  /// Exact tables for every registered policy.
  static GhmRegistry exact(const Mdp& mdp, const PolicyRegistry& policies, double alpha) {
    GhmRegistry out(mdp.gamma(), switching_beta(mdp.gamma(), alpha));
    for (std::size_t i = 0; i < policies.size(); ++i) out.add_exact(mdp, policies, i);
    return out;
  }

  void add_exact(const Mdp& mdp, const PolicyRegistry& policies, std::size_t i) {
    put_beta(i, std::make_shared<const GhmTable>(exact_ghm(mdp, policies.at(i), beta_, policies.id(i))));
    put_gamma(i, std::make_shared<const GhmTable>(exact_ghm(mdp, policies.at(i), gamma_, policies.id(i))));
  }

 private:
  static void check_discount(const GhmTable& table, double expected, const char* which) {
    if (std::abs(table.beta() - expected) > 1e-12) {
      std::ostringstream os;
      os << "GhmRegistry: " << which << " table has discount " << table.beta() << ", expected " << expected;
      throw std::invalid_argument(os.str());
    }
  }

  static const GhmTable& lookup(const std::map<std::size_t, std::shared_ptr<const GhmTable>>& tables,
                                std::size_t policy, const char* which) {
    const auto it = tables.find(policy);
    if (it == tables.end()) {
      std::ostringstream os;
      os << "GhmRegistry: missing " << which << "-GHM for policy " << policy;
      throw std::out_of_range(os.str());
    }
    return *it->second;
  }

  double gamma_;
  double beta_;
  std::map<std::size_t, std::shared_ptr<const GhmTable>> beta_tables_;
  std::map<std::size_t, std::shared_ptr<const GhmTable>> gamma_tables_;
};

// ---------------------------------------------------------------------------
// Sampling

struct GspSamplePath {
  std::vector<std::size_t> states;   ///< X^(0) .. X^(n-1)
  std::vector<std::size_t> actions;  ///< A^(0) .. A^(n-1)
  std::size_t final_state = 0;       ///< X'
  std::size_t mix_index = 0;         ///< N' when the mixture sampler is used, else 0
};

/// X^(m) ~ mu_beta^{pi_m}(.|X^(m-1), A^(m-1)), A^(m) ~ pi_{m+1}(.|X^(m)),
/// X' ~ mu_gamma^{pi_n}(.|X^(n-1), A^(n-1)).
inline GspSamplePath sample_gsp_chain(const Gsp& gsp, const PolicyRegistry& policies, const GhmRegistry& ghms,
                                      std::size_t x, std::size_t a, RngStream& rng) {
  gsp.validate(policies.size());
  ghms.require(gsp);
  GspSamplePath path;
  path.states.reserve(gsp.depth());
  path.actions.reserve(gsp.depth());
  path.states.push_back(x);
  path.actions.push_back(a);
  for (std::size_t m = 1; m < gsp.depth(); ++m) {
    const std::size_t next = sample_ghm(ghms.beta_table(gsp.base[m - 1]), path.states.back(), path.actions.back(), rng);
    path.states.push_back(next);
    path.actions.push_back(policies.at(gsp.base[m]).sample(next, rng));
  }
  path.final_state = sample_ghm(ghms.gamma_table(gsp.base.back()), path.states.back(), path.actions.back(), rng);
  return path;
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t ghm_draws = 0;
};

enum class EstimatorKind {
  kFullChain,  ///< evaluates every X^(m) with its weight (n draws per sample)
  kMixture,    ///< draws N' and evaluates only X^(N')
};

namespace detail {

/// Reward term at a sampled state: (1-alpha) r^{pi_m} + alpha r^{pi_{m+1}}.
struct GspRewardTables {
  std::vector<Vector> policy_reward;  // r^{pi_i}(x) per GSP position

  GspRewardTables(const Gsp& gsp, const PolicyRegistry& policies, const Mdp& mdp) {
    for (const std::size_t p : gsp.base) policy_reward.push_back(ggpi::policy_reward(mdp, policies.at(p)));
  }
  double head(std::size_t m, double alpha, std::size_t x) const {
    return (1.0 - alpha) * policy_reward[m - 1](idx(x)) + alpha * policy_reward[m](idx(x));
  }
  double tail(std::size_t x) const { return policy_reward.back()(idx(x)); }
};

}  // namespace detail

/// Mean and standard error of n_samples independent GSP estimator draws.
inline Estimate gsp_q_estimate(const Gsp& gsp, const PolicyRegistry& policies, const GhmRegistry& ghms,
                               const Mdp& mdp, std::size_t x, std::size_t a, std::size_t n_samples, RngStream& rng,
                               EstimatorKind kind = EstimatorKind::kFullChain) {
  if (n_samples == 0) throw std::invalid_argument("gsp_q_estimate: n_samples must be >= 1");
  if (x >= mdp.n_states() || a >= mdp.n_actions()) throw std::out_of_range("gsp_q_estimate: state or action out of range");
  gsp.validate(policies.size());
  ghms.require(gsp);
  if (std::abs(ghms.gamma() - mdp.gamma()) > 1e-12) {
    throw std::invalid_argument("gsp_q_estimate: registry gamma differs from MDP gamma");
  }
  const std::size_t n = gsp.depth();
  const double alpha = gsp.alpha;
  const EstimatorWeights w = estimator_weights(mdp.gamma(), n > 1 ? ghms.beta() : 0.0, n);
  const detail::GspRewardTables rewards(gsp, policies, mdp);
  const double base = mdp.reward(x, a);

  // Cumulative mixture weights for N'.
  std::vector<double> mix_cdf;
  if (kind == EstimatorKind::kMixture) {
    double acc = 0.0;
    for (const double h : w.head) mix_cdf.push_back(acc += h);
    mix_cdf.push_back(acc + w.tail);
  }

  std::vector<const GhmTable*> beta_tables;
  std::vector<const MarkovPolicy*> next_policy;
  for (std::size_t m = 1; m < n; ++m) {
    beta_tables.push_back(&ghms.beta_table(gsp.base[m - 1]));
    next_policy.push_back(&policies.at(gsp.base[m]));
  }
  const GhmTable& gamma_table = ghms.gamma_table(gsp.base.back());

  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t draws = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double value = 0.0;
    if (kind == EstimatorKind::kFullChain) {
      std::size_t state = x;
      std::size_t action = a;
      for (std::size_t m = 1; m < n; ++m) {
        state = beta_tables[m - 1]->draw(state, action, rng);
        value += w.head[m - 1] * rewards.head(m, alpha, state);
        action = next_policy[m - 1]->sample(state, rng);
      }
      value += w.tail * rewards.tail(gamma_table.draw(state, action, rng));
      draws += n;
    } else {
      const std::size_t stop = rng.categorical_cdf(mix_cdf) + 1;  // N' in 1..n
      std::size_t state = x;
      std::size_t action = a;
      const std::size_t hops = std::min(stop, n - 1);
      for (std::size_t m = 1; m <= hops; ++m) {
        state = beta_tables[m - 1]->draw(state, action, rng);
        if (m < n) action = next_policy[m - 1]->sample(state, rng);
      }
      draws += hops;
      if (stop < n) {
        value = rewards.head(stop, alpha, state);
      } else {
        value = rewards.tail(gamma_table.draw(state, action, rng));
        ++draws;
      }
    }
    const double sample = base + w.prefactor * value;
    const double delta = sample - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (sample - mean);
  }
  Estimate out;
  out.mean = mean;
  out.n_samples = n_samples;
  out.ghm_draws = draws;
  out.std_error = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples))
                             : 0.0;
  return out;
}

/// The n-composition single-policy estimator (a GSP of n copies of pi).
inline Estimate markov_q_estimate(std::size_t policy, const PolicyRegistry& policies, const GhmRegistry& ghms,
                                  const Mdp& mdp, std::size_t x, std::size_t a, std::size_t n, std::size_t n_samples,
                                  RngStream& rng) {
  if (n == 0) throw std::invalid_argument("markov_q_estimate: n must be >= 1");
  const double alpha = n > 1 ? 1.0 - ghms.beta() / ghms.gamma() : 1.0;
  return gsp_q_estimate(Gsp{std::vector<std::size_t>(n, policy), alpha}, policies, ghms, mdp, x, a, n_samples, rng);
}

// ---------------------------------------------------------------------------
// Exact evaluation

/// Suffix-recursive exact evaluator with a cache keyed by canonical suffix.
class ExactGspEvaluator {
 public:
  ExactGspEvaluator(const Mdp& mdp, const PolicyRegistry& policies) : mdp_(mdp), policies_(policies) {}

  const QFunction& q(const Gsp& gsp) {
    gsp.validate(policies_.size());
    const Gsp key = gsp.canonical();
    const auto cached = cache_.find(key_of(key));
    if (cached != cache_.end()) return cached->second;
    QFunction value;
    if (key.depth() == 1) {
      value = exact_q(mdp_, policies_.at(key.base[0]));
    } else {
      // Q_i = r + gamma (1-alpha) P Pi_i Q_i + gamma alpha P Pi_{i+1} Q_{i+1}
      const QFunction& next = q(key.suffix());
      const Vector next_flat = flatten(next.values);
      const Matrix& p = mdp_.transition();
      const Vector continuation = p * (policy_mixing(policies_.at(key.base[1])) * next_flat);
      const Vector rhs = flatten(mdp_.reward()) + mdp_.gamma() * key.alpha * continuation;
      const double scale = mdp_.gamma() * (1.0 - key.alpha);
      Vector sol;
      if (scale == 0.0) {
        sol = rhs;
        for (std::size_t i = 0; i < mdp_.n_pairs(); ++i) {
          if (mdp_.is_terminal(i / mdp_.n_actions())) sol(detail::idx(i)) = 0.0;
        }
      } else {
        sol = solve_state_action_system(mdp_, transition_operator(mdp_, policies_.at(key.base[0])), scale, rhs);
      }
      value = QFunction{unflatten(sol, mdp_.n_actions())};
    }
    return cache_.emplace(key_of(key), std::move(value)).first->second;
  }

  std::size_t cache_size() const { return cache_.size(); }

 private:
  static std::pair<std::vector<std::size_t>, double> key_of(const Gsp& gsp) { return {gsp.base, gsp.alpha}; }

  const Mdp& mdp_;
  const PolicyRegistry& policies_;
  std::map<std::pair<std::vector<std::size_t>, double>, QFunction> cache_;
};

/// Q^nu by backward suffix recursion.
inline QFunction exact_gsp_q(const Gsp& gsp, const PolicyRegistry& policies, const Mdp& mdp) {
  ExactGspEvaluator evaluator(mdp, policies);
  return evaluator.q(gsp);
}

/// Q^nu from one joint solve on the product chain (state, active index).
inline QFunction exact_gsp_q_augmented(const Gsp& gsp, const PolicyRegistry& policies, const Mdp& mdp) {
  gsp.validate(policies.size());
  const std::size_t n = gsp.depth();
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  const std::size_t block = ns * na;
  const auto total = detail::idx(n * block);
  auto row = [&](std::size_t i, std::size_t x, std::size_t a) { return detail::idx(i * block + x * na + a); };

  Matrix lhs = Matrix::Identity(total, total);
  Vector rhs = Vector::Zero(total);
  const double g = mdp.gamma();
  for (std::size_t i = 0; i < n; ++i) {
    const double stay = i + 1 < n ? 1.0 - gsp.alpha : 1.0;
    for (std::size_t x = 0; x < ns; ++x) {
      if (mdp.is_terminal(x)) continue;  // Q pinned to 0
      for (std::size_t a = 0; a < na; ++a) {
        const auto r = row(i, x, a);
        rhs(r) = mdp.reward(x, a);
        for (std::size_t y = 0; y < ns; ++y) {
          const double p = mdp.prob(x, a, y);
          if (p == 0.0 || mdp.is_terminal(y)) continue;
          for (std::size_t b = 0; b < na; ++b) {
            lhs(r, row(i, y, b)) -= g * p * stay * policies.at(gsp.base[i]).prob(y, b);
            if (i + 1 < n) lhs(r, row(i + 1, y, b)) -= g * p * gsp.alpha * policies.at(gsp.base[i + 1]).prob(y, b);
          }
        }
      }
    }
  }
  const Vector sol = lhs.partialPivLu().solve(rhs);
  const double residual = (lhs * sol - rhs).cwiseAbs().maxCoeff();
  if (!(residual <= kSolveResidualTolerance * std::max(1.0, sol.cwiseAbs().maxCoeff()))) {
    throw SolverError("exact_gsp_q_augmented: residual exceeds tolerance");
  }
  return QFunction{unflatten(sol.head(detail::idx(block)), na)};
}

/// Expectation of the GSP estimator under the tables in `ghms`, computed by
/// propagating exact state distributions through the chain. With exact GHMs
/// this equals Q^nu; with learned GHMs it is the plug-in value.
inline QFunction expected_gsp_q(const Gsp& gsp, const PolicyRegistry& policies, const GhmRegistry& ghms,
                                const Mdp& mdp) {
  gsp.validate(policies.size());
  ghms.require(gsp);
  const std::size_t n = gsp.depth();
  const EstimatorWeights w = estimator_weights(mdp.gamma(), n > 1 ? ghms.beta() : 0.0, n);
  const detail::GspRewardTables rewards(gsp, policies, mdp);
  Vector acc = Vector::Zero(detail::idx(mdp.n_pairs()));
  // dist: (S*A) x (S*A) law of (X^(m), A^(m)) given the start pair; start at identity.
  Matrix dist = Matrix::Identity(detail::idx(mdp.n_pairs()), detail::idx(mdp.n_pairs()));
  for (std::size_t m = 1; m < n; ++m) {
    const Matrix states = dist * ghms.beta_table(gsp.base[m - 1]).dist();
    Vector head_reward(detail::idx(mdp.n_states()));
    for (std::size_t y = 0; y < mdp.n_states(); ++y) head_reward(detail::idx(y)) = rewards.head(m, gsp.alpha, y);
    acc += w.head[m - 1] * (states * head_reward);
    dist = states * policy_mixing(policies.at(gsp.base[m]));
  }
  const Matrix final_states = dist * ghms.gamma_table(gsp.base.back()).dist();
  acc += w.tail * (final_states * rewards.policy_reward.back());
  const Vector q = flatten(mdp.reward()) + w.prefactor * acc;
  return QFunction{unflatten(q, mdp.n_actions())};
}

// ---------------------------------------------------------------------------
// Geometric random-sum identities

namespace detail {

inline void check_discount_order(double beta, double gamma) {
  if (!(beta >= 0.0 && beta < gamma && gamma < 1.0)) {
    throw std::invalid_argument("geometric sum check: need 0 <= beta < gamma < 1");
  }
}

/// pmf of Geometric(1 - q) on {1, ..., len - 1}; index 0 is zero.
inline std::vector<double> geometric_pmf(double q, std::size_t len) {
  std::vector<double> pmf(len, 0.0);
  double power = 1.0;
  for (std::size_t k = 1; k < len; ++k) {
    pmf[k] = (1.0 - q) * power;
    power *= q;
  }
  return pmf;
}

inline std::vector<double> convolve(const std::vector<double>& f, const std::vector<double>& g) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0) continue;
    for (std::size_t j = 0; i + j < out.size(); ++j) out[i + j] += f[i] * g[j];
  }
  return out;
}

/// Support length so that the Geometric(1 - gamma) tail beyond it is < 1e-12.
inline std::size_t support_length(double gamma, std::size_t truncation) {
  std::size_t len = 2;
  if (gamma > 0.0) len = static_cast<std::size_t>(std::ceil(std::log(1e-12) / std::log(gamma))) + 2;
  return std::max<std::size_t>(2, std::min(len, truncation + 1));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace detail

/// Max pmf deviation between sum_{i<=N} T_i (T_i ~ Geom(1-beta),
/// N ~ Geom((1-gamma)/(1-beta))) and Geometric(1 - gamma).
inline double geom_sum_pmf_check(double beta, double gamma, std::size_t truncation) {
  detail::check_discount_order(beta, gamma);
  const std::size_t len = detail::support_length(gamma, truncation);
  const std::vector<double> hop = detail::geometric_pmf(beta, len);
  const double stop = (1.0 - gamma) / (1.0 - beta);
  // Renewal: S = T_1 + [continue w.p. 1 - stop] S'.
  std::vector<double> sum(len, 0.0);
  for (std::size_t s = 1; s < len; ++s) {
    double cont = 0.0;
    for (std::size_t t = 1; t < s; ++t) cont += hop[t] * sum[s - t];
    sum[s] = stop * hop[s] + (1.0 - stop) * cont;
  }
  return detail::max_abs_diff(sum, detail::geometric_pmf(gamma, len));
}

/// Max pmf deviation between sum_{i<=min(N',n-1)} T_i + 1{N'=n} T' and
/// Geometric(1 - gamma), with N' distributed by the estimator weights.
inline double geom_fixed_sum_check(double beta, double gamma, std::size_t n, std::size_t truncation) {
  detail::check_discount_order(beta, gamma);
  if (n == 0) throw std::invalid_argument("geom_fixed_sum_check: n must be >= 1");
  const std::size_t len = detail::support_length(gamma, truncation);
  const EstimatorWeights w = estimator_weights(gamma, beta, n);
  const std::vector<double> hop = detail::geometric_pmf(beta, len);
  std::vector<double> partial(len, 0.0);  // pmf of T_1 + ... + T_m
  partial[0] = 1.0;
  std::vector<double> total(len, 0.0);
  for (std::size_t m = 1; m < n; ++m) {
    partial = detail::convolve(partial, hop);
    for (std::size_t s = 0; s < len; ++s) total[s] += w.head[m - 1] * partial[s];
  }
  const std::vector<double> tail = detail::convolve(partial, detail::geometric_pmf(gamma, len));
  for (std::size_t s = 0; s < len; ++s) total[s] += w.tail * tail[s];
  return detail::max_abs_diff(total, detail::geometric_pmf(gamma, len));
}

/// Max row-TV between the n-fold composition of mu_beta^pi and the law of the
/// state reached after a sum of n independent Geometric(1 - beta) hop counts.
inline double composed_hops_check(const Mdp& mdp, const MarkovPolicy& pi, double beta, std::size_t n,
                                  std::size_t truncation) {
  if (n == 0) throw std::invalid_argument("composed_hops_check: n must be >= 1");
  const GhmTable mu = exact_ghm(mdp, pi, beta);
  Matrix composed = mu.dist();
  for (std::size_t k = 1; k < n; ++k) composed = compose(mu.dist(), pi, composed);

  // pmf of the total hop count, truncated once the remaining mass is < 1e-13.
  std::size_t len = n + 2;
  if (beta > 0.0) {
    len = n * (static_cast<std::size_t>(std::ceil(std::log(1e-13) / std::log(beta))) + 2) + 2;
  }
  len = std::min(len, truncation + 1);
  const std::vector<double> hop = detail::geometric_pmf(beta, len);
  std::vector<double> hops(len, 0.0);
  hops[0] = 1.0;
  for (std::size_t k = 0; k < n; ++k) hops = detail::convolve(hops, hop);

  const Matrix step = state_transition(mdp, pi);
  Matrix occupancy = mdp.transition();  // law of X_1
  Matrix mixture = Matrix::Zero(occupancy.rows(), occupancy.cols());
  for (std::size_t s = 1; s < len; ++s) {
    if (hops[s] != 0.0) mixture += hops[s] * occupancy;
    occupancy = occupancy * step;
  }
  return max_row_tv(composed, mixture);
}

}  // namespace ggpi
