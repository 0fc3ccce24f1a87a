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

// Composite procedures: policy iteration driven by improvement over GSP sets,
// and zero-learning transfer to a newly revealed reward.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/cetd.hpp"
#include "ggpi/ghm.hpp"
#include "ggpi/gsp.hpp"
#include "ggpi/improvement.hpp"
#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi {

enum class GhmMode {
  kExact,  ///< linear-solve GHMs from the true dynamics
  kCetd,   ///< GHMs learned by synchronous cross-entropy TD
};

struct PiConfig {
  std::size_t depth = 1;
  double alpha = 0.1;
  /// Samples per (state, action, GSP); 0 evaluates every GSP exactly.
  std::size_t n_samples = 1000;
  std::size_t n_iter = 50;
  GhmMode ghm_mode = GhmMode::kExact;
  RunOptions cetd;  ///< learner settings in kCetd mode
  /// Only evaluate GSPs whose final policy is the newest one.
  bool end_in_newest = false;
  std::size_t set_cap = kDefaultSetCap;
  /// Stop once this many GHM draws have been spent (0 = unlimited).
  std::uint64_t sample_cap = 0;
  /// End the run at the first VI-optimal iterate (sweeps measuring time-to-optimal).
  bool stop_at_optimal = false;
};

struct PiRunRecord {
  std::size_t iterations_used = 0;
  /// Deterministic action choices; entry 0 is the initial policy when it is
  /// deterministic (its modes otherwise).
  std::vector<std::vector<std::size_t>> policies;
  std::vector<std::uint64_t> draws_per_iteration;
  std::uint64_t total_ghm_samples = 0;
  bool converged = false;
  bool budget_exhausted = false;
  bool final_optimal = false;
  /// First improvement step whose output is VI-optimal, and draws spent by then.
  std::optional<std::size_t> iterations_to_optimal;
  std::optional<std::uint64_t> samples_to_optimal;
};

namespace detail {

inline std::shared_ptr<const GhmTable> learned_ghm(const Mdp& mdp, const MarkovPolicy& pi, double discount,
                                                   const std::string& id, const RunOptions& options, RngStream& rng) {
  const LearnResult learned =
      learn_ghm(mdp, pi, discount, LogitTable::zeros(mdp.n_states(), mdp.n_actions()), options, rng);
  return std::make_shared<const GhmTable>(learned.logits.to_ghm(id, discount));
}

}  // namespace detail

/// Adds GHMs for policy `i` to `ghms` according to `mode`.
inline void build_ghms(const Mdp& mdp, const PolicyRegistry& policies, std::size_t i, GhmMode mode,
                       const RunOptions& cetd, GhmRegistry& ghms, RngStream& rng) {
  if (mode == GhmMode::kExact) {
    ghms.add_exact(mdp, policies, i);
    return;
  }
  ghms.put_beta(i, detail::learned_ghm(mdp, policies.at(i), ghms.beta(), policies.id(i), cetd, rng));
  ghms.put_gamma(i, detail::learned_ghm(mdp, policies.at(i), ghms.gamma(), policies.id(i), cetd, rng));
}

/// Policy iteration where each improvement step is GGPI over the depth-m
/// compositions of every policy produced so far.
inline PiRunRecord ggpi_policy_iteration(const Mdp& mdp, const MarkovPolicy& initial, const PiConfig& config,
                                         RngStream& rng, const ValueIterationResult* oracle = nullptr) {
  if (config.depth == 0) throw std::invalid_argument("ggpi_policy_iteration: depth must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha <= 1.0)) throw std::invalid_argument("ggpi_policy_iteration: alpha must lie in (0, 1]");
  check_dimensions(mdp, initial);
  std::optional<ValueIterationResult> own_oracle;
  if (oracle == nullptr) {
    own_oracle = value_iteration(mdp, 1e-9);
    oracle = &*own_oracle;
  }
  const bool exact_eval = config.n_samples == 0;
  PolicyRegistry policies;
  policies.add("pi0", initial);
  GhmRegistry ghms(mdp.gamma(), switching_beta(mdp.gamma(), config.alpha));
  if (!exact_eval) build_ghms(mdp, policies, 0, config.ghm_mode, config.cetd, ghms, rng);

  PiRunRecord record;
  record.policies.push_back(initial.actions());
  std::size_t unchanged = 0;
  for (std::size_t t = 1; t <= config.n_iter; ++t) {
    std::vector<std::size_t> all(policies.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const GspSet set = config.end_in_newest
                           ? depth_m_set_ending_in(all, all.back(), config.alpha, config.depth, config.set_cap)
                           : depth_m_set(all, config.alpha, config.depth, config.set_cap);
    const ImprovedPolicy improved =
        exact_eval ? ggpi(set, policies, mdp, QSource::exact())
                   : ggpi(set, policies, mdp, QSource::sampled(ghms, config.n_samples, rng));
    record.iterations_used = t;
    record.draws_per_iteration.push_back(improved.ghm_draws);
    record.total_ghm_samples += improved.ghm_draws;
    record.policies.push_back(improved.actions);
    const bool optimal = is_optimal_policy(*oracle, improved.actions, mdp);
    if (optimal && !record.iterations_to_optimal) {
      record.iterations_to_optimal = t;
      record.samples_to_optimal = record.total_ghm_samples;
    }
    record.final_optimal = optimal;
    if (optimal && config.stop_at_optimal) break;

    const bool same = improved.actions == record.policies[record.policies.size() - 2];
    unchanged = same ? unchanged + 1 : 0;
    if (unchanged >= (exact_eval ? 1u : 2u)) {
      record.converged = true;
      break;
    }
    if (config.sample_cap > 0 && record.total_ghm_samples >= config.sample_cap) {
      record.budget_exhausted = true;
      break;
    }
    if (!same) {
      const std::size_t id = policies.add("pi" + std::to_string(t), improved.policy);
      if (!exact_eval) build_ghms(mdp, policies, id, config.ghm_mode, config.cetd, ghms, rng);
    }
  }
  return record;
}

// ---------------------------------------------------------------------------
// Transfer

/// GHMs for a fixed set of base policies, computed once and reused across
/// rewards. `computations` counts table constructions.
class GhmCache {
 public:
  GhmCache(const Mdp& dynamics, const PolicyRegistry& policies, double alpha)
      : ghms_(dynamics.gamma(), switching_beta(dynamics.gamma(), alpha)) {
    for (std::size_t i = 0; i < policies.size(); ++i) {
      ghms_.add_exact(dynamics, policies, i);
      computations_ += 2;
    }
  }

  const GhmRegistry& registry() const { return ghms_; }
  std::size_t computations() const { return computations_; }

 private:
  GhmRegistry ghms_;
  std::size_t computations_ = 0;
};

struct TransferStep {
  std::size_t state = 0;
  std::size_t action = 0;
  Gsp winner;
  double value = 0.0;
};

struct TransferRunRecord {
  std::vector<TransferStep> steps;
  double episode_return = 0.0;  ///< undiscounted
  double discounted_return = 0.0;
  bool reached_stop = false;  ///< false when the episode cap was hit
  std::uint64_t ghm_draws = 0;
};

struct TransferConfig {
  std::size_t depth = 3;
  double alpha = 0.1;
  /// Samples per (action, GSP) at each visited state; 0 uses the estimator's
  /// exact expectation under the cached GHMs.
  std::size_t n_samples = 100;
  std::size_t episode_cap = 200;
  std::size_t start_state = 0;
  /// The episode ends on entering any of these states (terminal states always end it).
  std::vector<std::size_t> stop_states;
};

/// Acts greedily w.r.t. max over depth-m GSPs of base policies, with Q
/// estimated from cached GHMs at every visited state. No learning occurs.
inline TransferRunRecord ggpi_transfer(const Mdp& mdp, const PolicyRegistry& policies, const GhmCache& cache,
                                       const TransferConfig& config, RngStream& rng) {
  if (config.episode_cap == 0) throw std::invalid_argument("ggpi_transfer: episode cap must be >= 1");
  std::vector<std::size_t> base(policies.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = i;
  const GspSet set = depth_m_set(base, config.alpha, config.depth);
  const std::vector<Gsp> members = set.sorted();
  const GhmRegistry& ghms = cache.registry();

  std::vector<QFunction> expected;
  if (config.n_samples == 0) {
    for (const Gsp& g : members) expected.push_back(expected_gsp_q(g, policies, ghms, mdp));
  }
  auto stops = [&](std::size_t s) {
    return mdp.is_terminal(s) ||
           std::find(config.stop_states.begin(), config.stop_states.end(), s) != config.stop_states.end();
  };

  TransferRunRecord record;
  std::size_t x = config.start_state;
  double discount = 1.0;
  for (std::size_t t = 0; t < config.episode_cap; ++t) {
    TransferStep step{x, 0, members.front(), -std::numeric_limits<double>::infinity()};
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      for (std::size_t i = 0; i < members.size(); ++i) {
        double q = 0.0;
        if (config.n_samples == 0) {
          q = expected[i](x, a);
        } else {
          const Estimate e = gsp_q_estimate(members[i], policies, ghms, mdp, x, a, config.n_samples, rng);
          q = e.mean;
          record.ghm_draws += e.ghm_draws;
        }
        if (q > step.value + kTieTolerance) {
          step.value = q;
          step.action = a;
          step.winner = members[i];
        }
      }
    }
    record.steps.push_back(step);
    record.episode_return += mdp.reward(x, step.action);
    record.discounted_return += discount * mdp.reward(x, step.action);
    discount *= mdp.gamma();
    x = sample_transition(mdp, x, step.action, rng);
    if (stops(x)) {
      record.reached_stop = true;
      break;
    }
  }
  return record;
}

// ---------------------------------------------------------------------------
// Coverage of optimal actions

struct CoverageReport {
  std::size_t depth = 0;
  std::vector<std::size_t> chosen;
  std::vector<bool> optimal;
  std::size_t optimal_count = 0;  ///< over non-terminal states
  std::size_t live_states = 0;
};

/// Exact GGPI over the depth-m compositions of `policies` and, per state,
/// whether the chosen action lies in the VI-optimal set.
inline CoverageReport optimal_coverage(const Mdp& mdp, const PolicyRegistry& policies, double alpha, std::size_t depth,
                                       const ValueIterationResult& oracle) {
  std::vector<std::size_t> base(policies.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = i;
  const ImprovedPolicy improved = ggpi(depth_m_set(base, alpha, depth), policies, mdp, QSource::exact());
  CoverageReport report;
  report.depth = depth;
  report.chosen = improved.actions;
  report.optimal.resize(mdp.n_states(), false);
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    ++report.live_states;
    report.optimal[x] = oracle.is_optimal_action(x, improved.actions[x]);
    if (report.optimal[x]) ++report.optimal_count;
  }
  return report;
}

}  // namespace ggpi
