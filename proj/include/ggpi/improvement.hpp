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

// Greedy improvement, GPI, GSP sets and improvement over suffix-closed sets.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/gsp.hpp"
#include "ggpi/mdp.hpp"

namespace ggpi {

inline constexpr double kTieTolerance = 1e-10;

/// A finite collection of GSPs sharing one alpha. Members keep insertion
/// order; membership is tested up to tail padding.
class GspSet {
 public:
  explicit GspSet(double alpha = 1.0) : alpha_(alpha) {}

  double alpha() const { return alpha_; }
  const std::vector<Gsp>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

  bool contains(const Gsp& gsp) const { return canonical_.count(gsp.canonical().base) != 0; }

  /// Adds `gsp` unless an equivalent member exists; returns true if added.
  bool add(Gsp gsp) {
    gsp.alpha = alpha_;
    if (contains(gsp)) return false;
    canonical_.insert(gsp.canonical().base);
    members_.push_back(std::move(gsp));
    return true;
  }

  /// Members sorted by their policy-index tuples (the tie-breaking order).
  std::vector<Gsp> sorted() const {
    std::vector<Gsp> out = members_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  double alpha_;
  std::vector<Gsp> members_;
  std::set<std::vector<std::size_t>> canonical_;
};

struct StateChoice {
  std::size_t action = 0;
  double value = 0.0;
  std::vector<std::size_t> tie_actions;
  std::size_t source = 0;        ///< index of the winning Q table / set member (sorted order)
  std::optional<Gsp> winner;     ///< winning GSP when improving over a GspSet
  std::vector<Gsp> tied_winners; ///< every member attaining the winning value at `action`
};

struct ImprovedPolicy {
  MarkovPolicy policy;
  std::vector<std::size_t> actions;
  std::vector<StateChoice> choices;
  std::vector<Gsp> members;           ///< evaluated GSPs in tie-breaking order (GspSet mode)
  std::vector<QFunction> member_q;    ///< their Q tables, estimated or exact
  std::uint64_t ghm_draws = 0;
};

namespace detail {

/// Greedy over the pointwise maximum of `qs`; lowest action index and lowest
/// source index win ties within `tol`.
inline ImprovedPolicy improve_over(const std::vector<const QFunction*>& qs, double tol) {
  if (qs.empty()) throw std::invalid_argument("improvement: empty list of Q-functions");
  const std::size_t ns = qs[0]->n_states();
  const std::size_t na = qs[0]->n_actions();
  for (const QFunction* q : qs) {
    if (q->n_states() != ns || q->n_actions() != na) throw std::invalid_argument("improvement: Q shape mismatch");
  }
  ImprovedPolicy out;
  out.actions.resize(ns);
  out.choices.resize(ns);
  for (std::size_t x = 0; x < ns; ++x) {
    std::vector<double> best(na, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> source(na, 0);
    for (std::size_t a = 0; a < na; ++a) {
      for (const QFunction* q : qs) best[a] = std::max(best[a], (*q)(x, a));
      while ((*qs[source[a]])(x, a) < best[a] - tol) ++source[a];
    }
    const double top = *std::max_element(best.begin(), best.end());
    StateChoice& choice = out.choices[x];
    for (std::size_t a = 0; a < na; ++a) {
      if (best[a] >= top - tol) choice.tie_actions.push_back(a);
    }
    choice.action = choice.tie_actions.front();
    choice.value = best[choice.action];
    choice.source = source[choice.action];
    out.actions[x] = choice.action;
  }
  out.policy = MarkovPolicy::deterministic(na, out.actions);
  return out;
}

}  // namespace detail

inline ImprovedPolicy greedy(const QFunction& q, double tol = kTieTolerance) {
  return detail::improve_over({&q}, tol);
}

inline ImprovedPolicy gpi(const std::vector<QFunction>& qs, double tol = kTieTolerance) {
  std::vector<const QFunction*> ptrs;
  for (const auto& q : qs) ptrs.push_back(&q);
  return detail::improve_over(ptrs, tol);
}

// ---------------------------------------------------------------------------
// GSP sets

inline constexpr std::size_t kDefaultSetCap = 100'000;

/// All |base|^m ordered m-tuples over `base` (policy indices) as GSPs.
inline GspSet depth_m_set(const std::vector<std::size_t>& base, double alpha, std::size_t m,
                          std::size_t cap = kDefaultSetCap) {
  if (m == 0) throw std::invalid_argument("depth_m_set: m must be >= 1");
  if (base.empty()) throw std::invalid_argument("depth_m_set: base policy list is empty");
  double count = std::pow(static_cast<double>(base.size()), static_cast<double>(m));
  if (count > static_cast<double>(cap)) {
    std::ostringstream os;
    os << "depth_m_set: " << base.size() << "^" << m << " members exceeds cap " << cap;
    throw std::length_error(os.str());
  }
  GspSet out(alpha);
  std::vector<std::size_t> digits(m, 0);
  for (;;) {
    Gsp gsp{std::vector<std::size_t>(m), alpha};
    for (std::size_t i = 0; i < m; ++i) gsp.base[i] = base[digits[i]];
    out.add(std::move(gsp));
    std::size_t pos = m;
    while (pos > 0 && ++digits[pos - 1] == base.size()) digits[--pos] = 0;
    if (pos == 0) break;
  }
  return out;
}

/// Depth-m tuples over `base` whose final policy is `last`.
inline GspSet depth_m_set_ending_in(const std::vector<std::size_t>& base, std::size_t last, double alpha,
                                    std::size_t m, std::size_t cap = kDefaultSetCap) {
  GspSet out(alpha);
  if (m == 1) {
    out.add(Gsp{{last}, alpha});
    return out;
  }
  const GspSet heads = depth_m_set(base, alpha, m - 1, cap);
  for (const Gsp& head : heads.members()) {
    Gsp gsp = head;
    gsp.base.push_back(last);
    out.add(std::move(gsp));
  }
  return out;
}

struct SuffixClosureReport {
  bool closed = true;
  std::vector<Gsp> missing;  ///< canonical forms, outermost first
};

inline SuffixClosureReport is_suffix_closed(const GspSet& set) {
  SuffixClosureReport report;
  std::set<std::vector<std::size_t>> seen;
  for (const Gsp& member : set.members()) {
    Gsp current = member.canonical();
    while (current.depth() > 1) {
      current = current.suffix().canonical();
      if (!set.contains(current) && seen.insert(current.base).second) report.missing.push_back(current);
    }
  }
  report.closed = report.missing.empty();
  return report;
}

inline GspSet close_suffixes(const GspSet& set) {
  GspSet out = set;
  for (const Gsp& gsp : is_suffix_closed(set).missing) out.add(gsp);
  return out;
}

// ---------------------------------------------------------------------------
// GGPI

enum class QSourceKind {
  kExact,     ///< linear-solve GSP evaluation
  kExpected,  ///< estimator expectation under the tables of a GHM registry
  kSampled,   ///< Monte Carlo estimator with n_samples per (state, action, GSP)
};

struct QSource {
  QSourceKind kind = QSourceKind::kExact;
  const GhmRegistry* ghms = nullptr;
  std::size_t n_samples = 0;
  RngStream* rng = nullptr;
  /// When non-zero, split this many samples per (state, action) across the set.
  std::size_t fair_total_budget = 0;

  static QSource exact() { return {}; }
  static QSource expected(const GhmRegistry& ghms) { return {QSourceKind::kExpected, &ghms, 0, nullptr, 0}; }
  static QSource sampled(const GhmRegistry& ghms, std::size_t n_samples, RngStream& rng) {
    return {QSourceKind::kSampled, &ghms, n_samples, &rng, 0};
  }
};

struct GgpiOptions {
  /// Accept sets that are not suffix-closed (the improvement guarantee is void).
  bool allow_unclosed = false;
  double tie_tolerance = kTieTolerance;
};

inline QFunction sampled_gsp_q(const Gsp& gsp, const PolicyRegistry& policies, const GhmRegistry& ghms,
                               const Mdp& mdp, std::size_t n_samples, RngStream& rng, std::uint64_t& draws) {
  QFunction q{Matrix::Zero(detail::idx(mdp.n_states()), detail::idx(mdp.n_actions()))};
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const Estimate e = gsp_q_estimate(gsp, policies, ghms, mdp, x, a, n_samples, rng);
      q.values(detail::idx(x), detail::idx(a)) = e.mean;
      draws += e.ghm_draws;
    }
  }
  return q;
}

inline ImprovedPolicy ggpi(const GspSet& set, const PolicyRegistry& policies, const Mdp& mdp,
                           const QSource& source = QSource::exact(), const GgpiOptions& options = {}) {
  if (set.size() == 0) throw std::invalid_argument("ggpi: empty GSP set");
  if (!options.allow_unclosed) {
    const auto report = is_suffix_closed(set);
    if (!report.closed) {
      std::string missing;
      for (const auto& g : report.missing) missing += " " + g.to_string(policies);
      throw std::invalid_argument("ggpi: GSP set is not suffix-closed; missing:" + missing);
    }
  }
  const std::vector<Gsp> members = set.sorted();
  std::vector<QFunction> qs;
  qs.reserve(members.size());
  std::uint64_t draws = 0;
  switch (source.kind) {
    case QSourceKind::kExact: {
      ExactGspEvaluator evaluator(mdp, policies);
      for (const Gsp& g : members) qs.push_back(evaluator.q(g));
      break;
    }
    case QSourceKind::kExpected:
      if (source.ghms == nullptr) throw std::invalid_argument("ggpi: expected mode needs a GHM registry");
      for (const Gsp& g : members) qs.push_back(expected_gsp_q(g, policies, *source.ghms, mdp));
      break;
    case QSourceKind::kSampled: {
      if (source.ghms == nullptr || source.rng == nullptr) {
        throw std::invalid_argument("ggpi: sampled mode needs a GHM registry and an RNG stream");
      }
      std::size_t per_gsp = source.n_samples;
      if (source.fair_total_budget > 0) per_gsp = std::max<std::size_t>(1, source.fair_total_budget / members.size());
      if (per_gsp == 0) throw std::invalid_argument("ggpi: sampled mode needs n_samples >= 1");
      for (const Gsp& g : members) qs.push_back(sampled_gsp_q(g, policies, *source.ghms, mdp, per_gsp, *source.rng, draws));
      break;
    }
  }
  std::vector<const QFunction*> ptrs;
  for (const auto& q : qs) ptrs.push_back(&q);
  ImprovedPolicy out = detail::improve_over(ptrs, options.tie_tolerance);
  for (std::size_t x = 0; x < out.choices.size(); ++x) {
    StateChoice& choice = out.choices[x];
    choice.winner = members[choice.source];
    for (std::size_t i = 0; i < qs.size(); ++i) {
      if (qs[i](x, choice.action) >= choice.value - options.tie_tolerance) choice.tied_winners.push_back(members[i]);
    }
  }
  out.members = members;
  out.member_q = std::move(qs);
  out.ghm_draws = draws;
  return out;
}

struct ImprovementReport {
  double min_margin = 0.0;  ///< min over (x, a) of Q^{pi'} - max_nu Q^nu
  std::size_t worst_state = 0;
  std::size_t worst_action = 0;
  QFunction improved_q;
};

inline ImprovementReport verify_improvement(const GspSet& set, const PolicyRegistry& policies,
                                            const MarkovPolicy& improved, const Mdp& mdp) {
  ImprovementReport report;
  report.improved_q = exact_q(mdp, improved);
  ExactGspEvaluator evaluator(mdp, policies);
  Matrix best = Matrix::Constant(detail::idx(mdp.n_states()), detail::idx(mdp.n_actions()),
                                 -std::numeric_limits<double>::infinity());
  for (const Gsp& g : set.members()) best = best.cwiseMax(evaluator.q(g).values);
  const Matrix margin = report.improved_q.values - best;
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  report.min_margin = margin.minCoeff(&r, &c);
  report.worst_state = static_cast<std::size_t>(r);
  report.worst_action = static_cast<std::size_t>(c);
  return report;
}

}  // namespace ggpi
