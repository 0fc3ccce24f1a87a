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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ggpi/environments.hpp"
#include "ggpi/gsp.hpp"
#include "oracles.hpp"

namespace ggpi {
namespace {

// ---------------------------------------------------------------------------
// weights

TEST(EstimatorWeights, TwoStageExample) {
  const EstimatorWeights w = estimator_weights(0.9, 0.8, 2);
  ASSERT_EQ(w.head.size(), 1u);
  EXPECT_NEAR(w.head[0], 0.5, 1e-15);
  EXPECT_NEAR(w.tail, 0.5, 1e-15);
  EXPECT_NEAR(w.prefactor, 9.0, 1e-12);
}

TEST(EstimatorWeights, DepthOne) {
  const EstimatorWeights w = estimator_weights(0.9, 0.3, 1);
  EXPECT_TRUE(w.head.empty());
  EXPECT_EQ(w.tail, 1.0);
}

TEST(EstimatorWeights, SumToOneOnGrid) {
  EXPECT_NEAR(estimator_weights(0.95, switching_beta(0.95, 0.1), 3).sum(), 1.0, 1e-12);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double gamma = 0.05 + 0.094 * i;
      const double beta = gamma * j / 10.0;
      const std::size_t n = 1 + static_cast<std::size_t>((i * 7 + j * 3) % 12);
      EXPECT_NEAR(estimator_weights(gamma, beta, n).sum(), 1.0, 1e-12) << gamma << " " << beta << " " << n;
    }
  }
}

TEST(EstimatorWeights, RejectsBadParameters) {
  EXPECT_THROW(estimator_weights(0.9, 0.9, 2), std::invalid_argument);
  EXPECT_THROW(estimator_weights(1.0, 0.5, 2), std::invalid_argument);
  EXPECT_THROW(estimator_weights(0.9, 0.5, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Gsp helpers

TEST(Gsp, CanonicalStripsTrailingRepeats) {
  EXPECT_EQ((Gsp{{0, 1, 1, 1}, 0.5}.canonical().base), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ((Gsp{{1, 1}, 0.5}.canonical().base), (std::vector<std::size_t>{1}));
  EXPECT_EQ((Gsp{{1, 0, 1}, 0.5}.canonical().base), (std::vector<std::size_t>{1, 0, 1}));
}

TEST(Gsp, ValidateRejects) {
  EXPECT_THROW((Gsp{{}, 0.5}.validate(2)), std::invalid_argument);
  EXPECT_THROW((Gsp{{0}, 0.0}.validate(2)), std::invalid_argument);
  EXPECT_THROW((Gsp{{0, 2}, 0.5}.validate(2)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// chain sampling

struct RandomSetup {
  Mdp mdp;
  PolicyRegistry policies;
};

RandomSetup random_setup(std::uint64_t seed, std::size_t ns, std::size_t na, std::size_t n_policies,
                         double gamma = 0.9, bool state_reward_only = false) {
  RngStream rng(seed);
  RandomSetup s{random_mdp(ns, na, std::min<std::size_t>(ns, 4), 1.0, gamma, rng, state_reward_only), {}};
  for (std::size_t i = 0; i < n_policies; ++i) s.policies.add("p" + std::to_string(i), random_policy(ns, na, rng));
  return s;
}

TEST(SampleGspChain, DepthOneIsSingleGammaDraw) {
  const RandomSetup s = random_setup(1, 5, 2, 1);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 0.3);
  RngStream a(4), b(4);
  for (int i = 0; i < 200; ++i) {
    const GspSamplePath path = sample_gsp_chain(markov_gsp(0, 0.3), s.policies, ghms, 2, 1, a);
    ASSERT_EQ(path.states.size(), 1u);
    ASSERT_EQ(path.final_state, sample_ghm(ghms.gamma_table(0), 2, 1, b));
  }
}

TEST(SampleGspChain, IdenticalPoliciesFollowComposedLaw) {
  const RandomSetup s = random_setup(2, 6, 2, 1);
  const double alpha = 0.3;
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, alpha);
  const MarkovPolicy& pi = s.policies.at(0);
  // Law of X': beta-model composed twice, then the gamma-model.
  const Matrix law = compose(ghms.gamma_table(0).dist(), pi, compose(ghms.beta_table(0), pi, ghms.beta_table(0)));
  RngStream rng(5);
  const std::size_t n = 100000;
  std::vector<std::size_t> counts(6, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_gsp_chain(Gsp{{0, 0, 0}, alpha}, s.policies, ghms, 3, 0, rng).final_state];
  std::vector<double> probs(6);
  for (std::size_t y = 0; y < 6; ++y) probs[y] = law(3 * 2 + 0, static_cast<Eigen::Index>(y));
  const auto chi = oracle::chi_square(counts, probs);
  EXPECT_LT(chi.statistic, oracle::chi_square_critical_1pct(chi.dof));
}

TEST(SampleGspChain, AlphaOneHopsAreSingleSteps) {
  const RandomSetup s = random_setup(3, 6, 2, 2);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 1.0);
  EXPECT_EQ(ghms.beta(), 0.0);
  EXPECT_EQ(ghms.beta_table(0).dist(), s.mdp.transition());
  RngStream rng(6);
  const std::size_t n = 100000;
  std::vector<std::size_t> counts(6, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_gsp_chain(Gsp{{0, 1}, 1.0}, s.policies, ghms, 4, 1, rng).states[1]];
  std::vector<double> probs(6);
  for (std::size_t y = 0; y < 6; ++y) probs[y] = s.mdp.prob(4, 1, y);
  const auto chi = oracle::chi_square(counts, probs);
  EXPECT_LT(chi.statistic, oracle::chi_square_critical_1pct(chi.dof));
}

TEST(SampleGspChain, MissingTablesAndBetaMismatch) {
  const RandomSetup s = random_setup(4, 4, 2, 2);
  GhmRegistry partial(0.9, switching_beta(0.9, 0.5));
  partial.put_gamma(1, std::make_shared<const GhmTable>(exact_ghm(s.mdp, s.policies.at(1), 0.9)));
  RngStream rng(1);
  EXPECT_THROW(sample_gsp_chain(Gsp{{0, 1}, 0.5}, s.policies, partial, 0, 0, rng), std::out_of_range);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 0.5);
  EXPECT_THROW(sample_gsp_chain(Gsp{{0, 1}, 0.25}, s.policies, ghms, 0, 0, rng), std::invalid_argument);
  EXPECT_THROW(partial.put_beta(0, std::make_shared<const GhmTable>(exact_ghm(s.mdp, s.policies.at(0), 0.3))),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// estimation

TEST(GspQEstimate, SingleStateHasZeroVariance) {
  const Mdp mdp = fixtures::single_state(1.0, 0.9);
  PolicyRegistry policies;
  policies.add("a", MarkovPolicy::uniform(1, 1));
  policies.add("b", MarkovPolicy::uniform(1, 1));
  const GhmRegistry ghms = GhmRegistry::exact(mdp, policies, 0.2);
  RngStream rng(1);
  const Estimate e = gsp_q_estimate(Gsp{{0, 1, 0}, 0.2}, policies, ghms, mdp, 0, 0, 1000, rng);
  EXPECT_NEAR(e.mean, 1.0 + 0.9 / 0.1, 1e-9);
  EXPECT_NEAR(e.std_error, 0.0, 1e-9);
  EXPECT_EQ(e.ghm_draws, 3000u);
}

TEST(GspQEstimate, FourRoomsRightThenUp) {
  const GridWorld world = four_rooms(0.9);
  const double alpha = 1.0 - 0.8 / 0.9;
  const GhmRegistry ghms = GhmRegistry::exact(world.mdp, world.policies, alpha);
  EXPECT_NEAR(ghms.beta(), 0.8, 1e-12);
  const Gsp nu{{2, 3}, alpha};
  const QFunction exact = exact_gsp_q(nu, world.policies, world.mdp);
  const std::size_t x = world.state_of.at({2, 8});
  RngStream rng(7);
  for (std::size_t a = 0; a < 4; ++a) {
    const Estimate e = gsp_q_estimate(nu, world.policies, ghms, world.mdp, x, a, 100000, rng);
    EXPECT_LE(std::abs(e.mean - exact(x, a)), 3.0 * e.std_error + 1e-12) << "action " << a;
  }
  EXPECT_GT(exact(x, 2), 0.0);
}

TEST(GspQEstimate, IdenticalPoliciesMatchMarkovQ) {
  const RandomSetup s = random_setup(9, 7, 3, 1);
  const double alpha = 0.25;
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, alpha);
  const QFunction q = exact_q(s.mdp, s.policies.at(0));
  RngStream rng(10);
  for (std::size_t x = 0; x < 7; x += 3) {
    const Estimate e = gsp_q_estimate(Gsp{{0, 0, 0}, alpha}, s.policies, ghms, s.mdp, x, 1, 100000, rng);
    EXPECT_LE(std::abs(e.mean - q(x, 1)), 3.0 * e.std_error);
  }
}

TEST(GspQEstimate, StateRewardPathAndMixtureSampler) {
  for (const bool state_only : {true, false}) {
    const RandomSetup s = random_setup(11, 6, 2, 2, 0.9, state_only);
    const double alpha = 0.4;
    const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, alpha);
    const Gsp nu{{1, 0, 1}, alpha};
    const QFunction exact = exact_gsp_q(nu, s.policies, s.mdp);
    RngStream rng(12);
    for (const auto kind : {EstimatorKind::kFullChain, EstimatorKind::kMixture}) {
      const Estimate e = gsp_q_estimate(nu, s.policies, ghms, s.mdp, 2, 1, 100000, rng, kind);
      EXPECT_LE(std::abs(e.mean - exact(2, 1)), 3.0 * e.std_error) << state_only;
    }
  }
}

TEST(GspQEstimate, RangeAndSampleCountErrors) {
  const RandomSetup s = random_setup(13, 4, 2, 1);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 0.5);
  RngStream rng(1);
  EXPECT_THROW(gsp_q_estimate(markov_gsp(0, 0.5), s.policies, ghms, s.mdp, 0, 0, 0, rng), std::invalid_argument);
  EXPECT_THROW(gsp_q_estimate(markov_gsp(0, 0.5), s.policies, ghms, s.mdp, 4, 0, 10, rng), std::out_of_range);
}

TEST(GspQEstimate, ReplayIsDeterministic) {
  const RandomSetup s = random_setup(14, 5, 2, 2);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 0.5);
  RngStream a(3, 1), b(3, 1);
  const Estimate ea = gsp_q_estimate(Gsp{{0, 1}, 0.5}, s.policies, ghms, s.mdp, 1, 1, 5000, a);
  const Estimate eb = gsp_q_estimate(Gsp{{0, 1}, 0.5}, s.policies, ghms, s.mdp, 1, 1, 5000, b);
  EXPECT_EQ(ea.mean, eb.mean);
  EXPECT_EQ(ea.std_error, eb.std_error);
}

TEST(MarkovQEstimate, DepthOneIsSingleSampleEstimator) {
  const RandomSetup s = random_setup(15, 5, 2, 1);
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, 0.5);
  RngStream a(8), b(8);
  const Estimate e1 = markov_q_estimate(0, s.policies, ghms, s.mdp, 0, 1, 1, 3000, a);
  const Estimate e2 = gsp_q_estimate(markov_gsp(0), s.policies, ghms, s.mdp, 0, 1, 3000, b);
  EXPECT_EQ(e1.mean, e2.mean);
}

TEST(MarkovQEstimate, FourRoomsThreeCompositions) {
  const GridWorld world = four_rooms(0.9);
  const GhmRegistry ghms = GhmRegistry::exact(world.mdp, world.policies, 1.0 - 0.8 / 0.9);
  const QFunction q = exact_q(world.mdp, world.policies.at(2));
  RngStream rng(16);
  const std::size_t x = world.state_of.at({3, 7});
  for (std::size_t a = 0; a < 4; ++a) {
    const Estimate e = markov_q_estimate(2, world.policies, ghms, world.mdp, x, a, 3, 100000, rng);
    EXPECT_LE(std::abs(e.mean - q(x, a)), 3.0 * e.std_error + 1e-12);
  }
}

TEST(MarkovQEstimate, BetaNearGamma) {
  const RandomSetup s = random_setup(17, 5, 2, 1);
  const double gamma = s.mdp.gamma();
  GhmRegistry ghms(gamma, gamma - 1e-9);
  ghms.add_exact(s.mdp, s.policies, 0);
  const QFunction q = exact_q(s.mdp, s.policies.at(0));
  RngStream rng(18);
  const Estimate e = markov_q_estimate(0, s.policies, ghms, s.mdp, 1, 0, 4, 100000, rng);
  EXPECT_LE(std::abs(e.mean - q(1, 0)), 3.0 * e.std_error);
}

// ---------------------------------------------------------------------------
// exact evaluation

TEST(ExactGspQ, RepeatedPolicyIsMarkov) {
  const RandomSetup s = random_setup(19, 6, 3, 1);
  const QFunction a = exact_gsp_q(Gsp{{0, 0}, 0.3}, s.policies, s.mdp);
  const QFunction b = exact_q(s.mdp, s.policies.at(0));
  EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactGspQ, TreeValues) {
  const TreeWorld tree = unclosed_set_tree();
  const QFunction q = exact_gsp_q(Gsp{{0, 0, 1}, 1.0}, tree.policies, tree.mdp);
  EXPECT_EQ(q(tree.root, kLeft), 1.0);
  EXPECT_EQ(q(tree.root, kRight), 2.0);
  EXPECT_EQ(q(2, kLeft), -1.0);
  EXPECT_EQ(q(2, kRight), 0.0);
  const QFunction aug = exact_gsp_q_augmented(Gsp{{0, 0, 1}, 1.0}, tree.policies, tree.mdp);
  EXPECT_LE((q.values - aug.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactGspQ, MatchesProductChainOracle) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const RandomSetup s = random_setup(seed, 8, 2, 3);
    RngStream rng(seed);
    Gsp nu{{rng.index(3), rng.index(3), rng.index(3)}, 0.3};
    const QFunction q = exact_gsp_q(nu, s.policies, s.mdp);
    const QFunction aug = exact_gsp_q_augmented(nu, s.policies, s.mdp);
    const auto ref = oracle::product_chain_q(nu, s.policies, s.mdp);
    for (std::size_t x = 0; x < 8; ++x) {
      for (std::size_t a = 0; a < 2; ++a) {
        EXPECT_NEAR(q(x, a), ref[x][a], 1e-9);
        EXPECT_NEAR(aug(x, a), ref[x][a], 1e-9);
      }
    }
  }
}

TEST(ExactGspQ, PaddingIdentity) {
  const RandomSetup s = random_setup(31, 7, 2, 3);
  const Gsp nu{{2, 0, 1}, 0.45};
  const Gsp padded{{2, 0, 1, 1}, 0.45};
  EXPECT_LE((exact_gsp_q(nu, s.policies, s.mdp).values - exact_gsp_q_augmented(padded, s.policies, s.mdp).values)
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
}

TEST(ExactGspQ, ExpectationOfEstimatorEqualsExact) {
  const RandomSetup s = random_setup(32, 6, 3, 3);
  const double alpha = 0.2;
  const GhmRegistry ghms = GhmRegistry::exact(s.mdp, s.policies, alpha);
  for (const Gsp& nu : {Gsp{{0}, alpha}, Gsp{{0, 1}, alpha}, Gsp{{2, 1, 0}, alpha}, Gsp{{1, 1, 2, 0}, alpha}}) {
    const QFunction a = expected_gsp_q(nu, s.policies, ghms, s.mdp);
    const QFunction b = exact_gsp_q(nu, s.policies, s.mdp);
    EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ExactGspQ, EvaluatorCachesSuffixes) {
  const RandomSetup s = random_setup(33, 5, 2, 2);
  ExactGspEvaluator eval(s.mdp, s.policies);
  eval.q(Gsp{{0, 1, 0}, 0.5});
  EXPECT_EQ(eval.cache_size(), 3u);  // 0->1->0, 1->0, 0
  eval.q(Gsp{{1, 0}, 0.5});
  EXPECT_EQ(eval.cache_size(), 3u);
}

// ---------------------------------------------------------------------------
// geometric identities

TEST(GeomSum, Examples) {
  EXPECT_LE(geom_sum_pmf_check(0.0, 0.9, 100000), 1e-15);
  EXPECT_LE(geom_sum_pmf_check(0.8, 0.9, 100000), 1e-9);
  EXPECT_LE(geom_sum_pmf_check(0.855, 0.95, 100000), 1e-9);
  EXPECT_THROW(geom_sum_pmf_check(0.9, 0.8, 100), std::invalid_argument);
}

TEST(GeomFixedSum, Examples) {
  EXPECT_LE(geom_fixed_sum_check(0.5, 0.9, 1, 100000), 1e-15);
  EXPECT_LE(geom_fixed_sum_check(0.8, 0.9, 4, 100000), 1e-9);
  EXPECT_LE(geom_fixed_sum_check(0.8, 0.9, 50, 100000), 1e-9);
  EXPECT_THROW(geom_fixed_sum_check(0.8, 0.9, 0, 100), std::invalid_argument);
}

TEST(GeomIdentities, Grid) {
  for (int i = 0; i < 20; ++i) {
    const double gamma = 0.5 + 0.025 * i;
    const double beta = gamma * (0.05 + 0.045 * i);
    const std::size_t n = 1 + static_cast<std::size_t>(i % 7);
    EXPECT_LE(geom_sum_pmf_check(beta, gamma, 100000), 1e-9);
    EXPECT_LE(geom_fixed_sum_check(beta, gamma, n, 100000), 1e-9);
  }
}

}  // namespace
}  // namespace ggpi
