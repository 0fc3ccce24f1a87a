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
#include "ggpi/cetd.hpp"
#include "ggpi/environments.hpp"

namespace ggpi {
namespace {

constexpr double kGamma = 0.9;

LogitTable logits_of(const Matrix& probs) { return LogitTable(probs.array().log().matrix(), 1); }

TEST(StepSchedule, Values) {
  const StepSchedule s = StepSchedule::polynomial(0.75, 0.6);
  EXPECT_DOUBLE_EQ(s.epsilon(0), 0.75);
  EXPECT_NEAR(s.epsilon(9), 0.75 * std::pow(10.0, -0.6), 1e-15);
  EXPECT_TRUE(s.robbins_monro());
  EXPECT_FALSE(StepSchedule::polynomial(1.0, 0.4).robbins_monro());
  EXPECT_FALSE(StepSchedule::constant(0.5).robbins_monro());
  EXPECT_EQ(StepSchedule::constant(0.5).epsilon(1000), 0.5);
  EXPECT_THROW(StepSchedule::constant(0.0).validate(), std::invalid_argument);
}

TEST(LogitTable, SoftmaxAndShape) {
  Matrix m(2, 2);
  m << 0.0, std::log(3.0), 1000.0, 1000.0;
  const LogitTable t(m, 1);
  EXPECT_NEAR(t.softmax()(0, 1), 0.75, 1e-15);
  EXPECT_NEAR(t.softmax()(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(std::exp(t.log_softmax()(0, 0)), 0.25, 1e-15);
  EXPECT_THROW(LogitTable(Matrix::Zero(3, 2), 1), std::invalid_argument);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(LogitTable(bad, 1), std::invalid_argument);
}

TEST(Lyapunov, ZeroAtTargetPositiveElsewhere) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  const GhmTable truth = exact_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma);
  EXPECT_NEAR(lyapunov(logits_of(truth.dist()), truth), 0.0, 1e-14);
  EXPECT_GT(lyapunov(LogitTable(fx.initial_logits, 1), truth), 0.0);
}

TEST(Lyapunov, MatchesIndependentSum) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  const Matrix truth = exact_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma).dist();
  const LogitTable init(fx.initial_logits, 1);
  double total = 0.0;
  for (int r = 0; r < 3; ++r) {
    double z = 0.0;
    for (int c = 0; c < 3; ++c) z += std::exp(fx.initial_logits(r, c));
    for (int c = 0; c < 3; ++c) {
      const double q = std::exp(fx.initial_logits(r, c)) / z;
      total += truth(r, c) * std::log(truth(r, c) / q) / 3.0;
    }
  }
  EXPECT_NEAR(lyapunov(init, truth), total, 1e-12);
  std::vector<double> w{0.5, 0.25, 0.25};
  EXPECT_GT(lyapunov(init, truth, w), 0.0);
  EXPECT_THROW(lyapunov(init, truth, {1.0}), std::invalid_argument);
}

TEST(CetdSyncStep, ExpectedUpdateVanishesAtTruth) {
  // E[target] = (1-gamma) P + gamma (mu o P); at mu = truth it equals mu.
  RngStream gen(1);
  const Mdp mdp = random_mdp(5, 2, 3, 0.0, kGamma, gen);
  const MarkovPolicy pi = random_policy(5, 2, gen);
  const Matrix mu = exact_ghm(mdp, pi, kGamma).dist();
  const Matrix expected_target = (1.0 - kGamma) * mdp.transition() + kGamma * compose(mu, pi, mdp.transition());
  EXPECT_LE((expected_target - mu).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CetdSyncStep, BoundedChangeAndSimplexRows) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  const MarkovPolicy pi = MarkovPolicy::uniform(3, 1);
  LogitTable logits(fx.initial_logits, 1);
  RngStream rng(2);
  for (int k = 0; k < 2000; ++k) {
    const double eps = 0.75 * std::pow(k + 1.0, -0.6);
    const LogitTable next = cetd_sync_step(logits, fx.recurrent, pi, kGamma, eps, rng);
    const Matrix delta = next.logits() - logits.logits();
    ASSERT_LE(delta.cwiseAbs().rowwise().sum().maxCoeff(), 2.0 * eps + 1e-12);
    logits = next;
  }
  EXPECT_LE((logits.softmax().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_THROW(cetd_sync_step(logits, fx.recurrent, pi, kGamma, 0.0, rng), std::invalid_argument);
}

TEST(RunCetd, SingleStateIsOneHot) {
  RngStream rng(3);
  const LearnResult r = run_cetd(fixtures::single_state(0.0, kGamma), MarkovPolicy::uniform(1, 1), kGamma,
                                 StepSchedule::polynomial(0.75, 0.6), 10000, rng, 1000);
  EXPECT_LE(r.trace.records.back().max_tv, 1e-3);
}

TEST(RunCetd, TraceHasOneRowPerEvaluation) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RngStream rng(4);
  const LearnResult r = run_cetd(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma,
                                 StepSchedule::polynomial(0.75, 0.6), 5000, rng, 500, LogitTable(fx.initial_logits, 1));
  ASSERT_EQ(r.trace.records.size(), 11u);
  EXPECT_EQ(r.trace.records.front().iteration, 0u);
  EXPECT_EQ(r.trace.records.back().iteration, 5000u);
  for (const auto& t : r.trace.records) {
    EXPECT_GE(t.lyapunov, 0.0);
    EXPECT_GE(t.max_tv, 0.0);
    EXPECT_GT(t.epsilon, 0.0);
  }
}

TEST(RunCetd, RecurrentFixtureConvergesWithDecreasingTrend) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RngStream rng(5);
  const LearnResult r = run_cetd(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma,
                                 StepSchedule::polynomial(0.75, 0.6), 100000, rng, 100, LogitTable(fx.initial_logits, 1));
  EXPECT_LE(r.trace.records.back().max_tv, 0.05);
  EXPECT_LE(r.trace.records.back().lyapunov, 0.1 * r.trace.records.front().lyapunov);
  // 1000-iteration moving average (ten records) over the final half.
  const auto& rec = r.trace.records;
  std::vector<double> avg;
  for (std::size_t i = rec.size() / 2; i + 10 <= rec.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += rec[j].lyapunov;
    avg.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < avg.size(); ++i) EXPECT_LE(avg[i], avg[i - 1] + 1e-3);
}

TEST(RunCetd, TransientFixtureIsSlower) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  const StepSchedule s = StepSchedule::polynomial(0.75, 0.6);
  RngStream r1(6), r2(6);
  const LearnResult a = run_cetd(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, s, 20000, r1, 20000,
                                 LogitTable(fx.initial_logits, 1));
  const LearnResult b = run_cetd(fx.transient, MarkovPolicy::uniform(3, 1), kGamma, s, 20000, r2, 20000,
                                 LogitTable(fx.initial_logits, 1));
  EXPECT_GT(b.trace.records.back().lyapunov, a.trace.records.back().lyapunov);
}

TEST(RunCetd, TransientStateUnreachable) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  const GhmTable truth = exact_ghm(fx.transient, MarkovPolicy::uniform(3, 1), kGamma);
  EXPECT_EQ(truth.prob(1, 0, 0), 0.0);
  EXPECT_EQ(truth.prob(2, 0, 0), 0.0);
}

TEST(RunCetd, ZeroDiscountLearnsTransitions) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RngStream rng(7);
  const LearnResult r = run_cetd(fx.recurrent, MarkovPolicy::uniform(3, 1), 0.0,
                                 StepSchedule::polynomial(0.75, 0.6), 100000, rng, 100000);
  EXPECT_LE(max_row_tv(r.logits.softmax(), fx.recurrent.transition()), 0.05);
}

TEST(RunCetd, ConstantStepIsLoggedOnly) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RngStream rng(8);
  const LearnResult r = run_cetd(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, StepSchedule::constant(0.5),
                                 10000, rng, 1000, LogitTable(fx.initial_logits, 1));
  RecordProperty("final_lyapunov_constant_step", std::to_string(r.trace.records.back().lyapunov));
  EXPECT_TRUE(std::isfinite(r.trace.records.back().lyapunov));
}

TEST(Cemc, ConvergesAndAgreesWithCetd) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RunOptions options;
  options.learner = Learner::kCemc;
  options.iterations = 100000;
  options.eval_every = 100000;
  RngStream r1(9), r2(9);
  const LearnResult cemc = learn_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, LogitTable(fx.initial_logits, 1), options, r1);
  options.learner = Learner::kCetd;
  const LearnResult cetd = learn_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, LogitTable(fx.initial_logits, 1), options, r2);
  EXPECT_LE(cemc.trace.records.back().max_tv, 0.05);
  EXPECT_LE(std::abs(cemc.trace.records.back().max_tv - cetd.trace.records.back().max_tv), 0.05);
}

TEST(Ll2td, ZeroGradientAtBootstrapFixedPoint) {
  // All rows of P equal p: the mixture (1-gamma) p + gamma p is p itself.
  Matrix p(3, 3);
  for (int r = 0; r < 3; ++r) p.row(r) << 0.2, 0.5, 0.3;
  const Mdp mdp(p, Matrix::Zero(3, 1), kGamma, true);
  const LogitTable logits = logits_of(p);
  RngStream rng(10);
  const LogitTable next = ll2td_step(logits, mdp, MarkovPolicy::uniform(3, 1), kGamma, 0.5, rng, logits);
  EXPECT_LE((next.logits() - logits.logits()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ll2td, RunsWithoutDivergence) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RunOptions options;
  options.learner = Learner::kLl2td;
  options.iterations = 50000;
  options.eval_every = 10000;
  options.target_period = 200;
  RngStream rng(11);
  const LearnResult r = learn_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, LogitTable(fx.initial_logits, 1), options, rng);
  EXPECT_TRUE(r.logits.logits().allFinite());
  EXPECT_LT(r.trace.records.back().max_tv, r.trace.records.front().max_tv);
  EXPECT_STREQ(learner_name(Learner::kLl2td), "ll2td");
}

TEST(LearnGhm, RejectsBadOptions) {
  const LearningFixtures fx = learning_fixtures(kGamma);
  RngStream rng(1);
  RunOptions options;
  options.iterations = 0;
  EXPECT_THROW(learn_ghm(fx.recurrent, MarkovPolicy::uniform(3, 1), kGamma, LogitTable::zeros(3, 1), options, rng),
               std::invalid_argument);
}

}  // namespace
}  // namespace ggpi
