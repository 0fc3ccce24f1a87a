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

// Policy iteration on the switching chain: classical greedy improvement
// moves the "right" decision back one state per step, while one GGPI step
// over {initial -> first improvement, first improvement} recovers the whole
// optimal policy.

#include <iostream>
#include <string>
#include <vector>

#include "ggpi/environments.hpp"
#include "ggpi/improvement.hpp"

namespace {

std::string show(const std::vector<std::size_t>& actions, std::size_t k) {
  std::string s;
  for (std::size_t i = 0; i <= k; ++i) s += actions[i] == ggpi::kChainRight ? '>' : '^';
  return s;
}

}  // namespace

int main() {
  const ggpi::ChainWorld c = ggpi::default_chain(0.95);
  const ggpi::ValueIterationResult vi = ggpi::value_iteration(c.mdp, 1e-12);
  std::cout << "chain with " << c.k + 1 << " states; '>' = right, '^' = exit\n\n";

  std::cout << "classical policy iteration\n";
  std::vector<std::size_t> actions = c.initial.actions();
  std::cout << "  step 0  " << show(actions, c.k) << '\n';
  for (std::size_t step = 1; !ggpi::is_optimal_policy(vi, actions, c.mdp); ++step) {
    actions = ggpi::greedy(ggpi::exact_q(c.mdp, ggpi::MarkovPolicy::deterministic(2, actions))).actions;
    std::cout << "  step " << step << (step < 10 ? "  " : " ") << show(actions, c.k) << '\n';
  }

  std::cout << "\nGGPI policy iteration\n";
  ggpi::PolicyRegistry pool;
  pool.add("pi0", c.initial);
  std::cout << "  step 0  " << show(c.initial.actions(), c.k) << '\n';
  const ggpi::ImprovedPolicy first = ggpi::greedy(ggpi::exact_q(c.mdp, c.initial));
  pool.add("pi1", first.policy);
  std::cout << "  step 1  " << show(first.actions, c.k) << "   greedy over pi0\n";
  ggpi::GspSet set(0.1);
  set.add(ggpi::Gsp{{0, 1}, 0.1});
  set.add(ggpi::Gsp{{1}, 0.1});
  const ggpi::ImprovedPolicy second = ggpi::ggpi(set, pool, c.mdp);
  std::cout << "  step 2  " << show(second.actions, c.k) << "   GGPI over {pi0 -> pi1, pi1}\n";
  std::cout << "\noptimal after two GGPI steps: " << (ggpi::is_optimal_policy(vi, second.actions, c.mdp) ? "yes" : "no")
            << '\n';
  return 0;
}
