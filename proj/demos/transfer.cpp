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

// Transfer on four-rooms: models of the four constant-direction policies are
// computed once, then reused to act towards goals never seen before.

#include <iostream>
#include <set>
#include <vector>

#include "ggpi/algorithms.hpp"
#include "ggpi/environments.hpp"

int main() {
  const double gamma = 0.9;
  const double alpha = 0.1;
  const ggpi::GridWorld w = ggpi::four_rooms(gamma, std::nullopt, 0.0, false);
  const ggpi::GhmCache cache(w.mdp, w.policies, alpha);
  const ggpi::Cell start{4, 2};

  for (const ggpi::Cell goal : {ggpi::Cell{0, 10}, ggpi::Cell{10, 0}, ggpi::Cell{9, 9}}) {
    const ggpi::Mdp task = w.mdp.with_reward(ggpi::goal_entry_reward(w, goal));
    for (std::size_t depth = 1; depth <= 3; ++depth) {
      ggpi::TransferConfig cfg;
      cfg.depth = depth;
      cfg.alpha = alpha;
      cfg.n_samples = 200;
      cfg.episode_cap = 60;
      cfg.start_state = w.state_of.at(start);
      cfg.stop_states = {w.state_of.at(goal)};
      ggpi::RngStream rng(7, depth);
      const ggpi::TransferRunRecord r = ggpi::ggpi_transfer(task, w.policies, cache, cfg, rng);
      std::cout << "goal (" << goal.row << "," << goal.col << "), depth " << depth << ": "
                << (r.reached_stop ? "reached in " + std::to_string(r.steps.size()) + " steps"
                                   : "not reached in " + std::to_string(cfg.episode_cap) + " steps")
                << ", " << r.ghm_draws << " model draws\n";
      if (depth == 3) {
        std::set<std::size_t> path;
        for (const ggpi::TransferStep& s : r.steps) path.insert(s.state);
        ggpi::GridWorld view = w;
        view.spec.goal = goal;
        std::cout << view.render([&](std::size_t s) { return path.count(s) ? '*' : ' '; }) << '\n';
      }
    }
  }
  std::cout << "model tables built: " << cache.computations() << " (once, shared by every goal)\n";
  return 0;
}
