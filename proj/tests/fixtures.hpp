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

// Small hand-built MDPs shared by the test binaries.

#pragma once

#include <cstddef>
#include <vector>

#include "ggpi/environments.hpp"
#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi::fixtures {

/// One state, one action, reward r.
inline Mdp single_state(double r, double gamma) {
  return Mdp(Matrix::Ones(1, 1), Matrix::Constant(1, 1, r), gamma);
}

/// Two states that swap deterministically under every action.
inline Mdp cycle(double gamma, std::size_t n_actions = 1) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(2 * n_actions), 2);
  for (std::size_t a = 0; a < n_actions; ++a) {
    p(static_cast<Eigen::Index>(a), 1) = 1.0;
    p(static_cast<Eigen::Index>(n_actions + a), 0) = 1.0;
  }
  Matrix r(2, static_cast<Eigen::Index>(n_actions));
  r.setZero();
  r(0, 0) = 1.0;
  return Mdp(std::move(p), std::move(r), gamma);
}

/// One state with a fair coin over two successors (state 0 or state 1), both
/// of which repeat the coin.
inline Mdp fair_coin(double gamma) {
  return Mdp(Matrix::Constant(2, 2, 0.5), Matrix::Zero(2, 1), gamma);
}

/// A small suite of random MDPs with between 3 and 12 states.
inline std::vector<Mdp> random_suite(std::size_t count, double gamma, std::uint64_t seed, bool state_reward_only = false) {
  RngStream rng(seed, 99);
  std::vector<Mdp> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t ns = 3 + rng.index(10);
    const std::size_t na = 2 + rng.index(3);
    const std::size_t branching = 1 + rng.index(ns);
    out.push_back(random_mdp(ns, na, branching, 1.0, gamma, rng, state_reward_only));
  }
  return out;
}

}  // namespace ggpi::fixtures
