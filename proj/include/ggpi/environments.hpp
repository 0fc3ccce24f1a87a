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

// MDP builders: gridworlds (four rooms), the switching chain, the small
// counterexample MDPs, the three-state learning fixtures and random MDPs.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ggpi/gsp.hpp"
#include "ggpi/mdp.hpp"
#include "ggpi/rng.hpp"

namespace ggpi {

// ---------------------------------------------------------------------------
// Gridworlds

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct GridSpec {
  int width = 0;
  int height = 0;
  std::set<Cell> walls;
  std::set<Cell> doorways;  ///< informational; doorways are ordinary open cells
  Cell goal;
  double step_reward = 0.0;
  double goal_reward = 1.0;

  bool open(Cell c) const {
    return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width && walls.count(c) == 0;
  }
};

/// Moves in action order: left, down, right, up.
inline constexpr std::array<const char*, 4> kGridActionNames = {"left", "down", "right", "up"};
inline constexpr std::array<int, 4> kGridDrow = {0, 1, 0, -1};
inline constexpr std::array<int, 4> kGridDcol = {-1, 0, 1, 0};

struct GridWorld {
  Mdp mdp;
  GridSpec spec;
  std::vector<Cell> cells;              ///< state -> cell
  std::map<Cell, std::size_t> state_of;  ///< cell -> state
  std::size_t goal_state = 0;
  PolicyRegistry policies;  ///< constant-direction policies "left", "down", "right", "up"

  /// The grid drawn with '#' walls, 'G' goal and `glyph(state)` elsewhere.
  template <typename Glyph>
  std::string render(Glyph glyph) const {
    std::string out;
    for (int r = -1; r <= spec.height; ++r) {
      for (int c = -1; c <= spec.width; ++c) {
        const Cell cell{r, c};
        if (!spec.open(cell)) {
          out += '#';
        } else if (cell == spec.goal) {
          out += 'G';
        } else {
          out += glyph(state_of.at(cell));
        }
      }
      out += '\n';
    }
    return out;
  }
};

inline void check_grid(const GridSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw std::invalid_argument("GridSpec: non-positive size");
  if (!spec.open(spec.goal)) throw std::invalid_argument("GridSpec: goal must be an open cell");
  // Connectivity of open cells by breadth-first search from the goal.
  std::set<Cell> seen{spec.goal};
  std::queue<Cell> frontier;
  frontier.push(spec.goal);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    for (std::size_t d = 0; d < 4; ++d) {
      const Cell n{c.row + kGridDrow[d], c.col + kGridDcol[d]};
      if (spec.open(n) && seen.insert(n).second) frontier.push(n);
    }
  }
  const auto open_cells = static_cast<std::size_t>(spec.width * spec.height) - spec.walls.size();
  if (seen.size() != open_cells) throw std::invalid_argument("GridSpec: open cells are not connected");
}

/// Deterministic moves (bumping into walls is a no-op) with optional uniform
/// slip. Entering the goal pays goal_reward; with `absorbing_goal` the goal
/// is a terminal state, otherwise dynamics ignore the goal entirely.
inline GridWorld grid_world(const GridSpec& spec, double gamma, double slip = 0.0, bool absorbing_goal = true) {
  check_grid(spec);
  if (!(slip >= 0.0 && slip <= 1.0)) throw std::invalid_argument("grid_world: slip must lie in [0, 1]");
  GridWorld world{Mdp(Matrix::Identity(1, 1), Matrix::Zero(1, 1), 0.0), spec, {}, {}, 0, {}};
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      if (spec.open({r, c})) {
        world.state_of[{r, c}] = world.cells.size();
        world.cells.push_back({r, c});
      }
    }
  }
  const std::size_t ns = world.cells.size();
  const std::size_t na = 4;
  world.goal_state = world.state_of.at(spec.goal);
  Matrix p = Matrix::Zero(detail::idx(ns * na), detail::idx(ns));
  Matrix rew = Matrix::Zero(detail::idx(ns), detail::idx(na));
  std::vector<bool> terminal(ns, false);
  std::map<std::size_t, std::string> labels;
  for (std::size_t s = 0; s < ns; ++s) {
    const Cell c = world.cells[s];
    labels[s] = "r" + std::to_string(c.row) + "c" + std::to_string(c.col);
    const bool is_goal = s == world.goal_state;
    if (is_goal && absorbing_goal) terminal[s] = true;
    for (std::size_t a = 0; a < na; ++a) {
      const auto row = detail::idx(s * na + a);
      if (is_goal && absorbing_goal) {
        p(row, detail::idx(s)) = 1.0;
        continue;
      }
      for (std::size_t d = 0; d < na; ++d) {
        const double w = (d == a ? 1.0 - slip : 0.0) + slip / static_cast<double>(na);
        if (w == 0.0) continue;
        Cell n{c.row + kGridDrow[d], c.col + kGridDcol[d]};
        if (!spec.open(n)) n = c;
        p(row, detail::idx(world.state_of.at(n))) += w;
      }
      double r = spec.step_reward;
      if (!is_goal) r += spec.goal_reward * p(row, detail::idx(world.goal_state));
      rew(detail::idx(s), detail::idx(a)) = r;
    }
    if (is_goal && absorbing_goal) rew.row(detail::idx(s)).setZero();
  }
  labels[world.goal_state] += "_goal";
  world.mdp = Mdp(std::move(p), std::move(rew), gamma, false, std::move(terminal), std::move(labels));
  for (std::size_t a = 0; a < na; ++a) world.policies.add(kGridActionNames[a], MarkovPolicy::constant(ns, na, a));
  return world;
}

/// The classic 11x11 four-rooms interior; row 0 is the top.
inline const std::array<const char*, 11> kFourRoomsMap = {
    "     #     ",  //
    "     #     ",  //
    "           ",  //
    "     #     ",  //
    "     #     ",  //
    "# ####     ",  //
    "     ### ##",  //
    "     #     ",  //
    "     #     ",  //
    "           ",  //
    "     #     ",  //
};

inline GridSpec four_rooms_spec(std::optional<Cell> goal = std::nullopt) {
  GridSpec spec;
  spec.height = static_cast<int>(kFourRoomsMap.size());
  spec.width = 11;
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      if (kFourRoomsMap[static_cast<std::size_t>(r)][c] == '#') spec.walls.insert({r, c});
    }
  }
  spec.doorways = {{2, 5}, {9, 5}, {5, 1}, {6, 8}};
  spec.goal = goal.value_or(Cell{0, spec.width - 1});
  return spec;
}

inline GridWorld four_rooms(double gamma, std::optional<Cell> goal = std::nullopt, double slip = 0.0,
                            bool absorbing_goal = true) {
  return grid_world(four_rooms_spec(goal), gamma, slip, absorbing_goal);
}

/// Reward table paying `goal_reward` for every transition into `goal` from
/// another cell (dynamics unchanged).
inline Matrix goal_entry_reward(const GridWorld& world, Cell goal, double goal_reward = 1.0) {
  const std::size_t g = world.state_of.at(goal);
  const Mdp& mdp = world.mdp;
  Matrix rew = Matrix::Zero(detail::idx(mdp.n_states()), detail::idx(mdp.n_actions()));
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (s == g || mdp.is_terminal(s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) rew(detail::idx(s), detail::idx(a)) = goal_reward * mdp.prob(s, a, g);
  }
  return rew;
}

/// Shortest-path step counts to the goal over open cells.
inline std::vector<int> bfs_distances(const GridWorld& world) {
  std::vector<int> dist(world.cells.size(), -1);
  std::queue<std::size_t> frontier;
  dist[world.goal_state] = 0;
  frontier.push(world.goal_state);
  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop();
    for (std::size_t d = 0; d < 4; ++d) {
      const Cell n{world.cells[s].row + kGridDrow[d], world.cells[s].col + kGridDcol[d]};
      if (!world.spec.open(n)) continue;
      const std::size_t t = world.state_of.at(n);
      if (dist[t] < 0) {
        dist[t] = dist[s] + 1;
        frontier.push(t);
      }
    }
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Switching chain

struct ChainWorld {
  Mdp mdp;
  MarkovPolicy initial;  ///< right on x_0..x_{k-1}, exit at x_k
  std::size_t k = 0;
  std::size_t terminal_state = 0;
};

inline constexpr std::size_t kChainRight = 0;
inline constexpr std::size_t kChainUp = 1;

/// States x_0..x_k plus a terminal state. "right" advances (and pays
/// big_reward from x_k); "up" exits from x_i paying distractors[i].
inline ChainWorld chain(std::size_t k, double big_reward, const std::vector<double>& distractors, double gamma) {
  if (k < 2) throw std::invalid_argument("chain: k must be >= 2");
  if (distractors.size() != k + 1) throw std::invalid_argument("chain: need one distractor per chain state (k + 1)");
  const std::size_t ns = k + 2;
  const std::size_t term = k + 1;
  Matrix p = Matrix::Zero(detail::idx(ns * 2), detail::idx(ns));
  Matrix rew = Matrix::Zero(detail::idx(ns), 2);
  std::vector<bool> terminal(ns, false);
  terminal[term] = true;
  std::map<std::size_t, std::string> labels;
  for (std::size_t i = 0; i <= k; ++i) {
    labels[i] = "x" + std::to_string(i);
    p(detail::idx(i * 2 + kChainRight), detail::idx(i < k ? i + 1 : term)) = 1.0;
    p(detail::idx(i * 2 + kChainUp), detail::idx(term)) = 1.0;
    rew(detail::idx(i), detail::idx(kChainUp)) = distractors[i];
    if (i == k) rew(detail::idx(i), detail::idx(kChainRight)) = big_reward;
  }
  labels[term] = "terminal";
  p(detail::idx(term * 2), detail::idx(term)) = 1.0;
  p(detail::idx(term * 2 + 1), detail::idx(term)) = 1.0;
  std::vector<std::size_t> actions(ns, kChainRight);
  actions[k] = kChainUp;
  return ChainWorld{Mdp(std::move(p), std::move(rew), gamma, false, std::move(terminal), std::move(labels)),
                    MarkovPolicy::deterministic(2, actions), k, term};
}

inline ChainWorld default_chain(double gamma = 0.95) { return chain(10, 10.0, std::vector<double>(11, 0.1), gamma); }

// ---------------------------------------------------------------------------
// Counterexamples

inline constexpr std::size_t kActionA = 0;
inline constexpr std::size_t kActionB = 1;

/// Two live states L (0), R (1) and a terminal state (2); undiscounted.
/// L: a -> terminal, b -> R. R: a -> R paying +1, b -> terminal.
inline Mdp no_markov_match_world() {
  Matrix p = Matrix::Zero(6, 3);
  Matrix rew = Matrix::Zero(3, 2);
  p(0 * 2 + kActionA, 2) = 1.0;
  p(0 * 2 + kActionB, 1) = 1.0;
  p(1 * 2 + kActionA, 1) = 1.0;
  p(1 * 2 + kActionB, 2) = 1.0;
  p(2 * 2 + kActionA, 2) = 1.0;
  p(2 * 2 + kActionB, 2) = 1.0;
  rew(1, kActionA) = 1.0;
  return Mdp(std::move(p), std::move(rew), 1.0, false, {false, false, true}, {{0, "L"}, {1, "R"}, {2, "terminal"}});
}

/// One state; action a pays 1, action b pays 0.
inline Mdp switching_loop_world(double gamma) {
  Matrix rew(1, 2);
  rew << 1.0, 0.0;
  return Mdp(Matrix::Ones(2, 1), std::move(rew), gamma, false, {}, {{0, "x"}});
}

/// Q of the non-Markov policy that answers a with b forever and b with a
/// forever: script prefix followed by a Markov tail.
inline std::array<double, 2> switching_loop_nonmarkov_q(double gamma) {
  const Mdp mdp = switching_loop_world(gamma);
  const QFunction always_b = exact_q(mdp, MarkovPolicy::constant(1, 2, kActionB));
  const QFunction always_a = exact_q(mdp, MarkovPolicy::constant(1, 2, kActionA));
  return {mdp.reward(0, kActionA) + gamma * always_b(0, kActionB),
          mdp.reward(0, kActionB) + gamma * always_a(0, kActionA)};
}

struct TreeWorld {
  Mdp mdp;
  PolicyRegistry policies;  ///< "L" (always left) and "R" (always right)
  std::size_t root = 0;
};

inline constexpr std::size_t kLeft = 0;
inline constexpr std::size_t kRight = 1;

/// Depth-3 binary tree: root 0, children 1 (L) and 2 (R), grandchildren
/// 3 (LL), 4 (LR), 5 (RL), 6 (RR), terminal 7. The last move out of a
/// grandchild pays: LL (0, +1), LR (0, 0), RL (-1, +2), RR (0, 0) for (L, R).
inline TreeWorld unclosed_set_tree() {
  const std::size_t ns = 8;
  const std::size_t term = 7;
  Matrix p = Matrix::Zero(ns * 2, ns);
  Matrix rew = Matrix::Zero(ns, 2);
  for (std::size_t s = 0; s < 3; ++s) {
    p(detail::idx(s * 2 + kLeft), detail::idx(2 * s + 1)) = 1.0;
    p(detail::idx(s * 2 + kRight), detail::idx(2 * s + 2)) = 1.0;
  }
  for (std::size_t s = 3; s < ns; ++s) {
    p(detail::idx(s * 2 + kLeft), term) = 1.0;
    p(detail::idx(s * 2 + kRight), term) = 1.0;
  }
  rew(3, kRight) = 1.0;
  rew(5, kLeft) = -1.0;
  rew(5, kRight) = 2.0;
  std::vector<bool> terminal(ns, false);
  terminal[term] = true;
  TreeWorld world{Mdp(std::move(p), std::move(rew), 1.0, false, std::move(terminal),
                      {{0, "root"}, {1, "L"}, {2, "R"}, {3, "LL"}, {4, "LR"}, {5, "RL"}, {6, "RR"}, {7, "terminal"}}),
                  {}, 0};
  world.policies.add("L", MarkovPolicy::constant(ns, 2, kLeft));
  world.policies.add("R", MarkovPolicy::constant(ns, 2, kRight));
  return world;
}

// ---------------------------------------------------------------------------
// Three-state learning fixtures

struct LearningFixtures {
  Mdp recurrent;          ///< fixture #1
  Mdp transient;          ///< fixture #2, state 0 unreachable from states 1 and 2
  Matrix initial_logits;  ///< shared 3 x 3 starting logits
  Matrix recurrent_digits;  ///< transcribed rows before renormalisation
  Matrix transient_digits;
};

inline LearningFixtures learning_fixtures(double gamma = 0.9) {
  Matrix p1(3, 3);
  p1 << 0.297492728, 0.702444212, 0.000063060,  //
      0.584810131, 0.257810252, 0.157379617,    //
      0.181511854, 0.373368720, 0.445119427;
  Matrix p2(3, 3);
  p2 << 0.765830909, 0.234148071, 0.000021020,  //
      0.0, 0.620945430, 0.379054570,            //
      0.0, 0.456168756, 0.543831244;
  Matrix phi(3, 3);
  phi << -2.3634686, 1.13534535, -1.01701414,  //
      0.63736181, -0.85990661, 1.77260763,     //
      -1.11036305, 0.18121427, 0.56434487;
  // The transcribed rows sum to 1 only to ~1e-9; renormalise for the validator.
  const Matrix n1 = p1.array().colwise() / p1.rowwise().sum().array();
  const Matrix n2 = p2.array().colwise() / p2.rowwise().sum().array();
  return {Mdp(n1, Matrix::Zero(3, 1), gamma, true), Mdp(n2, Matrix::Zero(3, 1), gamma, true), phi, p1, p2};
}

// ---------------------------------------------------------------------------
// Random MDPs

/// Rows put Dirichlet(1) mass on `branching` distinct successors; rewards are
/// uniform on [-reward_scale, reward_scale].
inline Mdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t branching, double reward_scale,
                      double gamma, RngStream& rng, bool state_reward_only = false) {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("random_mdp: empty state or action set");
  if (branching == 0 || branching > n_states) throw std::invalid_argument("random_mdp: branching must lie in [1, n_states]");
  Matrix p = Matrix::Zero(detail::idx(n_states * n_actions), detail::idx(n_states));
  std::vector<std::size_t> order(n_states);
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> weights(branching);
    double total = 0.0;
    for (std::size_t j = 0; j < branching; ++j) {
      std::swap(order[j], order[j + rng.index(n_states - j)]);
      weights[j] = rng.exponential();
      total += weights[j];
    }
    for (std::size_t j = 0; j < branching; ++j) p(detail::idx(row), detail::idx(order[j])) = weights[j] / total;
  }
  Matrix rew(detail::idx(n_states), detail::idx(n_actions));
  for (std::size_t x = 0; x < n_states; ++x) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      rew(detail::idx(x), detail::idx(a)) =
          (state_reward_only && a > 0) ? rew(detail::idx(x), 0) : reward_scale * (2.0 * rng.uniform() - 1.0);
    }
  }
  return Mdp(std::move(p), std::move(rew), gamma, state_reward_only);
}

/// Uniformly random stochastic policy (Dirichlet(1) rows).
inline MarkovPolicy random_policy(std::size_t n_states, std::size_t n_actions, RngStream& rng) {
  Matrix probs(detail::idx(n_states), detail::idx(n_actions));
  for (Eigen::Index x = 0; x < probs.rows(); ++x) {
    for (Eigen::Index a = 0; a < probs.cols(); ++a) probs(x, a) = rng.exponential();
    probs.row(x) /= probs.row(x).sum();
  }
  return MarkovPolicy(std::move(probs));
}

inline MarkovPolicy random_deterministic_policy(std::size_t n_states, std::size_t n_actions, RngStream& rng) {
  std::vector<std::size_t> actions(n_states);
  for (auto& a : actions) a = rng.index(n_actions);
  return MarkovPolicy::deterministic(n_actions, actions);
}

}  // namespace ggpi
