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

// Command-line front end: runs the experiments and writes CSV/JSON results.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ggpi/algorithms.hpp"
#include "ggpi/cetd.hpp"
#include "ggpi/environments.hpp"
#include "ggpi/io.hpp"

namespace fs = std::filesystem;
using ggpi::Json;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Settings: defaults < config file < command line

class Settings {
 public:
  Settings(CLI::App* app, std::string name) : app_(app), name_(std::move(name)) {
    app_->add_option("--config", config_path_, "JSON file of option values (command-line flags take precedence)");
  }

  template <typename T>
  void add(const std::string& key, T fallback, const std::string& help) {
    defaults_[key] = fallback;
    auto holder = std::make_shared<T>(fallback);
    options_[key] = app_->add_option("--" + key, *holder, help);
    readers_[key] = [holder] { return Json(*holder); };
  }

  void flag(const std::string& key, const std::string& help) {
    defaults_[key] = false;
    auto holder = std::make_shared<bool>(false);
    options_[key] = app_->add_flag("--" + key, *holder, help);
    readers_[key] = [holder] { return Json(*holder); };
  }

  const std::string& name() const { return name_; }
  CLI::App* app() const { return app_; }

  /// Effective configuration after applying the config file and flags.
  Json resolve() const {
    Json eff = defaults_;
    if (!config_path_.empty()) {
      const Json file = ggpi::read_json(config_path_);
      if (!file.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
      for (const auto& [key, value] : file.items()) {
        if (key == "subcommand" || key == "version") continue;
        if (!defaults_.contains(key)) throw CLI::ValidationError("--config", "unknown key '" + key + "'");
        const Json& d = defaults_.at(key);
        const bool same_kind = (d.is_number() && value.is_number()) || d.type() == value.type();
        if (!same_kind) throw CLI::ValidationError("--config", "key '" + key + "' has the wrong type");
        eff[key] = value;
      }
    }
    for (const auto& [key, option] : options_) {
      if (option->count() > 0) eff[key] = readers_.at(key)();
    }
    eff["subcommand"] = name_;
    eff["version"] = kVersion;
    return eff;
  }

 private:
  CLI::App* app_;
  std::string name_;
  std::string config_path_;
  Json defaults_ = Json::object();
  std::map<std::string, CLI::Option*> options_;
  std::map<std::string, std::function<Json()>> readers_;
};

void add_common(Settings& s, double gamma, double alpha, std::size_t depth, std::size_t samples) {
  s.add<std::uint64_t>("seed", 0, "base random seed");
  s.add<std::string>("out", "results/" + s.name(), "output directory");
  s.add<double>("gamma", gamma, "discount factor");
  s.add<double>("alpha", alpha, "switching probability of GSPs");
  s.add<std::size_t>("depth", depth, "GSP depth (largest depth for sweeps)");
  s.add<std::size_t>("samples", samples, "samples per GSP estimate (0 = exact evaluation)");
}

// Range checks shared by the subcommands.
void require(bool ok, const std::string& what) {
  if (!ok) throw CLI::ValidationError(what);
}

void check_common(const Json& c) {
  const double gamma = c.at("gamma").get<double>();
  const double alpha = c.at("alpha").get<double>();
  require(gamma >= 0.0 && gamma < 1.0, "--gamma must lie in [0, 1)");
  require(alpha > 0.0 && alpha <= 1.0, "--alpha must lie in (0, 1]");
  require(c.at("depth").get<std::size_t>() >= 1, "--depth must be >= 1");
  require(!c.at("out").get<std::string>().empty(), "--out must not be empty");
}

fs::path prepare_out(const Json& c) {
  const fs::path out = c.at("out").get<std::string>();
  fs::create_directories(out);
  ggpi::write_json(out / "config.json", c);
  return out;
}

ggpi::Cell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  require(comma != std::string::npos, "cell '" + text + "' must be written row,col");
  try {
    return ggpi::Cell{std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("cell '" + text + "' must be written row,col");
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Percentile bootstrap of the mean.
Json bootstrap_mean(const std::vector<double>& v, std::uint64_t seed) {
  if (v.empty()) return Json{{"n", 0}, {"mean", nullptr}, {"ci_low", nullptr}, {"ci_high", nullptr}};
  double total = 0.0;
  for (double x : v) total += x;
  const double mean = total / static_cast<double>(v.size());
  ggpi::RngStream rng(seed, 0xb0075);
  constexpr int kResamples = 2000;
  std::vector<double> means(kResamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[rng.index(v.size())];
    m = s / static_cast<double>(v.size());
  }
  std::sort(means.begin(), means.end());
  return Json{{"n", v.size()}, {"mean", mean}, {"ci_low", means[kResamples / 40]}, {"ci_high", means[kResamples - 1 - kResamples / 40]}};
}

// ---------------------------------------------------------------------------
// four-rooms

int cmd_four_rooms(const Json& c) {
  check_common(c);
  const fs::path out = prepare_out(c);
  const double alpha = c.at("alpha").get<double>();
  const ggpi::GridWorld w = ggpi::four_rooms(c.at("gamma").get<double>(), parse_cell(c.at("goal").get<std::string>()));
  const ggpi::ValueIterationResult vi = ggpi::value_iteration(w.mdp, 1e-10);
  ggpi::CsvTable csv({"state", "row", "col", "depth", "chosen_action", "is_optimal"});
  Json depths = Json::array();
  for (std::size_t m = 1; m <= c.at("depth").get<std::size_t>(); ++m) {
    const ggpi::CoverageReport r = ggpi::optimal_coverage(w.mdp, w.policies, alpha, m, vi);
    for (std::size_t x = 0; x < w.mdp.n_states(); ++x) {
      csv.row(x, w.cells[x].row, w.cells[x].col, m, std::string(ggpi::kGridActionNames[r.chosen[x]]),
              bool(vi.is_optimal_action(x, r.chosen[x])));
    }
    const std::string map = w.render([&](std::size_t s) { return r.optimal[s] ? '+' : '.'; });
    ggpi::atomic_write(out / ("map_depth" + std::to_string(m) + ".txt"), map);
    depths.push_back(Json{{"depth", m},
                          {"optimal_count", r.optimal_count},
                          {"live_states", r.live_states},
                          {"coverage", static_cast<double>(r.optimal_count) / static_cast<double>(r.live_states)}});
    std::cout << "depth " << m << ": optimal action at " << r.optimal_count << " of " << r.live_states << " states\n"
              << map << '\n';
  }
  csv.save(out / "coverage.csv");
  ggpi::write_json(out / "summary.json", Json{{"n_states", w.mdp.n_states()},
                                              {"beta", ggpi::switching_beta(w.mdp.gamma(), alpha)},
                                              {"depths", depths}});
  return 0;
}

// ---------------------------------------------------------------------------
// policy-iter

int cmd_policy_iter(const Json& c) {
  check_common(c);
  const std::size_t seeds = c.at("seeds").get<std::size_t>();
  require(seeds >= 1, "--seeds must be >= 1");
  require(c.at("iters").get<std::size_t>() >= 1, "--iters must be >= 1");
  const std::string init = c.at("init").get<std::string>();
  require(init == "uniform" || init == "random", "--init must be 'uniform' or 'random'");
  const fs::path out = prepare_out(c);

  ggpi::Mdp mdp = [&] {
    const std::string file = c.at("mdp").get<std::string>();
    if (!file.empty()) return ggpi::load_mdp(file);
    ggpi::GridSpec spec = ggpi::four_rooms_spec();
    spec.step_reward = c.at("step-reward").get<double>();
    return ggpi::grid_world(spec, c.at("gamma").get<double>()).mdp;
  }();
  if (!c.at("mdp").get<std::string>().empty()) mdp = mdp.with_gamma(c.at("gamma").get<double>());
  const ggpi::ValueIterationResult vi = ggpi::value_iteration(mdp, 1e-10);
  const std::uint64_t base_seed = c.at("seed").get<std::uint64_t>();

  ggpi::CsvTable csv({"depth", "seed", "iterations", "total_samples", "reached_optimal"});
  Json runs = Json::array();
  Json summary = Json::array();
  for (std::size_t d = 1; d <= c.at("depth").get<std::size_t>(); ++d) {
    std::vector<double> iters, samples;
    std::size_t reached = 0;
    for (std::uint64_t s = base_seed; s < base_seed + seeds; ++s) {
      ggpi::RngStream init_rng(s, 999);
      const ggpi::MarkovPolicy start = init == "uniform"
                                           ? ggpi::MarkovPolicy::uniform(mdp.n_states(), mdp.n_actions())
                                           : ggpi::random_deterministic_policy(mdp.n_states(), mdp.n_actions(), init_rng);
      ggpi::PiConfig cfg;
      cfg.depth = d;
      cfg.alpha = c.at("alpha").get<double>();
      cfg.n_samples = c.at("samples").get<std::size_t>();
      cfg.n_iter = c.at("iters").get<std::size_t>();
      cfg.end_in_newest = c.at("end-in-newest").get<bool>();
      cfg.stop_at_optimal = true;
      ggpi::RngStream rng(s, d);
      const ggpi::PiRunRecord r = ggpi::ggpi_policy_iteration(mdp, start, cfg, rng, &vi);
      const bool ok = r.iterations_to_optimal.has_value();
      const std::size_t it = ok ? *r.iterations_to_optimal : r.iterations_used;
      const std::uint64_t sm = ok ? *r.samples_to_optimal : r.total_ghm_samples;
      csv.row(d, s, it, sm, ok);
      if (ok) {
        ++reached;
        iters.push_back(static_cast<double>(it));
        samples.push_back(static_cast<double>(sm));
      }
      Json rec = ggpi::pi_record_to_json(r);
      rec["depth"] = d;
      rec["seed"] = s;
      runs.push_back(std::move(rec));
    }
    const Json it_ci = bootstrap_mean(iters, base_seed + d);
    const Json sm_ci = bootstrap_mean(samples, base_seed + 100 + d);
    summary.push_back(Json{{"depth", d}, {"runs", seeds}, {"reached_optimal", reached}, {"iterations", it_ci}, {"total_samples", sm_ci}});
    std::cout << "depth " << d << ": reached optimal in " << reached << "/" << seeds << " runs";
    if (reached > 0) {
      std::cout << ", mean iterations " << it_ci["mean"].get<double>() << " [" << it_ci["ci_low"].get<double>() << ", "
                << it_ci["ci_high"].get<double>() << "], mean samples " << sm_ci["mean"].get<double>();
    }
    std::cout << '\n';
  }
  csv.save(out / "sweep.csv");
  ggpi::write_json(out / "runs.json", runs);
  ggpi::write_json(out / "summary.json", Json{{"depths", summary}});
  return 0;
}

// ---------------------------------------------------------------------------
// cetd

int cmd_cetd(const Json& c) {
  require(c.at("gamma").get<double>() >= 0.0 && c.at("gamma").get<double>() < 1.0, "--gamma must lie in [0, 1)");
  require(c.at("iters").get<std::uint64_t>() >= 1, "--iters must be >= 1");
  require(c.at("eval-every").get<std::uint64_t>() >= 1, "--eval-every must be >= 1");
  require(c.at("runs").get<std::size_t>() >= 1, "--runs must be >= 1");
  require(c.at("step-scale").get<double>() > 0.0, "--step-scale must be positive");
  require(c.at("step-power").get<double>() >= 0.0, "--step-power must be non-negative");
  const std::string fixture = c.at("fixture").get<std::string>();
  require(fixture == "1" || fixture == "2" || fixture == "both", "--fixture must be 1, 2 or both");
  const std::string learner_arg = c.at("learner").get<std::string>();
  std::vector<ggpi::Learner> learners;
  for (ggpi::Learner l : {ggpi::Learner::kCetd, ggpi::Learner::kCemc, ggpi::Learner::kLl2td}) {
    if (learner_arg == "all" || learner_arg == ggpi::learner_name(l)) learners.push_back(l);
  }
  require(!learners.empty(), "--learner must be cetd, cemc, ll2td or all");
  const fs::path out = prepare_out(c);

  const double gamma = c.at("gamma").get<double>();
  const ggpi::LearningFixtures fx = ggpi::learning_fixtures(gamma);
  const ggpi::MarkovPolicy pi = ggpi::MarkovPolicy::uniform(3, 1);
  std::vector<std::pair<int, const ggpi::Mdp*>> chosen;
  if (fixture != "2") chosen.emplace_back(1, &fx.recurrent);
  if (fixture != "1") chosen.emplace_back(2, &fx.transient);

  Json results = Json::array();
  for (const auto& [id, mdp] : chosen) {
    const ggpi::GhmTable truth = ggpi::exact_ghm(*mdp, pi, gamma);
    for (ggpi::Learner learner : learners) {
      for (std::size_t run = 0; run < c.at("runs").get<std::size_t>(); ++run) {
        const std::uint64_t seed = c.at("seed").get<std::uint64_t>() + run;
        ggpi::RunOptions options;
        options.learner = learner;
        options.schedule = ggpi::StepSchedule::polynomial(c.at("step-scale").get<double>(), c.at("step-power").get<double>());
        options.iterations = c.at("iters").get<std::uint64_t>();
        options.eval_every = c.at("eval-every").get<std::uint64_t>();
        options.keep_snapshots = true;
        ggpi::RngStream rng(seed, 7);
        const ggpi::LearnResult r = ggpi::learn_ghm(*mdp, pi, gamma, ggpi::LogitTable(fx.initial_logits, 1), options, rng);
        const std::string stem = "fixture" + std::to_string(id) + "_" + ggpi::learner_name(learner) + "_seed" + std::to_string(seed);
        ggpi::trace_csv(r.trace).save(out / ("trace_" + stem + ".csv"));
        // Barycentric coordinates of each model row in the unit triangle.
        ggpi::CsvTable simplex({"iteration", "row", "p0", "p1", "p2", "x", "y"});
        for (std::size_t k = 0; k < r.trace.snapshots.size(); ++k) {
          const ggpi::Matrix& m = r.trace.snapshots[k];
          for (Eigen::Index row = 0; row < m.rows(); ++row) {
            simplex.row(r.trace.records[k].iteration, row, m(row, 0), m(row, 1), m(row, 2), m(row, 1) + 0.5 * m(row, 2),
                        std::sqrt(3.0) / 2.0 * m(row, 2));
          }
        }
        simplex.save(out / ("simplex_" + stem + ".csv"));
        const ggpi::TraceRecord& last = r.trace.records.back();
        results.push_back(Json{{"fixture", id},
                               {"learner", ggpi::learner_name(learner)},
                               {"seed", seed},
                               {"iterations", last.iteration},
                               {"initial_lyapunov", r.trace.records.front().lyapunov},
                               {"final_lyapunov", last.lyapunov},
                               {"final_max_tv", last.max_tv},
                               {"learned", ggpi::ghm_to_json(r.logits.to_ghm("uniform", gamma))},
                               {"target", ggpi::ghm_to_json(truth)}});
        std::cout << "fixture " << id << " " << ggpi::learner_name(learner) << " seed " << seed << ": max TV "
                  << last.max_tv << ", Lyapunov " << r.trace.records.front().lyapunov << " -> " << last.lyapunov << '\n';
      }
    }
  }
  ggpi::write_json(out / "summary.json", Json{{"runs", results}});
  return 0;
}

// ---------------------------------------------------------------------------
// counterexamples

struct Check {
  std::string name;
  double expected;
  double computed;
};

int cmd_counterexamples(const Json& c) {
  const fs::path out = prepare_out(c);
  std::vector<Check> checks;
  std::vector<std::pair<std::string, bool>> claims;

  const ggpi::TreeWorld tree = ggpi::unclosed_set_tree();
  const ggpi::Gsp nu{{0, 0, 1}, 1.0};
  const ggpi::QFunction q = ggpi::exact_gsp_q(nu, tree.policies, tree.mdp);
  checks.push_back({"tree Q(root, L) under L->L->R", 1.0, q(tree.root, ggpi::kLeft)});
  checks.push_back({"tree Q(root, R) under L->L->R", 2.0, q(tree.root, ggpi::kRight)});
  checks.push_back({"tree Q(R, L) under L->L->R", -1.0, q(2, ggpi::kLeft)});
  checks.push_back({"tree Q(R, R) under L->L->R", 0.0, q(2, ggpi::kRight)});
  ggpi::GspSet single(1.0);
  single.add(nu);
  ggpi::GgpiOptions unsafe;
  unsafe.allow_unclosed = true;
  const ggpi::ImprovedPolicy bad = ggpi::ggpi(single, tree.policies, tree.mdp, ggpi::QSource::exact(), unsafe);
  const ggpi::ImprovedPolicy good = ggpi::ggpi(ggpi::close_suffixes(single), tree.policies, tree.mdp);
  checks.push_back({"tree return of greedy over the unclosed set", 0.0,
                    ggpi::exact_q(tree.mdp, bad.policy)(tree.root, bad.actions[tree.root])});
  checks.push_back({"tree return of GGPI over the closed set", 2.0,
                    ggpi::exact_q(tree.mdp, good.policy)(tree.root, good.actions[tree.root])});

  for (double g : {0.4, 0.6}) {
    const auto v = ggpi::switching_loop_nonmarkov_q(g);
    checks.push_back({"loop Q(a) at gamma " + std::to_string(g).substr(0, 3), 1.0, v[0]});
    checks.push_back({"loop Q(b) at gamma " + std::to_string(g).substr(0, 3), g / (1.0 - g), v[1]});
    claims.emplace_back("loop prefers " + std::string(g > 0.5 ? "b" : "a") + " at gamma " + std::to_string(g).substr(0, 3),
                        (v[1] > v[0]) == (g > 0.5));
  }

  const ggpi::Mdp w = ggpi::no_markov_match_world();
  checks.push_back({"scripted return of b,b from L", 0.0, ggpi::script_return(w, 0, {ggpi::kActionB, ggpi::kActionB})});
  checks.push_back({"scripted return of a,a,b from R", 2.0,
                    ggpi::script_return(w, 1, {ggpi::kActionA, ggpi::kActionA, ggpi::kActionB})});
  bool matched = false;
  for (int i = 0; i < 100; ++i) {
    const double p = i / 100.0;
    ggpi::Matrix probs(3, 2);
    probs << 0.5, 0.5, p, 1.0 - p, 0.5, 0.5;
    const ggpi::QFunction mq = ggpi::exact_q(w, ggpi::MarkovPolicy(probs));
    if (std::abs(mq(0, ggpi::kActionB)) < 1e-12 && std::abs(mq(1, ggpi::kActionA) - 2.0) < 1e-12) matched = true;
  }
  claims.emplace_back("no Markov policy reproduces both scripted values", !matched);

  bool all = true;
  Json report = Json::array();
  for (const Check& ch : checks) {
    const bool ok = std::abs(ch.expected - ch.computed) <= 1e-12;
    all &= ok;
    std::cout << (ok ? "ok   " : "FAIL ") << ch.name << ": expected " << ch.expected << ", computed " << ch.computed << '\n';
    report.push_back(Json{{"name", ch.name}, {"expected", ch.expected}, {"computed", ch.computed}, {"pass", ok}});
  }
  for (const auto& [name, ok] : claims) {
    all &= ok;
    std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
    report.push_back(Json{{"name", name}, {"expected", true}, {"computed", ok}, {"pass", ok}});
  }
  ggpi::write_json(out / "counterexamples.json", Json{{"checks", report}, {"all_pass", all}});
  return all ? 0 : 1;
}

// ---------------------------------------------------------------------------
// eval-gsp

int cmd_eval_gsp(const Json& c) {
  const double alpha = c.at("alpha").get<double>();
  require(alpha > 0.0 && alpha <= 1.0, "--alpha must lie in (0, 1]");
  require(!c.at("mdp").get<std::string>().empty(), "--mdp is required");
  require(!c.at("policies").get<std::string>().empty(), "--policies is required");
  require(!c.at("gsp").get<std::string>().empty(), "--gsp is required");
  const ggpi::Mdp mdp = ggpi::load_mdp(c.at("mdp").get<std::string>());
  require(mdp.gamma() < 1.0, "eval-gsp needs a discounted MDP (gamma < 1)");
  const ggpi::PolicyRegistry policies = ggpi::policies_from_json(ggpi::read_json(c.at("policies").get<std::string>()), mdp);
  ggpi::Gsp gsp;
  try {
    gsp = ggpi::parse_gsp(c.at("gsp").get<std::string>(), policies, alpha);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("--gsp", e.what());
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::string pair_arg = c.at("pairs").get<std::string>();
  if (pair_arg.empty()) {
    for (std::size_t x = 0; x < mdp.n_states(); ++x) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) pairs.emplace_back(x, a);
    }
  } else {
    for (const std::string& item : split(pair_arg, ';')) {
      const auto colon = item.find(':');
      require(colon != std::string::npos, "--pairs entries must be written state:action");
      std::size_t x = 0, a = 0;
      try {
        x = std::stoul(item.substr(0, colon));
        a = std::stoul(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw CLI::ValidationError("--pairs entries must be written state:action");
      }
      require(x < mdp.n_states() && a < mdp.n_actions(), "--pairs entry " + item + " out of range");
      pairs.emplace_back(x, a);
    }
  }
  const std::size_t samples = c.at("samples").get<std::size_t>();
  require(samples >= 1, "--samples must be >= 1 for eval-gsp");
  const fs::path out = prepare_out(c);

  ggpi::GhmRegistry ghms(mdp.gamma(), ggpi::switching_beta(mdp.gamma(), alpha));
  for (std::size_t i = 0; i < policies.size(); ++i) ghms.add_exact(mdp, policies, i);
  if (c.at("save-ghms").get<bool>()) {
    for (std::size_t i = 0; i < policies.size(); ++i) {
      ggpi::write_json(out / ("ghm_" + policies.id(i) + "_beta.json"), ggpi::ghm_to_json(ghms.beta_table(i)));
      ggpi::write_json(out / ("ghm_" + policies.id(i) + "_gamma.json"), ggpi::ghm_to_json(ghms.gamma_table(i)));
    }
  }
  const ggpi::QFunction exact = ggpi::exact_gsp_q(gsp, policies, mdp);
  ggpi::RngStream rng(c.at("seed").get<std::uint64_t>());
  Json records = Json::array();
  for (const auto& [x, a] : pairs) {
    const ggpi::Estimate e = ggpi::gsp_q_estimate(gsp, policies, ghms, mdp, x, a, samples, rng);
    records.push_back(ggpi::estimate_record(x, a, gsp, policies, e, exact(x, a)));
  }
  const Json report{{"gsp", ggpi::gsp_ids(gsp, policies)}, {"alpha", alpha}, {"gamma", mdp.gamma()}, {"estimates", records}};
  ggpi::write_json(out / "eval_gsp.json", report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// transfer

int cmd_transfer(const Json& c) {
  check_common(c);
  require(c.at("episodes").get<std::size_t>() >= 1, "--episodes must be >= 1");
  require(c.at("episode-cap").get<std::size_t>() >= 1, "--episode-cap must be >= 1");
  const double gamma = c.at("gamma").get<double>();
  const double alpha = c.at("alpha").get<double>();
  // Non-absorbing dynamics so the cached models stay valid for every goal.
  const ggpi::GridWorld w = ggpi::four_rooms(gamma, std::nullopt, 0.0, false);
  std::vector<ggpi::Cell> goals;
  for (const std::string& g : split(c.at("goals").get<std::string>(), ';')) goals.push_back(parse_cell(g));
  require(!goals.empty(), "--goals needs at least one cell");
  const ggpi::Cell start = parse_cell(c.at("start").get<std::string>());
  for (const ggpi::Cell& cell : goals) require(w.spec.open(cell), "goal is not an open cell");
  require(w.spec.open(start), "start is not an open cell");
  const fs::path out = prepare_out(c);

  const ggpi::GhmCache cache(w.mdp, w.policies, alpha);
  ggpi::CsvTable csv({"goal_row", "goal_col", "depth", "episode", "steps", "episode_return", "discounted_return",
                      "reached_goal", "ghm_draws"});
  Json episodes = Json::array();
  for (const ggpi::Cell& goal : goals) {
    const ggpi::Mdp task = w.mdp.with_reward(ggpi::goal_entry_reward(w, goal));
    for (std::size_t d = 1; d <= c.at("depth").get<std::size_t>(); ++d) {
      for (std::size_t e = 0; e < c.at("episodes").get<std::size_t>(); ++e) {
        ggpi::TransferConfig cfg;
        cfg.depth = d;
        cfg.alpha = alpha;
        cfg.n_samples = c.at("samples").get<std::size_t>();
        cfg.episode_cap = c.at("episode-cap").get<std::size_t>();
        cfg.start_state = w.state_of.at(start);
        cfg.stop_states = {w.state_of.at(goal)};
        ggpi::RngStream rng(c.at("seed").get<std::uint64_t>() + e, 1000 * d + static_cast<std::uint64_t>(goal.row * 11 + goal.col));
        const ggpi::TransferRunRecord r = ggpi::ggpi_transfer(task, w.policies, cache, cfg, rng);
        csv.row(goal.row, goal.col, d, e, r.steps.size(), r.episode_return, r.discounted_return, r.reached_stop, r.ghm_draws);
        Json rec = ggpi::transfer_record_to_json(r, w.policies);
        rec["goal"] = {goal.row, goal.col};
        rec["depth"] = d;
        rec["episode"] = e;
        episodes.push_back(std::move(rec));
      }
      std::cout << "goal (" << goal.row << "," << goal.col << ") depth " << d << " done\n";
    }
  }
  csv.save(out / "transfer.csv");
  ggpi::write_json(out / "transfer.json", Json{{"ghm_computations", cache.computations()}, {"episodes", episodes}});
  std::cout << "model tables computed once: " << cache.computations() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// export

int cmd_export(const Json& c) {
  const std::string env = c.at("env").get<std::string>();
  const double gamma = c.at("gamma").get<double>();
  require(gamma >= 0.0 && gamma < 1.0, "--gamma must lie in [0, 1)");
  ggpi::PolicyRegistry policies;
  std::optional<ggpi::Mdp> mdp;
  if (env == "four-rooms") {
    const ggpi::GridWorld w = ggpi::four_rooms(gamma);
    mdp = w.mdp;
    policies = w.policies;
  } else if (env == "chain") {
    const ggpi::ChainWorld ch = ggpi::default_chain(gamma);
    mdp = ch.mdp;
    policies.add("initial", ch.initial);
    policies.add("up", ggpi::MarkovPolicy::constant(ch.mdp.n_states(), 2, ggpi::kChainUp));
  } else if (env == "tree") {
    const ggpi::TreeWorld t = ggpi::unclosed_set_tree();
    mdp = t.mdp;
    policies = t.policies;
  } else if (env == "fixture1" || env == "fixture2") {
    const ggpi::LearningFixtures fx = ggpi::learning_fixtures(gamma);
    mdp = env == "fixture1" ? fx.recurrent : fx.transient;
    policies.add("uniform", ggpi::MarkovPolicy::uniform(3, 1));
  } else if (env == "random") {
    ggpi::RngStream rng(c.at("seed").get<std::uint64_t>());
    mdp = ggpi::random_mdp(8, 3, 4, 1.0, gamma, rng);
    for (int i = 0; i < 3; ++i) policies.add("p" + std::to_string(i), ggpi::random_policy(8, 3, rng));
  } else {
    throw CLI::ValidationError("--env must be four-rooms, chain, tree, fixture1, fixture2 or random");
  }
  const fs::path out = prepare_out(c);
  ggpi::save_mdp(out / "mdp.json", *mdp);
  ggpi::write_json(out / "policies.json", ggpi::policies_to_json(policies));
  std::cout << "wrote " << (out / "mdp.json").string() << " and " << (out / "policies.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning with geometric horizon models and generalised policy improvement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<std::unique_ptr<Settings>> settings;
  std::map<std::string, std::function<int(const Json&)>> handlers;
  auto sub = [&](const std::string& name, const std::string& help, std::function<int(const Json&)> fn) -> Settings& {
    settings.push_back(std::make_unique<Settings>(app.add_subcommand(name, help), name));
    handlers[name] = std::move(fn);
    return *settings.back();
  };

  Settings& fr = sub("four-rooms", "optimal-action coverage of GGPI by depth on four-rooms", cmd_four_rooms);
  add_common(fr, 0.9, 1.0 - 0.8 / 0.9, 3, 0);
  fr.add<std::string>("goal", "0,10", "goal cell as row,col");

  Settings& pi = sub("policy-iter", "seed x depth sweep of GGPI policy iteration", cmd_policy_iter);
  add_common(pi, 0.95, 0.1, 3, 1000);
  pi.add<std::size_t>("seeds", 20, "number of seeds (seed, seed+1, ...)");
  pi.add<std::size_t>("iters", 40, "improvement-step cap per run");
  pi.add<double>("step-reward", -1.0, "per-step reward on four-rooms");
  pi.add<std::string>("init", "uniform", "initial policy: uniform or random (deterministic)");
  pi.add<std::string>("mdp", "", "MDP JSON file instead of four-rooms");
  pi.flag("end-in-newest", "only evaluate GSPs ending in the newest policy");

  Settings& ce = sub("cetd", "cross-entropy TD learning traces on the three-state fixtures", cmd_cetd);
  add_common(ce, 0.9, 0.1, 1, 0);
  ce.add<std::string>("fixture", "both", "1, 2 or both");
  ce.add<std::string>("learner", "cetd", "cetd, cemc, ll2td or all");
  ce.add<std::uint64_t>("iters", 100000, "learning iterations");
  ce.add<std::uint64_t>("eval-every", 1000, "iterations between trace rows");
  ce.add<std::size_t>("runs", 1, "independent runs (seeds seed, seed+1, ...)");
  ce.add<double>("step-scale", 0.75, "step size scale c in c (k+1)^-p");
  ce.add<double>("step-power", 0.6, "step size power p");

  Settings& cx = sub("counterexamples", "check the counterexample values; nonzero exit on mismatch", cmd_counterexamples);
  cx.add<std::uint64_t>("seed", 0, "unused; accepted for uniformity");
  cx.add<std::string>("out", "results/counterexamples", "output directory");

  Settings& ev = sub("eval-gsp", "estimate and exactly evaluate one GSP on an MDP file", cmd_eval_gsp);
  add_common(ev, 0.9, 0.1, 1, 1000);
  ev.add<std::string>("mdp", "", "MDP JSON file");
  ev.add<std::string>("policies", "", "policies JSON file");
  ev.add<std::string>("gsp", "", "policy ids or indices joined by ->, e.g. left->up");
  ev.add<std::string>("pairs", "", "state:action pairs separated by ';' (default: all)");
  ev.flag("save-ghms", "also write the model tables as GHM JSON");

  Settings& tr = sub("transfer", "GGPI transfer to new goals with cached models", cmd_transfer);
  add_common(tr, 0.9, 0.1, 3, 100);
  tr.add<std::string>("goals", "0,10;10,0;9,9", "goal cells row,col separated by ';'");
  tr.add<std::string>("start", "4,2", "start cell row,col");
  tr.add<std::size_t>("episodes", 3, "episodes per goal and depth");
  tr.add<std::size_t>("episode-cap", 200, "step cap per episode");

  Settings& ex = sub("export", "write a built-in environment as MDP and policies JSON", cmd_export);
  ex.add<std::string>("env", "four-rooms", "four-rooms, chain, tree, fixture1, fixture2 or random");
  ex.add<double>("gamma", 0.9, "discount factor");
  ex.add<std::uint64_t>("seed", 0, "seed for the random environment");
  ex.add<std::string>("out", "results/export", "output directory");

  try {
    app.parse(argc, argv);
    for (const auto& s : settings) {
      if (s->app()->parsed()) return handlers.at(s->name())(s->resolve());
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
