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

// JSON and CSV serialisation plus atomic file output.

#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

#include "ggpi/algorithms.hpp"
#include "ggpi/cetd.hpp"
#include "ggpi/ghm.hpp"
#include "ggpi/gsp.hpp"
#include "ggpi/improvement.hpp"
#include "ggpi/mdp.hpp"

namespace ggpi {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Files

/// Writes `content` to a sibling temp file, then renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("atomic_write: rename to " + path.string() + " failed: " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("read_json: " + path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) { atomic_write(path, j.dump(2) + "\n"); }

/// Minimal CSV builder; fields containing separators or quotes are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> cells{cell(fields)...};
    add_row(cells);
  }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("CsvTable: row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) text_ += ',';
      text_ += quote(cells[i]);
    }
    text_ += '\n';
    ++rows_;
  }

  std::size_t data_rows() const { return rows_ - 1; }
  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { atomic_write(path, text_); }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "true" : "false"; }
  template <typename T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      return Json(v).dump();
    } else {
      return std::to_string(v);
    }
  }
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

// ---------------------------------------------------------------------------
// Matrices

namespace detail {

/// (S*A) x S matrix as a nested [x][a][y] array.
inline Json tensor_to_json(const Matrix& m, std::size_t n_actions) {
  const std::size_t ns = static_cast<std::size_t>(m.cols());
  Json out = Json::array();
  for (std::size_t x = 0; x < ns; ++x) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < n_actions; ++a) {
      Json row = Json::array();
      for (std::size_t y = 0; y < ns; ++y) row.push_back(m(idx(x * n_actions + a), idx(y)));
      per_action.push_back(std::move(row));
    }
    out.push_back(std::move(per_action));
  }
  return out;
}

inline Matrix tensor_from_json(const Json& j, std::size_t ns, std::size_t na, const char* what) {
  if (!j.is_array() || j.size() != ns) throw std::invalid_argument(std::string(what) + ": expected n_states blocks");
  Matrix m(idx(ns * na), idx(ns));
  for (std::size_t x = 0; x < ns; ++x) {
    if (!j[x].is_array() || j[x].size() != na) throw std::invalid_argument(std::string(what) + ": expected n_actions rows");
    for (std::size_t a = 0; a < na; ++a) {
      if (!j[x][a].is_array() || j[x][a].size() != ns) {
        throw std::invalid_argument(std::string(what) + ": expected n_states entries per row");
      }
      for (std::size_t y = 0; y < ns; ++y) m(idx(x * na + a), idx(y)) = j[x][a][y].get<double>();
    }
  }
  return m;
}

inline Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw std::invalid_argument(std::string(what) + ": wrong row count");
  Matrix m(idx(rows), idx(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw std::invalid_argument(std::string(what) + ": wrong column count");
    for (std::size_t c = 0; c < cols; ++c) m(idx(r), idx(c)) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MDP

inline Json mdp_to_json(const Mdp& mdp) {
  Json j;
  j["n_states"] = mdp.n_states();
  j["n_actions"] = mdp.n_actions();
  j["gamma"] = mdp.gamma();
  j["transition"] = detail::tensor_to_json(mdp.transition(), mdp.n_actions());
  j["reward"] = detail::matrix_to_json(mdp.reward());
  j["state_reward_only"] = mdp.state_reward_only();
  Json terminal = Json::array();
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    if (mdp.is_terminal(x)) terminal.push_back(x);
  }
  if (!terminal.empty()) j["terminal"] = terminal;
  if (!mdp.labels().empty()) {
    Json labels = Json::object();
    for (const auto& [x, name] : mdp.labels()) labels[std::to_string(x)] = name;
    j["labels"] = labels;
  }
  return j;
}

/// Parses the MDP format and validates the result.
inline Mdp mdp_from_json(const Json& j) {
  try {
    const auto ns = j.at("n_states").get<std::size_t>();
    const auto na = j.at("n_actions").get<std::size_t>();
    if (ns == 0 || na == 0) throw std::invalid_argument("mdp_from_json: empty state or action set");
    std::vector<bool> terminal(ns, false);
    if (j.contains("terminal")) {
      for (const auto& t : j.at("terminal")) {
        const auto x = t.get<std::size_t>();
        if (x >= ns) throw std::invalid_argument("mdp_from_json: terminal index out of range");
        terminal[x] = true;
      }
    }
    std::map<std::size_t, std::string> labels;
    if (j.contains("labels")) {
      for (const auto& [key, value] : j.at("labels").items()) {
        const std::size_t x = std::stoul(key);
        if (x >= ns) throw std::invalid_argument("mdp_from_json: label index out of range");
        labels[x] = value.get<std::string>();
      }
    }
    Mdp mdp(detail::tensor_from_json(j.at("transition"), ns, na, "mdp_from_json transition"),
            detail::matrix_from_json(j.at("reward"), ns, na, "mdp_from_json reward"), j.at("gamma").get<double>(),
            j.value("state_reward_only", false), std::move(terminal), std::move(labels));
    validate_or_throw(mdp);
    return mdp;
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("mdp_from_json: ") + e.what());
  }
}

inline void save_mdp(const std::filesystem::path& path, const Mdp& mdp) { write_json(path, mdp_to_json(mdp)); }
inline Mdp load_mdp(const std::filesystem::path& path) { return mdp_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Policies

/// {"n_actions": A, "policies": [{"id": ..., "probs": [[...]]} | {"id": ..., "actions": [...]}]}
inline Json policies_to_json(const PolicyRegistry& registry) {
  Json list = Json::array();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const MarkovPolicy& pi = registry.at(i);
    Json entry{{"id", registry.id(i)}};
    if (pi.is_deterministic()) {
      entry["actions"] = pi.actions();
    } else {
      entry["probs"] = detail::matrix_to_json(pi.probs());
    }
    list.push_back(std::move(entry));
  }
  Json j{{"policies", list}};
  j["n_actions"] = registry.size() > 0 ? registry.at(0).n_actions() : 0;
  return j;
}

inline PolicyRegistry policies_from_json(const Json& j, const Mdp& mdp) {
  PolicyRegistry registry;
  try {
    for (const auto& entry : j.at("policies")) {
      const auto id = entry.at("id").get<std::string>();
      MarkovPolicy pi;
      if (entry.contains("actions")) {
        const auto actions = entry.at("actions").get<std::vector<std::size_t>>();
        if (actions.size() != mdp.n_states()) throw std::invalid_argument("policy " + id + ": wrong state count");
        pi = MarkovPolicy::deterministic(mdp.n_actions(), actions);
      } else {
        pi = MarkovPolicy(detail::matrix_from_json(entry.at("probs"), mdp.n_states(), mdp.n_actions(), "policy probs"));
      }
      const ValidationReport report = validate(pi);
      if (!report.ok()) throw std::invalid_argument("policy " + id + ": " + report.to_string());
      registry.add(id, std::move(pi));
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("policies_from_json: ") + e.what());
  }
  if (registry.size() == 0) throw std::invalid_argument("policies_from_json: no policies");
  return registry;
}

// ---------------------------------------------------------------------------
// GHM

inline Json ghm_to_json(const GhmTable& table) {
  return Json{{"policy", table.policy_id()},
              {"beta", table.beta()},
              {"dist", detail::tensor_to_json(table.dist(), table.n_actions())}};
}

inline GhmTable ghm_from_json(const Json& j) {
  try {
    const Json& dist = j.at("dist");
    if (!dist.is_array() || dist.empty() || !dist[0].is_array()) throw std::invalid_argument("ghm_from_json: bad dist");
    const std::size_t ns = dist.size();
    const std::size_t na = dist[0].size();
    return GhmTable(j.at("policy").get<std::string>(), j.at("beta").get<double>(),
                    detail::tensor_from_json(dist, ns, na, "ghm_from_json dist"), na);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("ghm_from_json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// GSP specs

/// Parses "a->b->c" where each token is a policy id or index.
inline Gsp parse_gsp(const std::string& text, const PolicyRegistry& registry, double alpha) {
  Gsp gsp;
  gsp.alpha = alpha;
  std::size_t start = 0;
  while (true) {
    const std::size_t arrow = text.find("->", start);
    std::string token = text.substr(start, arrow == std::string::npos ? std::string::npos : arrow - start);
    const auto first = token.find_first_not_of(' ');
    const auto last = token.find_last_not_of(' ');
    token = first == std::string::npos ? "" : token.substr(first, last - first + 1);
    if (token.empty()) throw std::invalid_argument("parse_gsp: empty policy name in '" + text + "'");
    std::size_t id = registry.find(token);
    if (id == PolicyRegistry::kNotFound) {
      if (token.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("parse_gsp: unknown policy '" + token + "'");
      }
      id = std::stoul(token);
      if (id >= registry.size()) throw std::invalid_argument("parse_gsp: policy index " + token + " out of range");
    }
    gsp.base.push_back(id);
    if (arrow == std::string::npos) break;
    start = arrow + 2;
  }
  gsp.validate(registry.size());
  return gsp;
}

inline Json gsp_ids(const Gsp& gsp, const PolicyRegistry& registry) {
  Json ids = Json::array();
  for (const std::size_t p : gsp.base) ids.push_back(registry.id(p));
  return ids;
}

// ---------------------------------------------------------------------------
// Reports

inline Json estimate_record(std::size_t x, std::size_t a, const Gsp& gsp, const PolicyRegistry& registry,
                            const Estimate& e, std::optional<double> exact = std::nullopt) {
  Json j{{"state", x},     {"action", a},         {"gsp", gsp_ids(gsp, registry)}, {"n_samples", e.n_samples},
         {"mean", e.mean}, {"stderr", e.std_error}};
  if (exact) j["exact"] = *exact;
  return j;
}

/// Per-state provenance of an improvement step.
inline Json improvement_report(const ImprovedPolicy& improved, const PolicyRegistry& registry) {
  Json states = Json::array();
  for (std::size_t x = 0; x < improved.choices.size(); ++x) {
    const StateChoice& c = improved.choices[x];
    Json s{{"state", x}, {"action", c.action}, {"value", c.value}, {"tie_actions", c.tie_actions}};
    if (c.winner) s["winner"] = gsp_ids(*c.winner, registry);
    Json tied = Json::array();
    for (const Gsp& g : c.tied_winners) tied.push_back(gsp_ids(g, registry));
    s["tied_winners"] = tied;
    states.push_back(std::move(s));
  }
  return Json{{"states", states}, {"ghm_draws", improved.ghm_draws}};
}

inline Json pi_record_to_json(const PiRunRecord& r) {
  Json j{{"iterations_used", r.iterations_used},
         {"policies", r.policies},
         {"draws_per_iteration", r.draws_per_iteration},
         {"total_ghm_samples", r.total_ghm_samples},
         {"converged", r.converged},
         {"budget_exhausted", r.budget_exhausted},
         {"final_optimal", r.final_optimal}};
  j["iterations_to_optimal"] = r.iterations_to_optimal ? Json(*r.iterations_to_optimal) : Json(nullptr);
  j["samples_to_optimal"] = r.samples_to_optimal ? Json(*r.samples_to_optimal) : Json(nullptr);
  return j;
}

inline Json transfer_record_to_json(const TransferRunRecord& r, const PolicyRegistry& registry) {
  Json steps = Json::array();
  for (const TransferStep& s : r.steps) {
    steps.push_back(Json{{"state", s.state}, {"action", s.action}, {"gsp", gsp_ids(s.winner, registry)}, {"value", s.value}});
  }
  return Json{{"steps", steps},
              {"n_steps", r.steps.size()},
              {"episode_return", r.episode_return},
              {"discounted_return", r.discounted_return},
              {"reached_stop", r.reached_stop},
              {"ghm_draws", r.ghm_draws}};
}

inline CsvTable trace_csv(const ConvergenceTrace& trace) {
  CsvTable csv({"iteration", "lyapunov", "max_tv", "epsilon"});
  for (const TraceRecord& t : trace.records) csv.row(t.iteration, t.lyapunov, t.max_tv, t.epsilon);
  return csv;
}

}  // namespace ggpi
