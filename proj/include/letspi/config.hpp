#pragma once

// Run configuration. The file format is the TOML subset the tools need:
// [section] and [section.sub] headers, key = value with strings, numbers,
// booleans and flat arrays, and # comments. It is parsed into a JSON tree.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/ingest.hpp"
#include "letspi/llm/backend.hpp"
#include "letspi/memory.hpp"
#include "letspi/safety.hpp"
#include "letspi/social_force.hpp"

namespace letspi::config {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  return std::string(s.substr(b, s.find_last_not_of(" \t\r") - b + 1));
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline nlohmann::json parse_scalar(const std::string& v, std::size_t lineno) {
  auto fail = [&]() -> nlohmann::json {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": cannot parse value '" + v + "'");
  };
  if (v.empty()) return fail();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return fail();
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v)
    if (c != '_') digits += c;
  char* end = nullptr;
  if (digits.find_first_of(".eEin") == std::string::npos) {
    const long long i = std::strtoll(digits.c_str(), &end, 10);
    if (end == digits.c_str() + digits.size()) return i;
  }
  const double d = std::strtod(digits.c_str(), &end);
  if (end != digits.c_str() + digits.size()) return fail();
  return d;
}

inline std::vector<std::string> split_array(const std::string& inner) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (char c : inner) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail

inline nlohmann::json parse_toml(std::istream& in) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3 || s[1] == '[')
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": bad table header");
      table = &root;
      std::stringstream path(s.substr(1, s.size() - 2));
      std::string part;
      while (std::getline(path, part, '.')) {
        part = detail::trim(part);
        if (part.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty table name");
        nlohmann::json& next = (*table)[part];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object())
          throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": '" + part + "' is not a table");
        table = &next;
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty key");
    if (table->contains(key)) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": unterminated array");
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& item : detail::split_array(value.substr(1, value.size() - 2)))
        arr.push_back(detail::parse_scalar(item, lineno));
      (*table)[key] = arr;
    } else {
      (*table)[key] = detail::parse_scalar(value, lineno);
    }
  }
  return root;
}

inline nlohmann::json parse_toml_string(const std::string& text) {
  std::istringstream in(text);
  return parse_toml(in);
}

// ---------------------------------------------------------------------------
// Typed configuration

struct DataConfig {
  std::string tracks;
  std::string lanes;
  std::string schema;    // optional column mapping; HighD names by default
  std::string manifest;  // optional; restricts egos to its ego_ids
  std::string scenarios; // optional pre-segmented scenarios.jsonl (takes precedence)
  std::size_t sample{0}; // 0 = all
  std::uint64_t seed{0};
  ingest::GoalMode goal_mode{ingest::GoalMode::GroundTruth};
  bool neighbor_full_window{false};
};

struct MemoryConfig {
  std::string path;
  std::size_t k{3};
  memory::DistanceMode mode{memory::DistanceMode::Corrected};
  std::size_t capacity{1'000'000};
  double fraction{1.0};
};

struct RunSettings {
  int workers{1};
  int budget{3};
  bool goal_adjustment{true};
  std::size_t refinement_examples{0};
  std::string output_dir{"out"};
  std::vector<double> memory_sweep{0.0, 0.1, 0.5, 1.0};
};

struct AppConfig {
  DataConfig data;
  std::optional<DataConfig> train;  // [data.train], used by ablations
  ingest::WindowSpec window;
  sf::SfParams sf;
  sf::EngineConfig engine;
  sf::IdmConfig idm;
  safety::Thresholds thresholds;
  llm::BackendConfig llm_memory;
  llm::BackendConfig llm_fast;
  MemoryConfig memory;
  RunSettings run;
  std::string base_dir{"."};
};

namespace detail {

template <typename T>
void read(const nlohmann::json& table, const char* key, T& out) {
  auto it = table.find(key);
  if (it == table.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("config key '") + key + "' has the wrong type");
  }
}

inline std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

inline DataConfig read_data(const nlohmann::json& t, const std::string& base) {
  DataConfig d;
  read(t, "tracks", d.tracks);
  read(t, "lanes", d.lanes);
  read(t, "schema", d.schema);
  read(t, "manifest", d.manifest);
  read(t, "scenarios", d.scenarios);
  read(t, "sample", d.sample);
  read(t, "seed", d.seed);
  read(t, "neighbor_full_window", d.neighbor_full_window);
  std::string goal_mode = "ground_truth";
  read(t, "goal_mode", goal_mode);
  if (goal_mode == "ground_truth") d.goal_mode = ingest::GoalMode::GroundTruth;
  else if (goal_mode == "constant_velocity") d.goal_mode = ingest::GoalMode::ConstantVelocity;
  else throw Error(ErrorCode::ConfigError, "goal_mode must be ground_truth or constant_velocity");
  for (auto* p : {&d.tracks, &d.lanes, &d.schema, &d.manifest, &d.scenarios}) *p = resolve(base, *p);
  return d;
}

inline llm::BackendConfig read_backend(const nlohmann::json& t, const std::string& base) {
  llm::BackendConfig b;
  read(t, "backend", b.kind);
  read(t, "url", b.url);
  read(t, "model", b.model);
  read(t, "command", b.command);
  read(t, "response_path", b.response_path);
  read(t, "timeout_s", b.timeout_s);
  read(t, "retries", b.retries);
  read(t, "max_concurrency", b.max_concurrency);
  read(t, "script", b.script);
  b.script = resolve(base, b.script);
  if (b.kind != "scripted" && b.kind != "mock" && b.kind != "http" && b.kind != "stdio")
    throw Error(ErrorCode::ConfigError, "llm backend must be scripted, mock, http or stdio");
  if (!(b.timeout_s > 0.0) || b.retries < 0) throw Error(ErrorCode::ConfigError, "llm timeout/retries out of range");
  return b;
}

inline const nlohmann::json& table(const nlohmann::json& root, const char* name) {
  static const nlohmann::json empty = nlohmann::json::object();
  auto it = root.find(name);
  if (it == root.end()) return empty;
  if (!it->is_object()) throw Error(ErrorCode::ConfigError, std::string("[") + name + "] must be a table");
  return *it;
}

}  // namespace detail

inline AppConfig from_json(const nlohmann::json& root, const std::string& base_dir = ".") {
  AppConfig c;
  c.base_dir = base_dir;
  const auto& data = detail::table(root, "data");
  c.data = detail::read_data(data, base_dir);
  if (data.contains("train")) c.train = detail::read_data(detail::table(data, "train"), base_dir);

  const auto& w = detail::table(root, "window");
  detail::read(w, "history_frames", c.window.history_frames);
  detail::read(w, "future_frames", c.window.future_frames);
  detail::read(w, "stride", c.window.stride);
  if (c.window.history_frames < 1 || c.window.future_frames < 1 || c.window.stride < 1)
    throw Error(ErrorCode::ConfigError, "[window] values must be positive");

  const auto& sfp = detail::table(root, "sf");
  detail::read(sfp, "tau", c.sf.tau);
  detail::read(sfp, "k_np", c.sf.k_np);
  detail::read(sfp, "k_nf", c.sf.k_nf);
  detail::read(sfp, "k_nl", c.sf.k_nl);
  detail::read(sfp, "k_boundary", c.sf.k_boundary);
  detail::read(sfp, "k_cline", c.sf.k_cline);
  detail::read(sfp, "r_col", c.sf.r_col);
  detail::read(sfp, "lateral_window", c.engine.lateral_window);
  detail::read(sfp, "accel_clamp", c.engine.accel_clamp);
  if (!sf::within_bounds(c.sf)) throw Error(ErrorCode::ConfigError, "[sf] parameters out of bounds");

  const auto& idm = detail::table(root, "idm");
  detail::read(idm, "v_desired", c.idm.base.v_desired);
  detail::read(idm, "s0_min_gap", c.idm.base.s0_min_gap);
  detail::read(idm, "t_headway", c.idm.base.t_headway);
  detail::read(idm, "a_max", c.idm.base.a_max);
  detail::read(idm, "b_comfort", c.idm.base.b_comfort);
  detail::read(idm, "track_current_speed", c.idm.track_current_speed);
  const auto& ip = c.idm.base;
  if (!(ip.v_desired > 0 && ip.s0_min_gap > 0 && ip.t_headway > 0 && ip.a_max > 0 && ip.b_comfort > 0))
    throw Error(ErrorCode::ConfigError, "[idm] values must be positive");

  const auto& th = detail::table(root, "thresholds");
  detail::read(th, "reflect_ttc", c.thresholds.reflect_ttc);
  detail::read(th, "reflect_distance", c.thresholds.reflect_distance);
  detail::read(th, "eval_ttc", c.thresholds.eval_ttc);
  detail::read(th, "collision_distance", c.thresholds.collision_distance);
  detail::read(th, "pet_dx", c.thresholds.pet_dx);
  detail::read(th, "pet_dy", c.thresholds.pet_dy);
  detail::read(th, "goal_tol_x", c.thresholds.goal_tol_x);
  detail::read(th, "goal_tol_lanes", c.thresholds.goal_tol_lanes);
  detail::read(th, "accel_limit", c.thresholds.accel_limit);
  if (!(c.thresholds.pet_dx > 0 && c.thresholds.pet_dy > 0))
    throw Error(ErrorCode::ConfigError, "PET cell dimensions must be positive");

  const auto& llm_t = detail::table(root, "llm");
  c.llm_memory = detail::read_backend(detail::table(llm_t, "memory"), base_dir);
  c.llm_fast = detail::read_backend(detail::table(llm_t, "fast"), base_dir);

  const auto& mem = detail::table(root, "memory");
  detail::read(mem, "path", c.memory.path);
  c.memory.path = detail::resolve(base_dir, c.memory.path);
  detail::read(mem, "k", c.memory.k);
  detail::read(mem, "capacity", c.memory.capacity);
  detail::read(mem, "fraction", c.memory.fraction);
  std::string mode = "corrected";
  detail::read(mem, "mode", mode);
  if (mode == "corrected") c.memory.mode = memory::DistanceMode::Corrected;
  else if (mode == "paper_literal") c.memory.mode = memory::DistanceMode::PaperLiteral;
  else throw Error(ErrorCode::ConfigError, "memory mode must be corrected or paper_literal");
  if (c.memory.k < 1) throw Error(ErrorCode::ConfigError, "memory k must be >= 1");

  const auto& run = detail::table(root, "run");
  detail::read(run, "workers", c.run.workers);
  detail::read(run, "budget", c.run.budget);
  detail::read(run, "goal_adjustment", c.run.goal_adjustment);
  detail::read(run, "refinement_examples", c.run.refinement_examples);
  detail::read(run, "output_dir", c.run.output_dir);
  detail::read(run, "memory_sweep", c.run.memory_sweep);
  c.run.output_dir = detail::resolve(base_dir, c.run.output_dir);
  if (c.run.workers < 1 || c.run.budget < 1) throw Error(ErrorCode::ConfigError, "[run] workers and budget must be >= 1");
  return c;
}

inline AppConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  const auto parent = std::filesystem::path(path).parent_path();
  return from_json(parse_toml(in), parent.empty() ? "." : parent.string());
}

}  // namespace letspi::config
