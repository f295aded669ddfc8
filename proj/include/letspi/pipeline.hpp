#pragma once

// End-to-end runs: memory collection, fast inference, baselines and the
// ablation sweeps, each reduced to a metrics table row.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/adjustment.hpp"
#include "letspi/config.hpp"
#include "letspi/error.hpp"
#include "letspi/ingest.hpp"
#include "letspi/llm/backend.hpp"
#include "letspi/llm/http_backend.hpp"
#include "letspi/llm/prompt.hpp"
#include "letspi/llm/response.hpp"
#include "letspi/llm/scripted.hpp"
#include "letspi/memory.hpp"
#include "letspi/reflection.hpp"
#include "letspi/safety.hpp"
#include "letspi/scenario.hpp"
#include "letspi/social_force.hpp"

namespace letspi::pipeline {

// ---------------------------------------------------------------------------
// Per-scenario results and the metrics table

struct ScenarioResult {
  std::string scenario_id;
  bool evaluated{false};  // false when no trajectory could be produced
  safety::SafetyReport report;
  bool accepted{true};    // memory phase: reflection outcome
  bool parse_failure{false};
  std::string error;
  int llm_calls{0};
  int iterations{0};
  sf::SfParams params;
  GoalAdjustment adjustment{kNeutralAdjustment};
  double inference_time_s{0.0};

  bool succeeded() const { return evaluated && accepted && !parse_failure && report.success; }
};

struct MetricsRow {
  std::string model;
  std::size_t scenarios{0};
  double ttc_mean{safety::kInf};
  std::size_t ttc_excluded{0};  // scenarios whose minimum TTC was +inf
  double cr{0.0};               // %
  double pet_mean{safety::kInf};
  std::size_t pet_excluded{0};
  double mind_mean{safety::kInf};
  std::size_t mind_excluded{0};
  double lt{0.0};  // %
  double sr{0.0};  // %
  double inference_time_mean{0.0};
};

inline MetricsRow aggregate(const std::string& model, const std::vector<ScenarioResult>& results) {
  MetricsRow row;
  row.model = model;
  row.scenarios = results.size();
  if (results.empty()) return row;
  double ttc = 0, pet = 0, mind = 0, time = 0;
  std::size_t n_ttc = 0, n_pet = 0, n_mind = 0, collided = 0, low = 0, ok = 0;
  for (const auto& r : results) {
    time += r.inference_time_s;
    if (r.succeeded()) ++ok;
    if (!r.evaluated) {
      ++row.ttc_excluded;
      ++row.pet_excluded;
      ++row.mind_excluded;
      continue;
    }
    if (std::isfinite(r.report.min_ttc)) {
      ttc += r.report.min_ttc;
      ++n_ttc;
    } else {
      ++row.ttc_excluded;
    }
    if (std::isfinite(r.report.pet)) {
      pet += r.report.pet;
      ++n_pet;
    } else {
      ++row.pet_excluded;
    }
    if (std::isfinite(r.report.min_distance)) {
      mind += r.report.min_distance;
      ++n_mind;
    } else {
      ++row.mind_excluded;
    }
    if (r.report.collided) ++collided;
    if (r.report.low_ttc) ++low;
  }
  const double n = static_cast<double>(results.size());
  if (n_ttc) row.ttc_mean = ttc / static_cast<double>(n_ttc);
  if (n_pet) row.pet_mean = pet / static_cast<double>(n_pet);
  if (n_mind) row.mind_mean = mind / static_cast<double>(n_mind);
  row.cr = 100.0 * static_cast<double>(collided) / n;
  row.lt = 100.0 * static_cast<double>(low) / n;
  row.sr = 100.0 * static_cast<double>(ok) / n;
  row.inference_time_mean = time / n;
  return row;
}

inline nlohmann::json to_json(const MetricsRow& r) {
  return {{"model", r.model},
          {"scenarios", r.scenarios},
          {"ttc_mean", safety::finite_or_null(r.ttc_mean)},
          {"ttc_excluded", r.ttc_excluded},
          {"cr", r.cr},
          {"pet_mean", safety::finite_or_null(r.pet_mean)},
          {"pet_excluded", r.pet_excluded},
          {"mind_mean", safety::finite_or_null(r.mind_mean)},
          {"mind_excluded", r.mind_excluded},
          {"lt", r.lt},
          {"sr", r.sr},
          {"inference_time_mean", r.inference_time_mean}};
}

inline MetricsRow row_from_json(const nlohmann::json& j) {
  MetricsRow r;
  r.model = j.at("model").get<std::string>();
  r.scenarios = j.value("scenarios", std::size_t{0});
  r.ttc_mean = safety::number_or_inf(j.at("ttc_mean"));
  r.ttc_excluded = j.value("ttc_excluded", std::size_t{0});
  r.cr = j.at("cr").get<double>();
  r.pet_mean = safety::number_or_inf(j.at("pet_mean"));
  r.pet_excluded = j.value("pet_excluded", std::size_t{0});
  r.mind_mean = safety::number_or_inf(j.at("mind_mean"));
  r.mind_excluded = j.value("mind_excluded", std::size_t{0});
  r.lt = j.at("lt").get<double>();
  r.sr = j.at("sr").get<double>();
  r.inference_time_mean = j.value("inference_time_mean", 0.0);
  return r;
}

/// Table column order: TTC, CR, PET, MinD, LT, SR, inference time.
inline const std::vector<std::string>& table_header() {
  static const std::vector<std::string> h{"Model",  "TTC (s)", "CR (%)", "PET (s)", "MinD (m)",
                                          "LT (%)", "SR (%)",  "Inference Time (s)"};
  return h;
}

inline std::vector<std::string> table_cells(const MetricsRow& r, bool with_time = true) {
  return {r.model,         text::num(r.ttc_mean),  text::num(r.cr, 1), text::num(r.pet_mean), text::num(r.mind_mean),
          text::num(r.lt, 1), text::num(r.sr, 1),
          with_time ? text::num(r.inference_time_mean, 4) : std::string("-")};
}

inline std::string render_csv(const std::vector<MetricsRow>& rows, bool with_time = true) {
  std::string s;
  const auto& h = table_header();
  for (std::size_t i = 0; i < h.size(); ++i) s += (i ? "," : "") + h[i];
  s += "\n";
  for (const auto& r : rows) {
    const auto c = table_cells(r, with_time);
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + c[i];
    s += "\n";
  }
  return s;
}

inline std::string render_text(const std::vector<MetricsRow>& rows, bool with_time = true) {
  std::vector<std::vector<std::string>> cells{table_header()};
  for (const auto& r : rows) cells.push_back(table_cells(r, with_time));
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string s;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string pad(width[i] - row[i].size(), ' ');
      s += i == 0 ? row[i] + pad : "  " + pad + row[i];
    }
    s += "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dataset and backend construction

inline std::vector<Scenario> load_dataset(const config::DataConfig& d, const ingest::WindowSpec& window) {
  std::vector<Scenario> scenarios;
  if (!d.scenarios.empty()) {
    scenarios = ingest::read_scenarios(d.scenarios);
  } else {
    if (d.tracks.empty() || d.lanes.empty())
      throw Error(ErrorCode::ConfigError, "[data] needs either scenarios or tracks + lanes");
    const auto schema = d.schema.empty() ? ingest::ColumnSchema{} : ingest::load_schema(d.schema);
    const auto rows = ingest::load_tracks(d.tracks, schema);
    const auto lanes = ingest::load_lanes(d.lanes);
    ingest::SegmentOptions opt;
    opt.goal_mode = d.goal_mode;
    opt.neighbor_full_window = d.neighbor_full_window;
    if (!d.manifest.empty()) {
      std::ifstream in(d.manifest);
      if (!in) throw Error(ErrorCode::DatasetError, "cannot open manifest " + d.manifest);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.contains("ego_ids")) throw Error(ErrorCode::DatasetError, "bad manifest " + d.manifest);
      opt.ego_ids = j.at("ego_ids").get<std::set<int>>();
      opt.dt = j.value("dt", opt.dt);
    }
    scenarios = ingest::segment_windows(rows, window, lanes, opt).scenarios;
  }
  if (d.sample > 0) scenarios = ingest::sample_scenarios(scenarios, d.sample, d.seed);
  std::sort(scenarios.begin(), scenarios.end(),
            [](const Scenario& a, const Scenario& b) { return a.scenario_id < b.scenario_id; });
  return scenarios;
}

inline std::vector<llm::MockRule> load_mock_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open mock script " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw Error(ErrorCode::ConfigError, "mock script must be a JSON array");
  std::vector<llm::MockRule> rules;
  for (const auto& r : j) {
    llm::MockRule rule;
    const std::string kind = r.value("kind", "");
    if (kind == "PhysicsInformed") rule.kind = llm::PromptKind::PhysicsInformed;
    else if (kind == "Refinement") rule.kind = llm::PromptKind::Refinement;
    else if (kind == "Fast") rule.kind = llm::PromptKind::Fast;
    else if (!kind.empty()) throw Error(ErrorCode::ConfigError, "unknown prompt kind '" + kind + "'");
    rule.contains = r.value("contains", "");
    rule.response = r.at("response").is_string() ? r.at("response").get<std::string>() : r.at("response").dump();
    rule.uses = r.value("uses", 0);
    rules.push_back(std::move(rule));
  }
  return rules;
}

inline std::unique_ptr<llm::Backend> make_backend(const llm::BackendConfig& b) {
  if (b.kind == "scripted") return std::make_unique<llm::ScriptedPlanner>(llm::ScriptedPlannerConfig{}, b.max_concurrency);
  if (b.kind == "mock") return std::make_unique<llm::MockBackend>(load_mock_script(b.script));
  if (b.kind == "http") {
    if (b.url.empty()) throw Error(ErrorCode::ConfigError, "http backend needs a url (or LETSPI_LLM_URL)");
    return std::make_unique<llm::HttpBackend>(b.url, b.response_path, b.max_concurrency);
  }
  if (b.kind == "stdio") {
    if (b.command.empty()) throw Error(ErrorCode::ConfigError, "stdio backend needs a command");
    return std::make_unique<llm::StdioBackend>(b.command, b.max_concurrency);
  }
  throw Error(ErrorCode::ConfigError, "unknown backend '" + b.kind + "'");
}

inline llm::CompleteOptions complete_options(const llm::BackendConfig& b) { return {b.model, b.timeout_s, b.retries}; }

// ---------------------------------------------------------------------------
// Scenario-level parallel map with results in input order

template <typename Fn>
std::vector<ScenarioResult> parallel_map(const std::vector<Scenario>& scenarios, int workers, Fn&& fn) {
  std::vector<ScenarioResult> out(scenarios.size());
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(scenarios.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < scenarios.size(); i = next.fetch_add(1)) out[i] = fn(scenarios[i]);
  };
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline void fail_if_backend_down(const std::vector<ScenarioResult>& results) {
  if (results.empty()) return;
  for (const auto& r : results)
    if (r.error.rfind("LlmUnavailable", 0) != 0) return;
  throw Error(ErrorCode::LlmUnavailable, "backend unavailable for every scenario: " + results.front().error);
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Memory collection

struct PhaseSettings {
  int workers{1};
  int budget{3};
  bool goal_adjustment{true};
  std::size_t refinement_examples{0};
  std::size_t k{3};
  memory::DistanceMode mode{memory::DistanceMode::Corrected};
  safety::Thresholds thresholds;
  sf::EngineConfig engine;
  sf::IdmConfig idm;
  sf::SfParams fallback;  // used when the model gives nothing usable
  llm::CompleteOptions llm;
};

inline PhaseSettings settings_from(const config::AppConfig& c, const llm::BackendConfig& b) {
  PhaseSettings s;
  s.workers = c.run.workers;
  s.budget = c.run.budget;
  s.goal_adjustment = c.run.goal_adjustment;
  s.refinement_examples = c.run.refinement_examples;
  s.k = c.memory.k;
  s.mode = c.memory.mode;
  s.thresholds = c.thresholds;
  s.engine = c.engine;
  s.idm = c.idm;
  s.fallback = c.sf;
  s.llm = complete_options(b);
  return s;
}

struct MemoryPhaseResult {
  MetricsRow row;
  std::vector<ScenarioResult> results;
  std::size_t accepted{0};
  std::size_t rejected{0};
};

inline MemoryPhaseResult run_memory_phase(const std::vector<Scenario>& scenarios, llm::Backend& backend,
                                          memory::MemoryBank& bank, const PhaseSettings& ps,
                                          const std::string& model = "LetsPi (memory collection)") {
  ReflectionConfig rc;
  rc.budget = ps.budget;
  rc.goal_adjustment = ps.goal_adjustment;
  rc.memory_examples = ps.refinement_examples;
  rc.thresholds = ps.thresholds;
  rc.engine = ps.engine;
  rc.idm = ps.idm;
  rc.llm = ps.llm;

  std::vector<std::optional<memory::MemoryRecord>> pending(scenarios.size());

  auto results = parallel_map(scenarios, ps.workers, [&](const Scenario& s) {
    ScenarioResult r;
    r.scenario_id = s.scenario_id;
    const auto t0 = Clock::now();
    try {
      const ReflectionResult rr = reflect_loop(s, backend, rc, ps.refinement_examples ? &bank : nullptr);
      r.llm_calls = rr.llm_calls;
      r.iterations = rr.iterations();
      r.accepted = rr.accepted();
      if (!rr.reason.empty()) r.error = rr.reason;
      if (const Attempt* a = rr.final_attempt()) {
        r.evaluated = true;
        r.report = a->plan.report;
        r.params = a->params;
        r.adjustment = a->adjustment;
        if (rr.accepted()) {
          memory::MemoryRecord rec;
          rec.scenario_id = s.scenario_id;
          rec.features = memory::extract_features(s);
          rec.params = a->params;
          rec.goal_adjustment = a->adjustment;
          rec.safety = memory::summarize(a->plan.report);
          rec.guidance = llm::guidance_for(s, a->adjustment);
          const auto pos = static_cast<std::size_t>(&s - scenarios.data());
          pending[pos] = std::move(rec);
        }
      } else {
        r.parse_failure = rr.reason.rfind("ParseFailure", 0) == 0;
        const PlanningContext ctx = make_context(s, ps.idm);
        const PlanResult plan = plan_and_evaluate(s, ctx, ps.fallback, kNeutralAdjustment, ps.engine, ps.thresholds);
        r.evaluated = true;
        r.report = plan.report;
        r.params = ps.fallback;
      }
    } catch (const Error& e) {
      r.accepted = false;
      r.error = e.what();
    }
    r.inference_time_s = seconds_since(t0);
    return r;
  });
  fail_if_backend_down(results);

  MemoryPhaseResult out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (results[i].accepted && pending[i]) {
      bank.insert(*pending[i]);
      ++out.accepted;
    } else {
      ++out.rejected;
    }
  }
  out.results = std::move(results);
  out.row = aggregate(model, out.results);
  return out;
}

// ---------------------------------------------------------------------------
// Fast inference

struct FastPhaseResult {
  MetricsRow row;
  std::vector<ScenarioResult> results;
};

inline ScenarioResult fast_infer_one(const Scenario& s, llm::Backend& backend, const memory::MemoryBank& bank,
                                     const PhaseSettings& ps) {
  ScenarioResult r;
  r.scenario_id = s.scenario_id;
  const auto t0 = Clock::now();
  try {
    std::vector<memory::Match> analogs;
    if (bank.size() > 0) analogs = bank.top_k(memory::extract_features(s), ps.k, {}, ps.mode);
    const llm::PromptBundle prompt = llm::build_fast_prompt(s, analogs);
    r.llm_calls = 1;
    r.iterations = 1;
    std::optional<llm::LlmResponse> resp;
    try {
      resp = llm::parse_response(llm::complete(prompt, backend, ps.llm));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseFailure && e.code() != ErrorCode::SchemaFailure)
        throw Error(ErrorCode::LlmUnavailable, std::string("LlmUnavailable: ") + e.what());
      r.parse_failure = true;
      r.error = std::string("ParseFailure: ") + e.what();
    }
    r.params = resp ? resp->params : ps.fallback;
    if (ps.goal_adjustment) {
      if (resp && resp->goal_adjustment) r.adjustment = *resp->goal_adjustment;
      else if (!analogs.empty()) r.adjustment = analogs.front().record.goal_adjustment;
    }
    const PlanningContext ctx = make_context(s, ps.idm);
    const PlanResult plan = plan_and_evaluate(s, ctx, r.params, r.adjustment, ps.engine, ps.thresholds);
    r.evaluated = true;
    r.report = plan.report;
  } catch (const Error& e) {
    r.accepted = false;
    r.error = e.what();
  }
  r.inference_time_s = seconds_since(t0);
  return r;
}

inline FastPhaseResult run_fast_phase(const std::vector<Scenario>& scenarios, llm::Backend& backend,
                                      const memory::MemoryBank& bank, const PhaseSettings& ps,
                                      const std::string& model = "LetsPi (fast inference)") {
  FastPhaseResult out;
  out.results = parallel_map(scenarios, ps.workers, [&](const Scenario& s) { return fast_infer_one(s, backend, bank, ps); });
  fail_if_backend_down(out.results);
  out.row = aggregate(model, out.results);
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

struct BaselineResult {
  MetricsRow sf_row;
  MetricsRow idm_row;
  std::vector<ScenarioResult> sf_results;
  std::vector<ScenarioResult> idm_results;
};

inline BaselineResult run_baselines(const std::vector<Scenario>& scenarios, const PhaseSettings& ps,
                                    const sf::SfParams& fixed) {
  BaselineResult out;
  out.sf_results = parallel_map(scenarios, ps.workers, [&](const Scenario& s) {
    ScenarioResult r;
    r.scenario_id = s.scenario_id;
    r.params = fixed;
    const auto t0 = Clock::now();
    try {
      const PlanningContext ctx = make_context(s, ps.idm);
      r.report = plan_and_evaluate(s, ctx, fixed, kNeutralAdjustment, ps.engine, ps.thresholds).report;
      r.evaluated = true;
    } catch (const Error& e) {
      r.accepted = false;
      r.error = e.what();
    }
    r.inference_time_s = seconds_since(t0);
    return r;
  });
  out.idm_results = parallel_map(scenarios, ps.workers, [&](const Scenario& s) {
    ScenarioResult r;
    r.scenario_id = s.scenario_id;
    const auto t0 = Clock::now();
    try {
      const PlanningContext ctx = make_context(s, ps.idm);
      const auto plan = sf::idm_plan_ego(s, ctx.planning_futures, s.goal.horizon_frames, ps.idm);
      r.report = safety::evaluate(plan.trajectory, ctx.evaluation_futures, s.lanes, s.goal, ps.thresholds, s.ego_now(),
                                  s.dt);
      r.evaluated = true;
    } catch (const Error& e) {
      r.accepted = false;
      r.error = e.what();
    }
    r.inference_time_s = seconds_since(t0);
    return r;
  });
  out.sf_row = aggregate("SF", out.sf_results);
  out.idm_row = aggregate("IDM", out.idm_results);
  return out;
}

// ---------------------------------------------------------------------------
// Ablations

struct AblationResult {
  std::vector<MetricsRow> variants;     // Base, w/o Ref, w/o GA, FS
  std::vector<MetricsRow> memory_sweep; // one row per memory fraction
  std::size_t base_memory_size{0};
};

/// Each variant collects its own memory on `train` and is then scored by
/// fast inference on `test`. The sweep reuses the Base memory, truncated to
/// the first floor(p * N) records.
inline AblationResult run_ablation(const std::vector<Scenario>& train, const std::vector<Scenario>& test,
                                   llm::Backend& memory_backend, llm::Backend& fast_backend, const PhaseSettings& ps,
                                   const std::vector<double>& fractions) {
  AblationResult out;
  memory::MemoryBank base_bank;
  run_memory_phase(train, memory_backend, base_bank, ps);
  out.base_memory_size = base_bank.size();
  out.variants.push_back(run_fast_phase(test, fast_backend, base_bank, ps, "Base").row);

  PhaseSettings no_ref = ps;
  no_ref.budget = 1;
  memory::MemoryBank no_ref_bank;
  run_memory_phase(train, memory_backend, no_ref_bank, no_ref);
  out.variants.push_back(run_fast_phase(test, fast_backend, no_ref_bank, no_ref, "w/o Ref").row);

  PhaseSettings no_ga = ps;
  no_ga.goal_adjustment = false;
  memory::MemoryBank no_ga_bank;
  run_memory_phase(train, memory_backend, no_ga_bank, no_ga);
  out.variants.push_back(run_fast_phase(test, fast_backend, no_ga_bank, no_ga, "w/o GA").row);

  const memory::MemoryBank empty;
  out.variants.push_back(run_fast_phase(test, fast_backend, empty, ps, "FS").row);

  for (double p : fractions) {
    const memory::MemoryBank part = base_bank.prefix(p);
    out.memory_sweep.push_back(
        run_fast_phase(test, fast_backend, part, ps, text::num(100.0 * p, 0) + "% memory").row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

inline nlohmann::json result_json(const ScenarioResult& r) {
  return {{"scenario_id", r.scenario_id},
          {"evaluated", r.evaluated},
          {"accepted", r.accepted},
          {"parse_failure", r.parse_failure},
          {"success", r.succeeded()},
          {"error", r.error},
          {"llm_calls", r.llm_calls},
          {"iterations", r.iterations},
          {"params", memory::to_json(r.params)},
          {"goal_adjustment",
           {{"longitudinal_factor", r.adjustment.longitudinal_factor}, {"lane_factor", r.adjustment.lane_factor}}},
          {"report", safety::to_json(r.report)}};
}

inline void write_results(const std::string& path, const std::vector<ScenarioResult>& results) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  for (const auto& r : results) out << result_json(r).dump() << '\n';
}

inline void write_tables(const std::string& dir, const std::string& stem, const std::vector<MetricsRow>& rows) {
  std::filesystem::create_directories(dir);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  std::ofstream json(dir + "/" + stem + ".json"), csv(dir + "/" + stem + ".csv"), txt(dir + "/" + stem + ".txt");
  if (!json || !csv || !txt) throw Error(ErrorCode::IoFailure, "cannot write tables into " + dir);
  json << arr.dump(2) << '\n';
  csv << render_csv(rows);
  txt << render_text(rows);
}

inline std::vector<MetricsRow> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IoFailure, path + " is not JSON");
  std::vector<MetricsRow> rows;
  if (j.is_array()) {
    for (const auto& r : j) rows.push_back(row_from_json(r));
  } else {
    rows.push_back(row_from_json(j));
  }
  return rows;
}

}  // namespace letspi::pipeline
