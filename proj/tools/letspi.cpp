// letspi command-line driver.
//
//   letspi synth --recipe R --seed S --out DIR
//   letspi ingest --config C [--out scenarios.jsonl]
//   letspi memory-collect --config C
//   letspi fast-infer --config C
//   letspi baseline --config C
//   letspi ablate --config C
//   letspi plot --config C [--scenario ID]
//   letspi report --input a.json [--input b.json ...] [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 3 dataset error,
// 4 backend unavailable, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "letspi/config.hpp"
#include "letspi/error.hpp"
#include "letspi/ingest.hpp"
#include "letspi/pipeline.hpp"
#include "letspi/plots.hpp"
#include "letspi/synth.hpp"

namespace fs = std::filesystem;
using namespace letspi;

namespace {

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::RecipeError:
    case ErrorCode::Precondition: return 2;
    case ErrorCode::DatasetError:
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumericCell:
    case ErrorCode::DuplicateKey:
    case ErrorCode::NTooLarge: return 3;
    case ErrorCode::LlmUnavailable:
    case ErrorCode::TransportFailure:
    case ErrorCode::Timeout:
    case ErrorCode::BackendRefusal:
    case ErrorCode::ScriptExhausted: return 4;
    default: return 1;
  }
}

struct Overrides {
  std::string config;
  std::optional<int> workers;
  std::optional<int> budget;
  std::optional<std::string> memory;
  std::optional<std::string> out;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> seed;
  bool no_goal_adjustment{false};
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "TOML config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", o.workers, "scenario worker threads");
  cmd->add_option("--budget", o.budget, "model calls per scenario in the reflection loop");
  cmd->add_option("--memory", o.memory, "memory.jsonl path");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--backend", o.backend, "scripted | mock | http | stdio (both phases)");
  cmd->add_option("--seed", o.seed, "sampling seed for [data]");
  cmd->add_flag("--no-goal-adjustment", o.no_goal_adjustment, "ignore goal adjustments");
}

config::AppConfig load_config(const Overrides& o) {
  auto c = config::load(o.config);
  if (o.workers) c.run.workers = *o.workers;
  if (o.budget) c.run.budget = *o.budget;
  if (o.memory) c.memory.path = *o.memory;
  if (o.out) c.run.output_dir = *o.out;
  if (o.backend) c.llm_memory.kind = c.llm_fast.kind = *o.backend;
  if (o.seed) c.data.seed = *o.seed;
  if (o.no_goal_adjustment) c.run.goal_adjustment = false;
  if (c.run.workers < 1 || c.run.budget < 1) throw Error(ErrorCode::ConfigError, "workers and budget must be >= 1");
  c.llm_memory = llm::apply_env(c.llm_memory, false);
  c.llm_fast = llm::apply_env(c.llm_fast, true);
  return c;
}

std::vector<Scenario> load_data(const config::DataConfig& d, const config::AppConfig& c) {
  auto s = pipeline::load_dataset(d, c.window);
  spdlog::info("loaded {} scenarios", s.size());
  return s;
}

void print_rows(const std::vector<pipeline::MetricsRow>& rows) { std::cout << pipeline::render_text(rows); }

void log_clamps(const std::vector<pipeline::ScenarioResult>& results) {
  std::size_t failures = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) {
      ++failures;
      spdlog::debug("{}: {}", r.scenario_id, r.error);
    }
  }
  if (failures) spdlog::info("{} scenarios reported problems (see results.jsonl)", failures);
}

int cmd_synth(const std::string& recipe, std::uint64_t seed, const std::string& out) {
  const auto r = synth::load_recipe(recipe);
  const auto ds = synth::generate(r, seed);
  fs::create_directories(out);
  const auto paths = synth::write_dataset(ds, out);
  spdlog::info("wrote {} rows for {} instances to {}", ds.rows.size(), ds.ego_ids.size(), paths.tracks);
  return 0;
}

int cmd_ingest(const Overrides& o, const std::string& out_file) {
  const auto c = load_config(o);
  const auto& d = c.data;
  std::size_t short_tracks = 0, invalid = 0;
  std::vector<Scenario> scenarios;
  if (!d.scenarios.empty()) {
    scenarios = ingest::read_scenarios(d.scenarios);
  } else {
    const auto schema = d.schema.empty() ? ingest::ColumnSchema{} : ingest::load_schema(d.schema);
    const auto rows = ingest::load_tracks(d.tracks, schema);
    ingest::SegmentOptions opt;
    opt.goal_mode = d.goal_mode;
    opt.neighbor_full_window = d.neighbor_full_window;
    if (!d.manifest.empty()) {
      std::ifstream in(d.manifest);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.contains("ego_ids")) throw Error(ErrorCode::DatasetError, "bad manifest " + d.manifest);
      opt.ego_ids = j.at("ego_ids").get<std::set<int>>();
      opt.dt = j.value("dt", opt.dt);
    }
    auto seg = ingest::segment_windows(rows, c.window, ingest::load_lanes(d.lanes), opt);
    short_tracks = seg.short_tracks;
    invalid = seg.invalid_windows;
    scenarios = std::move(seg.scenarios);
    spdlog::info("{} rows -> {} windows ({} short tracks skipped, {} invalid windows dropped)", rows.size(),
                 scenarios.size(), short_tracks, invalid);
  }
  if (d.sample > 0) scenarios = ingest::sample_scenarios(scenarios, d.sample, d.seed);
  const std::string path = out_file.empty() ? c.run.output_dir + "/scenarios.jsonl" : out_file;
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  ingest::write_scenarios(path, scenarios);
  std::cout << scenarios.size() << " scenarios written to " << path << "\n";
  return 0;
}

int cmd_memory_collect(const Overrides& o, bool append) {
  const auto c = load_config(o);
  if (c.memory.path.empty()) throw Error(ErrorCode::ConfigError, "[memory] path is required");
  const auto scenarios = load_data(c.data, c);
  if (!append && fs::exists(c.memory.path)) fs::remove(c.memory.path);
  if (const auto parent = fs::path(c.memory.path).parent_path(); !parent.empty()) fs::create_directories(parent);
  memory::StoreOptions so;
  so.capacity = c.memory.capacity;
  so.min_ttc = c.thresholds.reflect_ttc;
  so.min_distance = c.thresholds.reflect_distance;
  auto bank = memory::MemoryBank::open(c.memory.path, so);
  auto backend = pipeline::make_backend(c.llm_memory);
  const auto res = pipeline::run_memory_phase(scenarios, *backend, bank, pipeline::settings_from(c, c.llm_memory));
  log_clamps(res.results);
  const std::string dir = c.run.output_dir + "/memory_collect";
  pipeline::write_tables(dir, "metrics", {res.row});
  pipeline::write_results(dir + "/results.jsonl", res.results);
  spdlog::info("accepted {}, rejected {}; memory now holds {} records", res.accepted, res.rejected, bank.size());
  print_rows({res.row});
  return 0;
}

int cmd_fast_infer(const Overrides& o) {
  const auto c = load_config(o);
  if (c.memory.path.empty() || !fs::exists(c.memory.path))
    throw Error(ErrorCode::ConfigError, "fast inference needs an existing memory file (it may be empty)");
  const auto scenarios = load_data(c.data, c);
  const auto bank = memory::MemoryBank::open(c.memory.path).prefix(c.memory.fraction);
  auto backend = pipeline::make_backend(c.llm_fast);
  const auto res = pipeline::run_fast_phase(scenarios, *backend, bank, pipeline::settings_from(c, c.llm_fast));
  log_clamps(res.results);
  const std::string dir = c.run.output_dir + "/fast_infer";
  pipeline::write_tables(dir, "metrics", {res.row});
  pipeline::write_results(dir + "/results.jsonl", res.results);
  print_rows({res.row});
  return 0;
}

int cmd_baseline(const Overrides& o) {
  const auto c = load_config(o);
  const auto scenarios = load_data(c.data, c);
  const auto res = pipeline::run_baselines(scenarios, pipeline::settings_from(c, c.llm_fast), c.sf);
  const std::string dir = c.run.output_dir + "/baseline";
  pipeline::write_tables(dir, "metrics", {res.sf_row, res.idm_row});
  pipeline::write_results(dir + "/results_sf.jsonl", res.sf_results);
  pipeline::write_results(dir + "/results_idm.jsonl", res.idm_results);
  print_rows({res.sf_row, res.idm_row});
  return 0;
}

int cmd_ablate(const Overrides& o) {
  const auto c = load_config(o);
  if (!c.train) throw Error(ErrorCode::ConfigError, "ablation needs a [data.train] section");
  const auto train = load_data(*c.train, c);
  const auto test = load_data(c.data, c);
  auto mem_backend = pipeline::make_backend(c.llm_memory);
  auto fast_backend = pipeline::make_backend(c.llm_fast);
  const auto res = pipeline::run_ablation(train, test, *mem_backend, *fast_backend,
                                          pipeline::settings_from(c, c.llm_fast), c.run.memory_sweep);
  const std::string dir = c.run.output_dir + "/ablate";
  pipeline::write_tables(dir, "variants", res.variants);
  pipeline::write_tables(dir, "memory_sweep", res.memory_sweep);
  std::cout << "Ablation (memory collected on " << train.size() << " scenarios, " << res.base_memory_size
            << " records kept):\n";
  print_rows(res.variants);
  std::cout << "\nMemory size sweep:\n";
  print_rows(res.memory_sweep);
  return 0;
}

int cmd_plot(const Overrides& o, const std::string& scenario_id, int limit) {
  const auto c = load_config(o);
  const auto scenarios = load_data(c.data, c);
  auto backend = pipeline::make_backend(c.llm_memory);
  ReflectionConfig rc;
  rc.budget = c.run.budget;
  rc.goal_adjustment = c.run.goal_adjustment;
  rc.thresholds = c.thresholds;
  rc.engine = c.engine;
  rc.idm = c.idm;
  rc.llm = pipeline::complete_options(c.llm_memory);
  int done = 0;
  for (const auto& s : scenarios) {
    if (!scenario_id.empty() && s.scenario_id != scenario_id) continue;
    if (scenario_id.empty() && done >= limit) break;
    const auto rr = reflect_loop(s, *backend, rc);
    const Attempt* a = rr.final_attempt();
    if (!a) throw Error(ErrorCode::LlmUnavailable, "no plan for " + s.scenario_id + ": " + rr.reason);
    plots::PlotInput in;
    in.scenario = &s;
    in.planned = a->plan.trajectory;
    in.neighbor_futures = make_context(s, c.idm).evaluation_futures;
    for (const auto& att : rr.attempts)
      if (att.analysis) in.report_text += render_report_text(*att.analysis);
    in.report_text += std::string(rr.accepted() ? "Accepted" : "Rejected") + " after " +
                      std::to_string(rr.iterations()) + " iteration(s)\n";
    const auto files = plots::emit_plots(in, c.run.output_dir + "/plots/" + s.scenario_id);
    std::cout << files.trajectory_svg << "\n" << files.timespace_svg << "\n";
    ++done;
  }
  if (done == 0) throw Error(ErrorCode::DatasetError, "no matching scenario");
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<pipeline::MetricsRow> rows;
  for (const auto& p : inputs)
    for (auto& r : pipeline::read_table(p)) rows.push_back(std::move(r));
  if (!out.empty()) pipeline::write_tables(out, "report", rows);
  std::cout << pipeline::render_csv(rows) << "\n" << pipeline::render_text(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LetsPi trajectory planning toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  std::string recipe, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic track dataset");
  synth->add_option("--recipe", recipe, "recipe JSON")->required();
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  Overrides o_ingest, o_mem, o_fast, o_base, o_abl, o_plot;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "segment tracks into scenarios.jsonl");
  add_common(ingest, o_ingest);
  ingest->add_option("--scenarios-out", ingest_out, "output file");

  bool append = false;
  auto* mem = app.add_subcommand("memory-collect", "reflection loop over the dataset, filling memory");
  add_common(mem, o_mem);
  mem->add_flag("--append", append, "keep existing memory records");

  auto* fast = app.add_subcommand("fast-infer", "one-call inference with retrieved examples");
  add_common(fast, o_fast);

  auto* base = app.add_subcommand("baseline", "fixed-parameter SF and IDM baselines");
  add_common(base, o_base);

  auto* abl = app.add_subcommand("ablate", "Base, w/o Ref, w/o GA, FS and the memory-size sweep");
  add_common(abl, o_abl);

  std::string plot_id;
  int plot_limit = 1;
  auto* plot = app.add_subcommand("plot", "trajectory and time-space diagrams");
  add_common(plot, o_plot);
  plot->add_option("--scenario", plot_id, "scenario id (default: the first --limit scenarios)");
  plot->add_option("--limit", plot_limit, "number of scenarios when no id is given");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "merge metrics tables into CSV and text");
  report->add_option("--input", report_inputs, "metrics JSON file(s)")->required();
  report->add_option("--out", report_out, "directory for report.{json,csv,txt}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*synth) return cmd_synth(recipe, synth_seed, synth_out);
    if (*ingest) return cmd_ingest(o_ingest, ingest_out);
    if (*mem) return cmd_memory_collect(o_mem, append);
    if (*fast) return cmd_fast_infer(o_fast);
    if (*base) return cmd_baseline(o_base);
    if (*abl) return cmd_ablate(o_abl);
    if (*plot) return cmd_plot(o_plot, plot_id, plot_limit);
    if (*report) return cmd_report(report_inputs, report_out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
