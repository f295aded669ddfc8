// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. No network, no model weights: the LLM is the
// scripted planner throughout.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "letspi/config.hpp"
#include "letspi/ingest.hpp"
#include "letspi/pipeline.hpp"
#include "letspi/synth.hpp"

using namespace letspi;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass{false};
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%s  %2d  %-32s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

LaneGeometry lanes3() { return synth::default_lanes(); }

std::vector<Scenario> synthetic(const std::string& recipe, std::uint64_t seed) {
  const auto ds = synth::generate(synth::load_recipe(LETSPI_SOURCE_DIR "/data/recipes/" + recipe), seed);
  ingest::SegmentOptions opt;
  opt.dt = ds.dt;
  opt.ego_ids = std::set<int>(ds.ego_ids.begin(), ds.ego_ids.end());
  auto s = ingest::segment_windows(ds.rows, ingest::WindowSpec{}, ds.lanes, opt).scenarios;
  std::sort(s.begin(), s.end(), [](const Scenario& a, const Scenario& b) { return a.scenario_id < b.scenario_id; });
  return s;
}

pipeline::PhaseSettings settings() {
  const auto c = config::load(LETSPI_SOURCE_DIR "/data/configs/synthetic.toml");
  return pipeline::settings_from(c, c.llm_fast);
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle

double potential(double x, double y, const std::vector<VehicleState>& nbs, const LaneGeometry& lanes,
                 const sf::SfParams& p, double window) {
  double u = 0.0;
  for (const auto& n : nbs) {
    const double dx = n.x - x;
    const double k = std::abs(dx) < window ? p.k_nl : (dx > 0 ? p.k_np : p.k_nf);
    u += p.r_col * k * std::exp(-std::hypot(x - n.x, y - n.y) / p.r_col);
  }
  for (double c : lanes.center_lines) u += p.k_cline * std::exp(-(y - c) * (y - c));
  for (double b : lanes.boundary_lines) u += p.k_boundary * 0.5 / ((y - b) * (y - b));
  return u;
}

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ux(-60, 60), uy(0.5, 10.75), uk(0.0, 30.0), ur(2.0, 30.0);
  const sf::EngineConfig cfg;
  const auto lanes = lanes3();
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    VehicleState ego;
    ego.x = ux(rng);
    ego.y = uy(rng);
    std::vector<VehicleState> nbs;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int j = 0; j < n; ++j) {
      VehicleState nb;
      nb.x = ego.x + ux(rng);
      nb.y = uy(rng);
      if (std::abs(std::abs(nb.x - ego.x) - cfg.lateral_window) < 1e-3) nb.x += 0.01;
      nbs.push_back(nb);
    }
    const sf::SfParams p{1.0, uk(rng), uk(rng), uk(rng), uk(rng), uk(rng), ur(rng)};
    const Vec2 f = sf::repulsion_total(ego, nbs, lanes, p, cfg);
    const double gx = -(potential(ego.x + h, ego.y, nbs, lanes, p, cfg.lateral_window) -
                        potential(ego.x - h, ego.y, nbs, lanes, p, cfg.lateral_window)) / (2 * h);
    const double gy = -(potential(ego.x, ego.y + h, nbs, lanes, p, cfg.lateral_window) -
                        potential(ego.x, ego.y - h, nbs, lanes, p, cfg.lateral_window)) / (2 * h);
    const double rel = std::hypot(f.x - gx, f.y - gy) / std::max(std::hypot(gx, gy), 1e-12);
    worst = std::max(worst, rel);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 5.0, fmt("max relative error %.2e over 200 samples (<= 1e-4), %.3f s (< 5 s)", worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. Euler semantics

Outcome euler_semantics() {
  const double dt = 0.04;
  const auto k = sf::step({0, 0}, {0, 0}, {2, 0}, dt);
  bool ok = k.position.x == 0.0 && k.position.y == 0.0 && k.velocity.x == 2.0 * dt && k.velocity.y == 0.0;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-100, 100);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p{u(rng), u(rng)}, v{u(rng), u(rng)}, a{u(rng), u(rng)};
    const auto s = sf::step(p, v, a, dt);
    if (s.position.x != p.x + v.x * dt || s.position.y != p.y + v.y * dt || s.velocity.x != v.x + a.x * dt ||
        s.velocity.y != v.y + a.y * dt)
      ++mismatches;
  }
  ok = ok && mismatches == 0;
  return {ok, fmt("example -> p=(%.0f,%.0f) v=(%.2f,0); %.0f/1000 random mismatches", k.position.x, k.position.y,
                  k.velocity.x, mismatches)};
}

// ---------------------------------------------------------------------------
// 3. Free-road convergence

Outcome free_road_convergence() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> ug(50.0, 200.0), uv(0.8, 1.2);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double g = ug(rng);
    const double v = g / 5.0 * uv(rng);
    Scenario s;
    s.scenario_id = "free";
    s.lanes = lanes3();
    for (int k = -74; k <= 0; ++k) s.ego_history.push_back({k * 0.04, v * k * 0.04, 5.625, v, 0.0, 2});
    s.goal = {g, 5.625, 125};
    const auto traj = sf::rollout(s, sf::SfParams{}, s.goal, {});
    worst = std::max(worst, std::abs(traj.states.back().x - g));
  }
  return {worst < 0.5, fmt("worst final longitudinal error %.3f m over 100 goals (< 0.5 m)", worst)};
}

// ---------------------------------------------------------------------------
// 4. Metric oracles

Trajectory line(double x0, double y0, double vx, double vy, int n, double dt = 0.04) {
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    const double tt = (i + 1) * dt;
    t.states.push_back({tt, x0 + vx * tt, y0 + vy * tt, vx, vy, 0});
  }
  return t;
}

// Cell-major PET: for every cell in the joint bounding box, clip every
// segment of each path against it independently.
double pet_oracle(const Trajectory& ego, const Trajectory& nb, double cell) {
  const Vec2 o = ego.states.front().position();
  auto first_time = [&](const Trajectory& tr, double x0, double y0) {
    double best = safety::kInf;
    const Vec2 p0{tr.states[0].x - o.x, tr.states[0].y - o.y};
    if (std::floor(p0.x / cell) * cell == x0 && std::floor(p0.y / cell) * cell == y0) best = tr.states[0].t;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      const Vec2 a{tr.states[i - 1].x - o.x, tr.states[i - 1].y - o.y};
      const Vec2 b{tr.states[i].x - o.x, tr.states[i].y - o.y};
      double lo = 0.0, hi = 1.0;
      bool hit = true;
      const double d[2] = {b.x - a.x, b.y - a.y}, p[2] = {a.x, a.y}, l[2] = {x0, y0}, h[2] = {x0 + cell, y0 + cell};
      for (int k = 0; k < 2 && hit; ++k) {
        if (d[k] == 0.0) {
          hit = p[k] >= l[k] && p[k] <= h[k];
          continue;
        }
        double t0 = (l[k] - p[k]) / d[k], t1 = (h[k] - p[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
        hit = lo <= hi;
      }
      if (hit) best = std::min(best, tr.states[i - 1].t + lo * (tr.states[i].t - tr.states[i - 1].t));
    }
    return best;
  };
  double xmin = 1e18, xmax = -1e18, ymin = 1e18, ymax = -1e18;
  for (const auto* tr : {&ego, &nb})
    for (const auto& s : tr->states) {
      xmin = std::min(xmin, s.x - o.x);
      xmax = std::max(xmax, s.x - o.x);
      ymin = std::min(ymin, s.y - o.y);
      ymax = std::max(ymax, s.y - o.y);
    }
  double best = safety::kInf;
  for (auto ix = static_cast<long>(std::floor(xmin / cell)); ix <= static_cast<long>(std::floor(xmax / cell)); ++ix)
    for (auto iy = static_cast<long>(std::floor(ymin / cell)); iy <= static_cast<long>(std::floor(ymax / cell)); ++iy) {
      const double te = first_time(ego, static_cast<double>(ix) * cell, static_cast<double>(iy) * cell);
      const double tn = first_time(nb, static_cast<double>(ix) * cell, static_cast<double>(iy) * cell);
      if (std::isfinite(te) && std::isfinite(tn)) best = std::min(best, std::abs(te - tn));
    }
  return best;
}

Outcome metric_oracles() {
  const auto lanes = lanes3();
  std::string detail;
  VehicleState e{0, 0, 5.625, 25.0, 0, 2}, n{0, 20.0, 5.625, 20.0, 0, 2};
  const double ttc = safety::ttc_at(e, {{1, n}}, lanes).ttc;
  bool ok = ttc == 4.0;
  detail += fmt("TTC %.6f s", ttc);

  const double p = safety::pet(line(0, 0, 20, 0, 200), {{1, line(50, -80, 0, 20, 200)}});
  ok = ok && std::abs(p - 1.5) <= 0.04;
  detail += fmt(", PET %.4f s", p);

  const auto md = safety::min_distance(line(0, 2.0, 22, 0, 100), {{1, line(0, 7.0, 22, 0, 100)}});
  ok = ok && md.distance == 5.0;
  detail += fmt(", constant-gap MinD %.4f m", md.distance);

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ux(-30, 30), uy(0.5, 10.75), uv(15, 30), uvy(-1, 1);
  int mismatches = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto ego = line(0, uy(rng), uv(rng), uvy(rng) * 0.3, 25);
    TrajectoryMap nbs;
    for (int j = 0; j < 3; ++j) nbs[j] = line(ux(rng), uy(rng), uv(rng), uvy(rng), 25);
    const auto r = safety::evaluate(ego, nbs, lanes, Goal{0, 5.625, 25});
    double bt = safety::kInf, bd = safety::kInf, bp = safety::kInf;
    for (std::size_t i = 0; i < ego.size(); ++i) {
      const auto& es = ego.states[i];
      double gap = safety::kInf, t = safety::kInf;
      for (const auto& [id, tr] : nbs) {
        const auto& ns = tr.states[i];
        bd = std::min(bd, std::hypot(es.x - ns.x, es.y - ns.y));
        if (lanes.lane_id_at(ns.y) != lanes.lane_id_at(es.y)) continue;
        const double g = ns.x - es.x;
        if (g > 0 && g < gap) {
          gap = g;
          t = es.vx > ns.vx ? g / (es.vx - ns.vx) : safety::kInf;
        }
      }
      bt = std::min(bt, t);
    }
    for (const auto& [id, tr] : nbs) bp = std::min(bp, pet_oracle(ego, tr, 0.5));
    if (r.min_ttc != bt || r.min_distance != bd || r.pet != bp) ++mismatches;
  }
  ok = ok && mismatches == 0;
  detail += fmt(", brute-force mismatches %.0f/10", mismatches);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 5. Retrieval

Outcome retrieval() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto features = [&] {
    memory::FeatureVector f;
    f.num_vehicles = 1.0 + static_cast<double>(rng() % 6);
    f.ego_speed0 = 20.0 + static_cast<double>(rng() % 5) * 2.0;
    f.lane_change = rng() % 3 == 0;
    f.min_nb_dist = 5.0 + static_cast<double>(rng() % 8) * 5.0;
    f.avg_nb_dist = f.min_nb_dist + u(rng) * 20.0;
    f.avg_nb_speed = 15.0 + static_cast<double>(rng() % 10);
    return f;
  };
  int bad_rank = 0, bad_self = 0;
  for (int store = 0; store < 100; ++store) {
    memory::StoreOptions opts;
    auto tick = std::make_shared<std::int64_t>(1'600'000'000'000'000);
    opts.clock = [tick] { return std::chrono::system_clock::time_point(std::chrono::microseconds((*tick) += 1)); };
    memory::MemoryBank bank(opts);
    const std::size_t n = 1 + rng() % 1000;
    for (std::size_t i = 0; i < n; ++i) {
      memory::MemoryRecord r;
      r.scenario_id = "r" + std::to_string(rng() % 100);
      r.features = features();
      r.safety = {4.0, 8.0, 2.0, false};
      bank.insert(r);
    }
    const auto recs = bank.records();
    const auto q = features();
    const std::size_t k = 1 + rng() % 20;
    std::vector<std::size_t> order(recs.size());
    std::vector<double> sim(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      order[i] = i;
      sim[i] = 1.0 / (1.0 + memory::feature_distance(q, recs[i].features));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (sim[a] != sim[b]) return sim[a] > sim[b];
      if (recs[a].created_at != recs[b].created_at) return recs[a].created_at > recs[b].created_at;
      return recs[a].scenario_id < recs[b].scenario_id;
    });
    const auto got = bank.top_k(q, k);
    if (got.size() != std::min(k, n)) ++bad_rank;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i].record.created_at != recs[order[i]].created_at || got[i].similarity != sim[order[i]]) {
        ++bad_rank;
        break;
      }
    for (const auto& r : recs)
      if (memory::similarity(r.features, r.features) != 1.0) ++bad_self;
  }
  const auto f = features();
  const double literal = memory::feature_distance(f, f, {}, memory::DistanceMode::PaperLiteral);
  const bool ok = bad_rank == 0 && bad_self == 0 && literal == 11.0;
  return {ok, fmt("ranking mismatches %.0f/100 stores, self-similarity misses %.0f, PaperLiteral D(x,x) = %.4f (11.0)",
                  bad_rank, bad_self, literal)};
}

// ---------------------------------------------------------------------------
// 6. Goal adjustment

Outcome goal_adjustment() {
  const auto lanes = lanes3();
  VehicleState ego{0, 100.0, 5.625, 25, 0, 2};
  const Goal g{250.0, 5.625, 125};
  const double far = apply_goal_adjustment(g, ego, {0.0, 0.0}, lanes).goal.x - ego.x;
  const double near = apply_goal_adjustment(g, ego, {1.0, 0.0}, lanes).goal.x - ego.x;
  bool ok = far == 150.0 * 1.2 && near == 150.0 * 0.7;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> ua(-0.5, 1.5), ul(-2, 2), uy(0.1, 11.15), ux(10, 300);
  int out_of_road = 0;
  for (int i = 0; i < 1000; ++i) {
    VehicleState e{0, 0, uy(rng), 25, 0, 2};
    const Goal gg{ux(rng), uy(rng), 125};
    if (!lanes.inside(apply_goal_adjustment(gg, e, {ua(rng), ul(rng)}, lanes).goal.y)) ++out_of_road;
  }
  ok = ok && out_of_road == 0;
  return {ok, fmt("alpha=0 range x%.4f, alpha=1 range x%.4f, %.0f/1000 adjusted goals off-road", far / 150.0,
                  near / 150.0, out_of_road)};
}

// ---------------------------------------------------------------------------
// 7 and 8. Reflection efficacy and memory-size trend

struct AblationRun {
  pipeline::AblationResult result;
  double seconds{0.0};
};

const AblationRun& ablation() {
  static const AblationRun run = [] {
    const auto t0 = Clock::now();
    const auto train = synthetic("train.json", 11);
    const auto test = synthetic("hazard.json", 23);
    llm::ScriptedPlanner memory_llm, fast_llm;
    AblationRun r;
    r.result = pipeline::run_ablation(train, test, memory_llm, fast_llm, settings(), {0.0, 0.1, 0.5, 1.0});
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome reflection_efficacy() {
  const auto& run = ablation();
  const auto& v = run.result.variants;  // Base, w/o Ref, w/o GA, FS
  const auto& base = v[0];
  const auto& no_ref = v[1];
  const auto& fs0 = v[3];
  const bool ok = base.scenarios == 50 && base.cr < no_ref.cr && base.cr < fs0.cr && base.ttc_mean > no_ref.ttc_mean &&
                  base.ttc_mean > fs0.ttc_mean && run.seconds < 60.0;
  std::string d = fmt("CR Base %.1f%% vs w/o Ref %.1f%% / FS %.1f%%", base.cr, no_ref.cr, fs0.cr);
  d += fmt("; TTC Base %.2f s vs %.2f / %.2f s; %.1f s total (< 60 s)", base.ttc_mean, no_ref.ttc_mean, fs0.ttc_mean,
           run.seconds);
  return {ok, d};
}

Outcome memory_trend() {
  const auto& sweep = ablation().result.memory_sweep;
  const auto& lo = sweep.front();
  const auto& hi = sweep.back();
  const bool ok = sweep.size() == 4 && hi.ttc_mean > lo.ttc_mean && hi.cr < lo.cr;
  std::string d = fmt("0%%: TTC %.2f s, CR %.1f%%; 100%%: TTC %.2f s, CR %.1f%%", lo.ttc_mean, lo.cr, hi.ttc_mean, hi.cr);
  d += fmt(" (10%%: %.1f%%, 50%%: %.1f%%)", sweep[1].cr, sweep[2].cr);
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 9. Fast-prompt budget

Outcome prompt_budget() {
  memory::MemoryBank bank;
  llm::ScriptedPlanner sp;
  const auto ps = settings();
  auto train = synthetic("train.json", 11);
  pipeline::run_memory_phase(train, sp, bank, ps);
  auto all = synthetic("hazard.json", 23);
  all.insert(all.end(), train.begin(), train.end());
  double worst = 0.0;
  int over = 0;
  for (const auto& s : all) {
    const auto analogs = bank.top_k(memory::extract_features(s), ps.k);
    const double ratio = static_cast<double>(llm::build_fast_prompt(s, analogs).token_estimate) /
                         static_cast<double>(llm::build_physics_prompt(s).token_estimate);
    worst = std::max(worst, ratio);
    if (ratio > 0.6) ++over;
  }
  return {over == 0, fmt("worst fast/physics token ratio %.3f over %.0f scenarios (<= 0.6)", worst,
                         static_cast<double>(all.size()))};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string memory_without_timestamps(const std::string& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("created_at");
    out += j.dump() + "\n";
  }
  return out;
}

Outcome determinism() {
  const fs::path dir = fs::path(LETSPI_TEST_TMP);
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string tables[2], memories[2];
  for (int run = 0; run < 2; ++run) {
    const auto path = (dir / ("memory_" + std::to_string(run) + ".jsonl")).string();
    auto bank = memory::MemoryBank::open(path);
    llm::ScriptedPlanner mem_llm, fast_llm;
    auto ps = settings();
    const auto mem = pipeline::run_memory_phase(synthetic("train.json", 11), mem_llm, bank, ps);
    const auto fast = pipeline::run_fast_phase(synthetic("hazard.json", 23), fast_llm, bank, ps);
    tables[run] = pipeline::render_csv({mem.row, fast.row}, false);
    memories[run] = memory_without_timestamps(path);
  }
  const bool ok = tables[0] == tables[1] && memories[0] == memories[1] && !memories[0].empty();
  std::string d = tables[0] == tables[1] ? "metrics tables identical" : "metrics tables differ";
  d += memories[0] == memories[1] ? ", memory files identical" : ", memory files differ";
  d += fmt(" (%.0f bytes of memory)", static_cast<double>(memories[0].size()));
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 11. Windowing

Outcome windowing() {
  auto count_for = [](int frames) {
    synth::Recipe r;
    r.frames = frames;
    r.t0_frame = std::min(74, frames - 1);
    r.lanes = synth::default_lanes();
    synth::ArchetypeSpec a;
    a.count = 1;
    r.archetypes["free_road"] = a;
    const auto ds = synth::generate(r, 1);
    return ingest::segment_windows(ds.rows, ingest::WindowSpec{}, ds.lanes).scenarios.size();
  };
  const auto n400 = count_for(400);
  const auto n199 = count_for(199);
  const bool ok = n400 == 11 && n199 == 0 && ingest::window_count(400, {}) == 11 && ingest::window_count(199, {}) == 0;
  return {ok, fmt("400 frames -> %.0f windows (11), 199 frames -> %.0f windows (0)", static_cast<double>(n400),
                  static_cast<double>(n199))};
}

}  // namespace

int main() {
  report(1, "gradient oracle", gradient_oracle);
  report(2, "Euler semantics", euler_semantics);
  report(3, "free-road convergence", free_road_convergence);
  report(4, "metric oracles", metric_oracles);
  report(5, "retrieval", retrieval);
  report(6, "goal adjustment endpoints", goal_adjustment);
  report(7, "reflection efficacy", reflection_efficacy);
  report(8, "memory-size trend", memory_trend);
  report(9, "fast-prompt budget", prompt_budget);
  report(10, "pipeline determinism", determinism);
  report(11, "windowing arithmetic", windowing);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
