#pragma once

// Synthetic highway tracks in the HighD column layout. Four archetypes:
//   free_road        ego alone at constant speed
//   car_following    same-lane leader at matched speed
//   closing_gap      slower leader; the recorded ego future ends just
//                    behind it (a near miss the planner has to avoid)
//   lateral_squeeze  vehicle alongside in the left lane; the recorded ego
//                    future merges next to it
// Every instance is placed on its own stretch of road so instances never
// see each other.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/ingest.hpp"
#include "letspi/scenario.hpp"

namespace letspi::synth {

struct Range {
  double lo{0.0};
  double hi{0.0};
};

struct ArchetypeSpec {
  int count{0};
  Range speed{25.0, 33.0};
  Range gap0{20.0, 20.0};       // closing_gap: initial gap; car_following: headway gap
  Range delta_v{5.0, 5.0};      // closing_gap: ego minus leader speed
  Range final_gap{0.5, 3.0};    // closing_gap: recorded final gap behind the leader
  Range offset{-4.0, 4.0};      // lateral_squeeze: initial dx of the side vehicle
  Range final_dx{-1.5, 1.5};    // lateral_squeeze: recorded final dx to the side vehicle
};

struct Recipe {
  int frames{200};
  int t0_frame{74};       // frame that becomes t=0 for the first window
  double spacing{2000.0};  // metres between instances
  double dt{kHighDTimestep};
  LaneGeometry lanes;
  std::map<std::string, ArchetypeSpec> archetypes;
};

inline const std::vector<std::string>& archetype_names() {
  static const std::vector<std::string> names{"free_road", "car_following", "closing_gap", "lateral_squeeze"};
  return names;
}

/// Three 3.75 m lanes, lane 1 on the right (y in [0, 3.75)).
inline LaneGeometry default_lanes() {
  LaneGeometry g;
  g.lane_width = 3.75;
  g.boundary_lines = {0.0, 11.25};
  g.center_lines = {3.75, 7.5};
  g.lanes = {{1, 0.0, 3.75}, {2, 3.75, 7.5}, {3, 7.5, 11.25}};
  return g;
}

namespace detail {

inline Range range_from(const nlohmann::json& j, const char* key, Range fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (it->is_number()) return {it->get<double>(), it->get<double>()};
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
    throw Error(ErrorCode::RecipeError, std::string("'") + key + "' must be a number or [lo, hi]");
  Range r{(*it)[0].get<double>(), (*it)[1].get<double>()};
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
    throw Error(ErrorCode::RecipeError, std::string("'") + key + "' has lo > hi");
  return r;
}

}  // namespace detail

inline Recipe recipe_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::RecipeError, "recipe must be a JSON object");
  Recipe r;
  try {
    r.frames = j.value("frames", r.frames);
    r.t0_frame = j.value("t0_frame", r.t0_frame);
    r.spacing = j.value("spacing", r.spacing);
    r.dt = j.value("dt", r.dt);
    r.lanes = j.contains("lanes") ? ingest::lanes_from_json(j.at("lanes")) : default_lanes();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::RecipeError, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::RecipeError, e.what());
  }
  if (r.frames < 1 || r.t0_frame < 0 || r.t0_frame >= r.frames || !(r.dt > 0.0) || !(r.spacing > 0.0))
    throw Error(ErrorCode::RecipeError, "frames, t0_frame, dt and spacing must be positive and consistent");
  if (r.lanes.lanes.size() < 2) throw Error(ErrorCode::RecipeError, "recipe needs at least two lanes");

  auto arch = j.find("archetypes");
  if (arch == j.end() || !arch->is_object()) throw Error(ErrorCode::RecipeError, "recipe needs an 'archetypes' object");
  for (const auto& [name, spec] : arch->items()) {
    bool known = false;
    for (const auto& n : archetype_names()) known = known || n == name;
    if (!known) throw Error(ErrorCode::RecipeError, "unknown archetype '" + name + "'");
    if (!spec.is_object()) throw Error(ErrorCode::RecipeError, "archetype '" + name + "' must be an object");
    ArchetypeSpec a;
    auto count = spec.find("count");
    if (count == spec.end() || !count->is_number_integer() || count->get<int>() < 0)
      throw Error(ErrorCode::RecipeError, "archetype '" + name + "' needs a non-negative integer count");
    a.count = count->get<int>();
    a.speed = detail::range_from(spec, "speed", a.speed);
    a.gap0 = detail::range_from(spec, "gap0", name == "car_following" ? Range{30.0, 50.0} : a.gap0);
    a.delta_v = detail::range_from(spec, "delta_v", a.delta_v);
    a.final_gap = detail::range_from(spec, "final_gap", a.final_gap);
    a.offset = detail::range_from(spec, "offset", a.offset);
    a.final_dx = detail::range_from(spec, "final_dx", a.final_dx);
    if (a.speed.lo <= 0.0 || a.speed.hi > kMaxAbsVx) throw Error(ErrorCode::RecipeError, "speed must lie in (0, 70]");
    if (name == "closing_gap" && (a.delta_v.lo <= 0.0 || a.delta_v.hi >= a.speed.lo))
      throw Error(ErrorCode::RecipeError, "closing_gap delta_v must be positive and below the ego speed");
    r.archetypes[name] = a;
  }
  return r;
}

inline Recipe load_recipe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::RecipeError, "cannot open recipe " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::RecipeError, "recipe " + path + " is not JSON");
  return recipe_from_json(j);
}

struct Dataset {
  std::vector<ingest::TrackRow> rows;  // sorted by (vehicle_id, frame)
  LaneGeometry lanes;
  std::vector<int> ego_ids;
  std::map<int, std::string> archetype_of;  // ego id -> archetype
  double dt{kHighDTimestep};
};

namespace detail {

/// Cubic with x(0)=0, x'(0)=v0, x(T)=D, x'(T)=v1; returns position and speed.
inline std::pair<double, double> hermite(double tau, double T, double D, double v0, double v1) {
  const double a2 = (3.0 * D - (2.0 * v0 + v1) * T) / (T * T);
  const double a3 = ((v0 + v1) * T - 2.0 * D) / (T * T * T);
  return {v0 * tau + a2 * tau * tau + a3 * tau * tau * tau, v0 + 2.0 * a2 * tau + 3.0 * a3 * tau * tau};
}

/// 0..1 smoothstep and its derivative over [0, T].
inline std::pair<double, double> smoothstep(double tau, double T) {
  const double u = std::clamp(tau / T, 0.0, 1.0);
  return {u * u * (3.0 - 2.0 * u), (tau <= 0.0 || tau >= T) ? 0.0 : 6.0 * u * (1.0 - u) / T};
}

inline double lane_center(const LaneGeometry& g, int lane_index) {
  const auto& l = g.lanes[static_cast<std::size_t>(lane_index)];
  return 0.5 * (l.y_min + l.y_max);
}

}  // namespace detail

inline Dataset generate(const Recipe& recipe, std::uint64_t seed) {
  Dataset ds;
  ds.lanes = recipe.lanes;
  ds.dt = recipe.dt;
  std::mt19937_64 rng(seed);
  auto draw = [&](Range r) {
    if (r.lo == r.hi) return r.lo;
    std::uniform_real_distribution<double> u(r.lo, r.hi);
    return u(rng);
  };

  const auto& lanes = recipe.lanes;
  const int ego_lane = static_cast<int>(lanes.lanes.size()) / 2;  // middle (or right-of-middle) lane
  const int left_lane = std::min(ego_lane + 1, static_cast<int>(lanes.lanes.size()) - 1);
  const double y_ego = detail::lane_center(lanes, ego_lane);
  const double y_left = detail::lane_center(lanes, left_lane);
  const int horizon = std::max(1, recipe.frames - recipe.t0_frame - 1);
  const double T = std::min(125, horizon) * recipe.dt;  // manoeuvre duration

  auto emit = [&](int id, auto&& state_at) {
    for (int f = 0; f < recipe.frames; ++f) {
      const double t = (f - recipe.t0_frame) * recipe.dt;
      const auto [x, y, vx, vy] = state_at(t);
      ds.rows.push_back({f, id, x, y, vx, vy, lanes.lane_id_at(y, lanes.lanes[static_cast<std::size_t>(ego_lane)].id)});
    }
  };

  int instance = 0;
  for (const auto& name : archetype_names()) {
    auto it = recipe.archetypes.find(name);
    if (it == recipe.archetypes.end()) continue;
    const ArchetypeSpec& a = it->second;
    for (int k = 0; k < a.count; ++k, ++instance) {
      const double base = instance * recipe.spacing;
      const int ego_id = 100 * (instance + 1) + 1;
      const double v = draw(a.speed);
      ds.ego_ids.push_back(ego_id);
      ds.archetype_of[ego_id] = name;

      struct S {
        double x, y, vx, vy;
      };
      if (name == "free_road") {
        emit(ego_id, [&](double t) { return S{base + v * t, y_ego, v, 0.0}; });
      } else if (name == "car_following") {
        const double gap = draw(a.gap0);
        emit(ego_id, [&](double t) { return S{base + v * t, y_ego, v, 0.0}; });
        emit(ego_id + 1, [&](double t) { return S{base + gap + v * t, y_ego, v, 0.0}; });
      } else if (name == "closing_gap") {
        const double gap0 = draw(a.gap0);
        const double dv = draw(a.delta_v);
        const double fg = draw(a.final_gap);
        const double vl = v - dv;
        const double D = gap0 + vl * T - fg;
        emit(ego_id + 1, [&](double t) { return S{base + gap0 + vl * t, y_ego, vl, 0.0}; });
        emit(ego_id, [&](double t) {
          if (t <= 0.0) return S{base + v * t, y_ego, v, 0.0};
          if (t >= T) return S{base + D + vl * (t - T), y_ego, vl, 0.0};
          const auto [x, vx] = detail::hermite(t, T, D, v, vl);
          return S{base + x, y_ego, vx, 0.0};
        });
      } else if (name == "lateral_squeeze") {
        const double dx0 = draw(a.offset);
        const double fdx = draw(a.final_dx);
        const double D = dx0 + v * T + fdx;
        emit(ego_id + 1, [&](double t) { return S{base + dx0 + v * t, y_left, v, 0.0}; });
        emit(ego_id, [&](double t) {
          if (t <= 0.0) return S{base + v * t, y_ego, v, 0.0};
          if (t >= T) return S{base + D + v * (t - T), y_left, v, 0.0};
          const auto [x, vx] = detail::hermite(t, T, D, v, v);
          const auto [u, du] = detail::smoothstep(t, T);
          return S{base + x, y_ego + (y_left - y_ego) * u, vx, (y_left - y_ego) * du};
        });
      }
    }
  }
  std::sort(ds.rows.begin(), ds.rows.end(), [](const ingest::TrackRow& a, const ingest::TrackRow& b) {
    return a.vehicle_id != b.vehicle_id ? a.vehicle_id < b.vehicle_id : a.frame < b.frame;
  });
  return ds;
}

// ---------------------------------------------------------------------------
// Output

inline void write_csv(std::ostream& out, const std::vector<ingest::TrackRow>& rows) {
  out << "frame,id,x,y,xVelocity,yVelocity,laneId\n";
  char buf[192];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.6f,%.6f,%.6f,%.6f,%d\n", static_cast<long long>(r.frame), r.vehicle_id,
                  r.x, r.y, r.vx, r.vy, r.lane_id);
    out << buf;
  }
}

inline nlohmann::json manifest_json(const Dataset& ds) {
  nlohmann::json arch = nlohmann::json::object();
  for (const auto& [id, name] : ds.archetype_of) arch[std::to_string(id)] = name;
  return {{"ego_ids", ds.ego_ids}, {"archetypes", arch}, {"dt", ds.dt}};
}

struct DatasetPaths {
  std::string tracks;
  std::string lanes;
  std::string manifest;
};

inline DatasetPaths dataset_paths(const std::string& dir) {
  return {dir + "/tracks.csv", dir + "/lanes.json", dir + "/manifest.json"};
}

inline DatasetPaths write_dataset(const Dataset& ds, const std::string& dir) {
  const DatasetPaths p = dataset_paths(dir);
  std::ofstream csv(p.tracks), lanes(p.lanes), manifest(p.manifest);
  if (!csv || !lanes || !manifest) throw Error(ErrorCode::IoFailure, "cannot write dataset into " + dir);
  write_csv(csv, ds.rows);
  lanes << ingest::lanes_to_json(ds.lanes).dump(2) << '\n';
  manifest << manifest_json(ds).dump(2) << '\n';
  return p;
}

}  // namespace letspi::synth
