#pragma once

// Surrogate safety measures over a planned ego trajectory: time to
// collision against the same-lane leader, minimum center distance,
// post-encroachment time on a grid, plus the operational success check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/scenario.hpp"

namespace letspi::safety {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Thresholds {
  // Reflection loop triggers.
  double reflect_ttc{1.5};
  double reflect_distance{2.0};
  // Evaluation table cutoffs (low-TTC rate, collision rate).
  double eval_ttc{2.0};
  double collision_distance{2.0};
  // PET grid.
  double pet_dx{0.5};
  double pet_dy{0.5};
  // Success-rate tolerances: metres longitudinally, lane widths laterally.
  double goal_tol_x{10.0};
  double goal_tol_lanes{1.0};
  double accel_limit{kPlausibleAccel};
};

struct TtcSample {
  int frame{0};
  double ttc{kInf};
  int leader_id{-1};
  double gap{kInf};
};

/// TTC of `ego` against the nearest same-lane vehicle ahead of it.
/// `others` are (id, state) pairs at the same instant.
inline TtcSample ttc_at(const VehicleState& ego, const std::vector<std::pair<int, VehicleState>>& others,
                        const LaneGeometry& lanes) {
  TtcSample out;
  const int ego_lane = lanes.lane_id_at(ego.y, ego.lane_id);
  for (const auto& [id, nb] : others) {
    if (lanes.lane_id_at(nb.y, nb.lane_id) != ego_lane) continue;
    const double gap = nb.x - ego.x;
    if (gap <= 0.0) continue;
    if (gap < out.gap || (gap == out.gap && id < out.leader_id)) {
      out.gap = gap;
      out.leader_id = id;
      const double closing = ego.vx - nb.vx;
      out.ttc = closing > 0.0 ? gap / closing : kInf;
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::pair<int, VehicleState>> states_at(const TrajectoryMap& neighbors, std::size_t frame) {
  std::vector<std::pair<int, VehicleState>> out;
  out.reserve(neighbors.size());
  for (const auto& [id, traj] : neighbors) {
    if (frame < traj.size()) out.emplace_back(id, traj.states[frame]);
  }
  return out;
}

}  // namespace detail

inline std::vector<TtcSample> ttc_series(const Trajectory& ego, const TrajectoryMap& neighbors,
                                         const LaneGeometry& lanes) {
  std::vector<TtcSample> out;
  out.reserve(ego.size());
  for (std::size_t i = 0; i < ego.size(); ++i) {
    TtcSample s = ttc_at(ego.states[i], detail::states_at(neighbors, i), lanes);
    s.frame = static_cast<int>(i);
    out.push_back(s);
  }
  return out;
}

struct MinDistance {
  double distance{kInf};
  int frame{-1};
  int neighbor_id{-1};
};

inline MinDistance min_distance(const Trajectory& ego, const TrajectoryMap& neighbors) {
  MinDistance best;
  for (std::size_t i = 0; i < ego.size(); ++i) {
    for (const auto& [id, traj] : neighbors) {
      if (i >= traj.size()) continue;
      const double d = (ego.states[i].position() - traj.states[i].position()).norm();
      if (d < best.distance) best = {d, static_cast<int>(i), id};
    }
  }
  return best;
}

struct Cell {
  double dx{0.5};
  double dy{0.5};
};

namespace detail {

struct CellKey {
  std::int64_t ix;
  std::int64_t iy;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return std::hash<std::int64_t>{}(k.ix * 73856093LL) ^ std::hash<std::int64_t>{}(k.iy * 19349663LL);
  }
};

using OccupancyMap = std::unordered_map<CellKey, double, CellKeyHash>;

// Entry parameter u in [0, 1] of segment a + u (b - a) into the axis-aligned
// box [x0, x1] x [y0, y1], or nullopt when they do not touch.
inline std::optional<double> segment_entry(Vec2 a, Vec2 b, double x0, double x1, double y0, double y1) {
  double u_lo = 0.0;
  double u_hi = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double p[2] = {a.x, a.y};
  const double lo[2] = {x0, y0};
  const double hi[2] = {x1, y1};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (p[k] < lo[k] || p[k] > hi[k]) return std::nullopt;
      continue;
    }
    double t0 = (lo[k] - p[k]) / d[k];
    double t1 = (hi[k] - p[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    u_lo = std::max(u_lo, t0);
    u_hi = std::min(u_hi, t1);
    if (u_lo > u_hi) return std::nullopt;
  }
  return u_lo;
}

inline void mark(OccupancyMap& occ, CellKey key, double t) {
  auto [it, inserted] = occ.try_emplace(key, t);
  if (!inserted && t < it->second) it->second = t;
}

// First occupancy time of every grid cell swept by the polyline. The grid is
// anchored at `origin` so the result does not depend on the world offset.
inline OccupancyMap rasterize(const Trajectory& traj, Vec2 origin, const Cell& cell) {
  OccupancyMap occ;
  auto local = [&](const VehicleState& s) { return Vec2{s.x - origin.x, s.y - origin.y}; };
  auto key_of = [&](Vec2 p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x / cell.dx)),
                   static_cast<std::int64_t>(std::floor(p.y / cell.dy))};
  };
  if (traj.empty()) return occ;
  mark(occ, key_of(local(traj.states.front())), traj.states.front().t);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const Vec2 a = local(traj.states[i - 1]);
    const Vec2 b = local(traj.states[i]);
    const double ta = traj.states[i - 1].t;
    const double tb = traj.states[i].t;
    const CellKey ka = key_of(a);
    const CellKey kb = key_of(b);
    for (std::int64_t ix = std::min(ka.ix, kb.ix); ix <= std::max(ka.ix, kb.ix); ++ix) {
      for (std::int64_t iy = std::min(ka.iy, kb.iy); iy <= std::max(ka.iy, kb.iy); ++iy) {
        const double x0 = static_cast<double>(ix) * cell.dx;
        const double y0 = static_cast<double>(iy) * cell.dy;
        auto u = segment_entry(a, b, x0, x0 + cell.dx, y0, y0 + cell.dy);
        if (u) mark(occ, {ix, iy}, ta + *u * (tb - ta));
      }
    }
  }
  return occ;
}

}  // namespace detail

/// Post-encroachment time: smallest gap between the ego's and a neighbor's
/// first occupancy of any shared grid cell. +inf when paths never share one.
inline double pet(const Trajectory& ego, const TrajectoryMap& neighbors, const Cell& cell = {}) {
  if (!(cell.dx > 0.0) || !(cell.dy > 0.0)) throw Error(ErrorCode::Precondition, "pet: cell size must be > 0");
  if (ego.empty()) return kInf;
  const Vec2 origin = ego.states.front().position();
  const auto ego_occ = detail::rasterize(ego, origin, cell);
  double best = kInf;
  for (const auto& [id, traj] : neighbors) {
    const auto nb_occ = detail::rasterize(traj, origin, cell);
    for (const auto& [key, t_nb] : nb_occ) {
      auto it = ego_occ.find(key);
      if (it != ego_occ.end()) best = std::min(best, std::abs(it->second - t_nb));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Aggregate report

enum class ViolationKind { FrontTTC, Proximity, BoundaryExit };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::FrontTTC: return "FrontTTC";
    case ViolationKind::Proximity: return "Proximity";
    case ViolationKind::BoundaryExit: return "BoundaryExit";
  }
  return "?";
}

struct SafetyViolation {
  int frame{0};
  ViolationKind kind{ViolationKind::FrontTTC};
  int neighbor_id{-1};
  double value{0.0};
  int lane_id{0};
  bool operator==(const SafetyViolation&) const = default;
};

struct SafetyReport {
  double min_ttc{kInf};
  int min_ttc_frame{-1};
  double min_distance{kInf};
  int min_distance_frame{-1};
  int min_distance_neighbor{-1};
  double pet{kInf};
  bool collided{false};
  bool low_ttc{false};
  bool reached_goal{false};
  bool plausible{false};
  bool in_road{false};
  bool success{false};
  std::vector<SafetyViolation> violations;  // against reflection thresholds

  bool passes_reflection() const { return violations.empty(); }
};

/// Aggregates every measure. Violations keep the worst frame of each
/// (kind, neighbor) episode so the analysis report stays short.
inline SafetyReport evaluate(const Trajectory& ego, const TrajectoryMap& neighbors, const LaneGeometry& lanes,
                             const Goal& goal, const Thresholds& th = {},
                             std::optional<VehicleState> ego_start = std::nullopt, double dt = kHighDTimestep) {
  SafetyReport r;

  std::map<int, SafetyViolation> worst_ttc;
  for (const auto& s : ttc_series(ego, neighbors, lanes)) {
    if (s.ttc < r.min_ttc) {
      r.min_ttc = s.ttc;
      r.min_ttc_frame = s.frame;
    }
    if (s.ttc < th.reflect_ttc) {
      auto it = worst_ttc.find(s.leader_id);
      if (it == worst_ttc.end() || s.ttc < it->second.value) {
        const int lane = lanes.lane_id_at(ego.states[static_cast<std::size_t>(s.frame)].y,
                                          ego.states[static_cast<std::size_t>(s.frame)].lane_id);
        worst_ttc[s.leader_id] = {s.frame, ViolationKind::FrontTTC, s.leader_id, s.ttc, lane};
      }
    }
  }

  std::map<int, SafetyViolation> worst_prox;
  for (std::size_t i = 0; i < ego.size(); ++i) {
    for (const auto& [id, traj] : neighbors) {
      if (i >= traj.size()) continue;
      const double d = (ego.states[i].position() - traj.states[i].position()).norm();
      if (d < th.reflect_distance) {
        auto it = worst_prox.find(id);
        if (it == worst_prox.end() || d < it->second.value) {
          worst_prox[id] = {static_cast<int>(i), ViolationKind::Proximity, id, d,
                            lanes.lane_id_at(ego.states[i].y, ego.states[i].lane_id)};
        }
      }
    }
  }
  const MinDistance md = min_distance(ego, neighbors);
  r.min_distance = md.distance;
  r.min_distance_frame = md.frame;
  r.min_distance_neighbor = md.neighbor_id;
  r.pet = pet(ego, neighbors, {th.pet_dx, th.pet_dy});

  r.in_road = true;
  for (std::size_t i = 0; i < ego.size(); ++i) {
    if (lanes.boundary_lines.size() >= 2 && !lanes.inside(ego.states[i].y)) {
      r.in_road = false;
      r.violations.push_back({static_cast<int>(i), ViolationKind::BoundaryExit, -1, ego.states[i].y,
                              ego.states[i].lane_id});
      break;
    }
  }
  for (const auto& [id, v] : worst_ttc) r.violations.push_back(v);
  for (const auto& [id, v] : worst_prox) r.violations.push_back(v);
  std::stable_sort(r.violations.begin(), r.violations.end(),
                   [](const SafetyViolation& a, const SafetyViolation& b) { return a.frame < b.frame; });

  r.collided = r.min_distance < th.collision_distance;
  r.low_ttc = r.min_ttc < th.eval_ttc;

  if (!ego.empty()) {
    const VehicleState& last = ego.back();
    r.reached_goal = std::abs(last.x - goal.x) <= th.goal_tol_x &&
                     std::abs(last.y - goal.y) <= th.goal_tol_lanes * lanes.lane_width;
    const VehicleState start = ego_start ? *ego_start : ego.states.front();
    r.plausible = accelerations_plausible(start, ego, dt, th.accel_limit);
  }
  r.success = r.reached_goal && r.plausible && r.in_road;
  return r;
}

// ---------------------------------------------------------------------------
// JSON (+inf is written as null)

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_or_inf(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

inline nlohmann::json to_json(const SafetyViolation& v) {
  return {{"frame", v.frame},
          {"kind", to_string(v.kind)},
          {"neighbor_id", v.neighbor_id},
          {"value", finite_or_null(v.value)},
          {"lane_id", v.lane_id}};
}

inline nlohmann::json to_json(const SafetyReport& r) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : r.violations) violations.push_back(to_json(v));
  return {{"min_ttc", finite_or_null(r.min_ttc)},
          {"min_distance", finite_or_null(r.min_distance)},
          {"pet", finite_or_null(r.pet)},
          {"collided", r.collided},
          {"low_ttc", r.low_ttc},
          {"success", r.success},
          {"violations", violations}};
}

}  // namespace letspi::safety
