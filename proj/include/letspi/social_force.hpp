#pragma once

// Parameterized social-force dynamics for the ego vehicle plus an IDM
// propagator for neighbor futures.
//
// Ego acceleration (unit mass) = goal attraction + repulsion, where the
// repulsion is the negative gradient of
//
//   U = sum_j  r_col * k_j * exp(-|p - p_j| / r_col)
//     + sum_center k_cline * exp(-d^2)
//     + sum_bound  k_boundary * 0.5 / d^2
//
// and k_j is k_np / k_nf / k_nl depending on where neighbor j sits. Line
// distances d are absolute lateral offsets, so lane terms act only along y.
// Integration is explicit Euler: position advances with the old velocity.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "letspi/error.hpp"
#include "letspi/scenario.hpp"

namespace letspi::sf {

struct SfParams {
  double tau{1.0};
  double k_np{8.0};
  double k_nf{2.0};
  double k_nl{4.0};
  double k_boundary{5.0};
  double k_cline{1.0};
  double r_col{10.0};

  bool operator==(const SfParams&) const = default;
};

inline constexpr double kTauMin = 0.1;
inline constexpr double kTauMax = 5.0;
inline constexpr double kStrengthMax = 100.0;
inline constexpr double kRcolMax = 50.0;

inline bool within_bounds(const SfParams& p) {
  auto k_ok = [](double k) { return std::isfinite(k) && k >= 0.0 && k <= kStrengthMax; };
  return std::isfinite(p.tau) && p.tau >= kTauMin && p.tau <= kTauMax && k_ok(p.k_np) && k_ok(p.k_nf) &&
         k_ok(p.k_nl) && k_ok(p.k_boundary) && k_ok(p.k_cline) && std::isfinite(p.r_col) && p.r_col > 0.0 &&
         p.r_col <= kRcolMax;
}

/// Clamps every field into its legal range. Returns the names of the fields
/// that had to move so callers can log them.
inline std::vector<std::string> clamp_params(SfParams& p) {
  std::vector<std::string> moved;
  auto clamp = [&](double& v, double lo, double hi, const char* name) {
    double c = std::isfinite(v) ? std::clamp(v, lo, hi) : lo;
    if (c != v) {
      moved.emplace_back(name);
      v = c;
    }
  };
  clamp(p.tau, kTauMin, kTauMax, "tau");
  clamp(p.k_np, 0.0, kStrengthMax, "k_np");
  clamp(p.k_nf, 0.0, kStrengthMax, "k_nf");
  clamp(p.k_nl, 0.0, kStrengthMax, "k_nl");
  clamp(p.k_boundary, 0.0, kStrengthMax, "k_boundary");
  clamp(p.k_cline, 0.0, kStrengthMax, "k_cline");
  if (!(p.r_col > 0.0) || !std::isfinite(p.r_col) || p.r_col > kRcolMax) {
    moved.emplace_back("r_col");
    p.r_col = std::isfinite(p.r_col) && p.r_col > kRcolMax ? kRcolMax : SfParams{}.r_col;
  }
  return moved;
}

struct EngineConfig {
  double lateral_window{10.0};  // |dx| below this counts as side-by-side
  double accel_clamp{12.0};     // m/s^2, applied before each Euler step
};

// ---------------------------------------------------------------------------
// Goal attraction

inline constexpr double kDegenerateGoalDistance = 1e-9;

/// (v_des - v) / tau with v_des pointing at the goal and sized so the goal
/// is reached exactly at the end of the horizon. Returns zero when the
/// vehicle already sits on the goal.
inline Vec2 goal_attraction(Vec2 position, Vec2 velocity, Vec2 goal, int t_index, int total_frames, double dt,
                            double tau) {
  if (t_index < 0 || t_index >= total_frames)
    throw Error(ErrorCode::Precondition, "goal_attraction: t_index outside [0, total_frames)");
  if (!(dt > 0.0) || !(tau > 0.0)) throw Error(ErrorCode::Precondition, "goal_attraction: dt and tau must be > 0");
  const Vec2 to_goal = goal - position;
  const double dist = to_goal.norm();
  if (dist < kDegenerateGoalDistance) return {};
  const double v0 = dist / (static_cast<double>(total_frames - t_index) * dt);
  const Vec2 desired = to_goal * (v0 / dist);
  return (desired - velocity) / tau;
}

// ---------------------------------------------------------------------------
// Repulsion

enum class NeighborClass { Preceding, Following, Lateral };

inline NeighborClass classify_neighbor(const VehicleState& ego, const VehicleState& nb, double lateral_window) {
  const double dx = nb.x - ego.x;
  if (std::abs(dx) < lateral_window) return NeighborClass::Lateral;
  return dx > 0.0 ? NeighborClass::Preceding : NeighborClass::Following;
}

inline double strength_for(NeighborClass c, const SfParams& p) {
  switch (c) {
    case NeighborClass::Preceding: return p.k_np;
    case NeighborClass::Following: return p.k_nf;
    case NeighborClass::Lateral: return p.k_nl;
  }
  return 0.0;
}

inline constexpr double kCoincidentDistance = 1e-6;

/// Total repulsive potential at the ego position. Exposed for diagnostics
/// and plots; the dynamics use the analytic gradient below.
inline double repulsive_potential(const VehicleState& ego, std::span<const VehicleState> neighbors,
                                  const LaneGeometry& lanes, const SfParams& params, const EngineConfig& cfg = {}) {
  double u = 0.0;
  for (const auto& nb : neighbors) {
    const double dist = (ego.position() - nb.position()).norm();
    const double k = strength_for(classify_neighbor(ego, nb, cfg.lateral_window), params);
    u += params.r_col * k * std::exp(-dist / params.r_col);
  }
  for (double line : lanes.center_lines) {
    const double d = std::abs(ego.y - line);
    u += params.k_cline * std::exp(-d * d);
  }
  for (double line : lanes.boundary_lines) {
    const double d = std::abs(ego.y - line);
    u += params.k_boundary * 0.5 / (d * d);
  }
  return u;
}

/// Force from vehicle j alone: k * exp(-|r|/r_col) along r = p_ego - p_j.
inline Vec2 vehicle_repulsion(const VehicleState& ego, const VehicleState& nb, const SfParams& params,
                              const EngineConfig& cfg = {}) {
  const Vec2 r = ego.position() - nb.position();
  const double dist = r.norm();
  if (dist < kCoincidentDistance)
    throw Error(ErrorCode::CoincidentVehicles,
                "ego and neighbor closer than 1e-6 m at t=" + std::to_string(ego.t));
  const double k = strength_for(classify_neighbor(ego, nb, cfg.lateral_window), params);
  return r * (k * std::exp(-dist / params.r_col) / dist);
}

/// Lateral force from all lane markings (x component is always zero).
inline Vec2 lane_repulsion(double ego_y, const LaneGeometry& lanes, const SfParams& params) {
  double fy = 0.0;
  for (double line : lanes.center_lines) {
    const double dy = ego_y - line;
    fy += 2.0 * params.k_cline * dy * std::exp(-dy * dy);
  }
  for (double line : lanes.boundary_lines) {
    const double dy = ego_y - line;
    const double d = std::abs(dy);
    fy += params.k_boundary * (dy > 0.0 ? 1.0 : -1.0) / (d * d * d);
  }
  return {0.0, fy};
}

/// -grad U at the ego position. The ego must lie strictly inside the road.
inline Vec2 repulsion_total(const VehicleState& ego, std::span<const VehicleState> neighbors,
                            const LaneGeometry& lanes, const SfParams& params, const EngineConfig& cfg = {}) {
  if (lanes.boundary_lines.size() >= 2 && !lanes.inside(ego.y))
    throw Error(ErrorCode::Precondition, "repulsion_total: ego outside road boundaries");
  Vec2 force{};
  for (const auto& nb : neighbors) force += vehicle_repulsion(ego, nb, params, cfg);
  force += lane_repulsion(ego.y, lanes, params);
  return force;
}

// ---------------------------------------------------------------------------
// Integration

struct Kinematics {
  Vec2 position;
  Vec2 velocity;
};

inline Kinematics step(Vec2 position, Vec2 velocity, Vec2 acceleration, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::Precondition, "step: dt must be > 0");
  return {position + velocity * dt, velocity + acceleration * dt};
}

inline Vec2 clamp_magnitude(Vec2 a, double limit) {
  const double n = a.norm();
  return n > limit ? a * (limit / n) : a;
}

/// Distance kept between the ego and a boundary line when evaluating lane
/// terms for an ego that has already left the road (keeps the force pointing
/// back inside instead of flipping sign).
inline constexpr double kBoundaryProjection = 0.05;

namespace detail {

inline double lane_term_y(double y, const LaneGeometry& lanes) {
  if (lanes.boundary_lines.size() < 2) return y;
  const double lo = lanes.y_lower() + kBoundaryProjection;
  const double hi = lanes.y_upper() - kBoundaryProjection;
  return std::clamp(y, lo, hi);
}

}  // namespace detail

/// Rolls the ego forward `goal.horizon_frames` steps. Neighbor j sits at its
/// t=0 history sample for the first force evaluation and at
/// neighbor_futures[j][i-1] for step i.
inline Trajectory rollout(const Scenario& s, const SfParams& params, const Goal& goal,
                          const TrajectoryMap& neighbor_futures, const EngineConfig& cfg = {}) {
  const int frames = goal.horizon_frames;
  Trajectory out;
  out.source = TrajectorySource::SocialForce;
  if (frames <= 0) return out;
  if (s.ego_history.empty()) throw Error(ErrorCode::Precondition, "rollout: empty ego history");
  for (const auto& [id, hist] : s.neighbors) {
    auto it = neighbor_futures.find(id);
    if (it == neighbor_futures.end() || it->second.size() < static_cast<std::size_t>(frames))
      throw Error(ErrorCode::Precondition, "rollout: neighbor " + std::to_string(id) + " future too short");
  }

  out.states.reserve(static_cast<std::size_t>(frames));
  VehicleState ego = s.ego_now();
  std::vector<VehicleState> around;
  around.reserve(s.neighbors.size());

  for (int i = 0; i < frames; ++i) {
    around.clear();
    for (const auto& [id, hist] : s.neighbors) {
      around.push_back(i == 0 ? hist.back() : neighbor_futures.at(id).states[static_cast<std::size_t>(i - 1)]);
    }
    Vec2 accel = goal_attraction(ego.position(), ego.velocity(), goal.position(), i, frames, s.dt, params.tau);
    for (const auto& nb : around) accel += vehicle_repulsion(ego, nb, params, cfg);
    accel += lane_repulsion(detail::lane_term_y(ego.y, s.lanes), s.lanes, params);
    accel = clamp_magnitude(accel, cfg.accel_clamp);

    const auto next = step(ego.position(), ego.velocity(), accel, s.dt);
    VehicleState st;
    st.t = s.ego_now().t + static_cast<double>(i + 1) * s.dt;
    st.x = next.position.x;
    st.y = next.position.y;
    st.vx = next.velocity.x;
    st.vy = next.velocity.y;
    st.lane_id = s.lanes.lane_id_at(st.y, ego.lane_id);
    out.states.push_back(st);
    ego = st;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intelligent Driver Model (longitudinal only)

struct IdmParams {
  double v_desired{30.0};
  double s0_min_gap{2.0};
  double t_headway{1.5};
  double a_max{1.5};
  double b_comfort{2.0};
};

struct IdmConfig {
  IdmParams base;
  // Use each vehicle's own t=0 speed as its desired speed (vehicles keep
  // their pace unless constrained by a leader).
  bool track_current_speed{true};
};

inline constexpr double kIdmEmergencyDecel = 9.0;  // m/s^2 on non-positive gap

struct IdmAccel {
  double a{0.0};
  bool non_positive_gap{false};
};

/// Standard IDM acceleration. `gap` is the center-to-center distance to the
/// leader, `dv` = v - v_leader; no leader means the free-road term only.
inline IdmAccel idm_acceleration(double v, std::optional<double> gap, double dv, const IdmParams& p) {
  const double free = 1.0 - std::pow(v / p.v_desired, 4.0);
  if (!gap) return {p.a_max * free, false};
  if (*gap <= 0.0) return {-kIdmEmergencyDecel, true};
  const double s_star = p.s0_min_gap + v * p.t_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comfort));
  const double ratio = s_star / *gap;
  return {p.a_max * (free - ratio * ratio), false};
}

struct LeaderTrack {
  VehicleState now;  // leader at t=0
  Trajectory future;
};

struct IdmRollout {
  Trajectory trajectory;
  std::vector<int> flagged_frames;  // frames where the gap was non-positive
};

inline IdmRollout idm_rollout(const History& history, const LeaderTrack* leader, const IdmParams& params, int frames,
                              double dt) {
  if (frames < 0) throw Error(ErrorCode::Precondition, "idm_rollout: negative horizon");
  if (history.empty()) throw Error(ErrorCode::Precondition, "idm_rollout: empty history");
  if (leader && leader->future.size() < static_cast<std::size_t>(frames))
    throw Error(ErrorCode::Precondition, "idm_rollout: leader future too short");
  IdmRollout out;
  out.trajectory.source = TrajectorySource::Idm;
  out.trajectory.states.reserve(static_cast<std::size_t>(std::max(frames, 0)));

  VehicleState cur = history.back();
  double x = cur.x;
  double v = std::max(0.0, cur.vx);
  for (int i = 0; i < frames; ++i) {
    std::optional<double> gap;
    double dv = 0.0;
    if (leader) {
      const VehicleState& l = i == 0 ? leader->now : leader->future.states[static_cast<std::size_t>(i - 1)];
      gap = l.x - x;
      dv = v - l.vx;
    }
    const IdmAccel acc = idm_acceleration(v, gap, dv, params);
    if (acc.non_positive_gap) out.flagged_frames.push_back(i);
    const double x_next = x + dt * v;
    const double v_next = std::max(0.0, v + dt * acc.a);
    VehicleState st = cur;
    st.t = history.back().t + static_cast<double>(i + 1) * dt;
    st.x = x_next;
    st.vx = v_next;
    st.vy = 0.0;
    out.trajectory.states.push_back(st);
    x = x_next;
    v = v_next;
  }
  return out;
}

inline IdmParams idm_params_for(const VehicleState& now, const IdmConfig& cfg) {
  IdmParams p = cfg.base;
  if (cfg.track_current_speed && now.vx > 0.5) p.v_desired = now.vx;
  return p;
}

/// IDM futures for every neighbor. Vehicles are processed front to back per
/// lane so each one follows the already-predicted vehicle ahead of it.
inline TrajectoryMap predict_neighbor_futures(const Scenario& s, int frames, const IdmConfig& cfg = {}) {
  std::vector<std::pair<int, const History*>> order;
  for (const auto& [id, hist] : s.neighbors) order.emplace_back(id, &hist);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second->back().x != b.second->back().x) return a.second->back().x > b.second->back().x;
    return a.first < b.first;
  });

  TrajectoryMap futures;
  for (const auto& [id, hist] : order) {
    const VehicleState& now = hist->back();
    std::optional<LeaderTrack> leader;
    double best_gap = 0.0;
    for (const auto& [other_id, other_hist] : order) {
      if (other_id == id) continue;
      const VehicleState& o = other_hist->back();
      const double gap = o.x - now.x;
      if (o.lane_id != now.lane_id || gap <= 0.0) continue;
      auto fut = futures.find(other_id);
      if (fut == futures.end()) continue;
      if (!leader || gap < best_gap) {
        leader = LeaderTrack{o, fut->second};
        best_gap = gap;
      }
    }
    auto result = idm_rollout(*hist, leader ? &*leader : nullptr, idm_params_for(now, cfg), frames, s.dt);
    futures.emplace(id, std::move(result.trajectory));
  }
  return futures;
}

/// IDM plan for the ego itself (baseline planner): follows the nearest
/// same-lane neighbor ahead using the supplied neighbor futures.
inline IdmRollout idm_plan_ego(const Scenario& s, const TrajectoryMap& neighbor_futures, int frames,
                               const IdmConfig& cfg = {}) {
  const VehicleState& ego = s.ego_now();
  std::optional<LeaderTrack> leader;
  double best_gap = 0.0;
  for (const auto& [id, hist] : s.neighbors) {
    const VehicleState& o = hist.back();
    const double gap = o.x - ego.x;
    if (o.lane_id != ego.lane_id || gap <= 0.0) continue;
    auto fut = neighbor_futures.find(id);
    if (fut == neighbor_futures.end()) continue;
    if (!leader || gap < best_gap) {
      leader = LeaderTrack{o, fut->second};
      best_gap = gap;
    }
  }
  return idm_rollout(s.ego_history, leader ? &*leader : nullptr, idm_params_for(ego, cfg), frames, s.dt);
}

}  // namespace letspi::sf
