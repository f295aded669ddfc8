#pragma once

// Shared domain types for the planning pipeline.
//
// Frame convention (used everywhere in the library): straight-road local
// frame, x grows in the direction of travel, y grows toward the LEFT of
// travel. A positive lane factor (shift right) therefore decreases y.
// Vehicles are points; all distances are center-to-center.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace letspi {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline constexpr double kHighDTimestep = 0.04;      // 25 Hz
inline constexpr double kMaxAbsVx = 70.0;           // m/s
inline constexpr double kMaxAbsVy = 15.0;           // m/s
inline constexpr double kNeighborRadius = 100.0;    // m, Euclidean at t=0
inline constexpr std::size_t kMaxNeighbors = 8;
inline constexpr double kPlausibleAccel = 12.0;     // m/s^2

struct VehicleState {
  double t{0.0};
  double x{0.0};
  double y{0.0};
  double vx{0.0};
  double vy{0.0};
  int lane_id{0};

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return {vx, vy}; }
  bool operator==(const VehicleState&) const = default;
};

struct LaneSpan {
  int id{0};
  double y_min{0.0};
  double y_max{0.0};
};

struct LaneGeometry {
  std::vector<double> boundary_lines;  // non-crossable (road edges)
  std::vector<double> center_lines;    // crossable lane markings
  double lane_width{3.75};
  std::vector<LaneSpan> lanes;         // sorted by y_min

  double y_lower() const {
    return boundary_lines.empty() ? 0.0 : *std::min_element(boundary_lines.begin(), boundary_lines.end());
  }
  double y_upper() const {
    return boundary_lines.empty() ? 0.0 : *std::max_element(boundary_lines.begin(), boundary_lines.end());
  }
  bool inside(double y) const { return y > y_lower() && y < y_upper(); }

  std::optional<LaneSpan> lane_at(double y) const {
    for (const auto& lane : lanes) {
      if (y >= lane.y_min && y < lane.y_max) return lane;
    }
    return std::nullopt;
  }

  int lane_id_at(double y, int fallback = 0) const {
    auto lane = lane_at(y);
    return lane ? lane->id : fallback;
  }

  /// Lane immediately to the right (smaller y) or left (larger y) of `y`.
  std::optional<LaneSpan> adjacent(double y, bool to_right) const {
    auto here = lane_at(y);
    if (!here) return std::nullopt;
    std::optional<LaneSpan> best;
    for (const auto& lane : lanes) {
      if (to_right && lane.y_max <= here->y_min + 1e-9) {
        if (!best || lane.y_max > best->y_max) best = lane;
      } else if (!to_right && lane.y_min >= here->y_max - 1e-9) {
        if (!best || lane.y_min < best->y_min) best = lane;
      }
    }
    return best;
  }
};

struct Goal {
  double x{0.0};
  double y{0.0};
  int horizon_frames{0};

  Vec2 position() const { return {x, y}; }
  bool operator==(const Goal&) const = default;
};

using History = std::vector<VehicleState>;

struct Scenario {
  std::string scenario_id;
  History ego_history;                   // h+1 samples, last one at t=0
  std::map<int, History> neighbors;      // same time base as ego_history
  LaneGeometry lanes;
  Goal goal;
  double dt{kHighDTimestep};

  // Dataset future frames, when the source provided them. Used for
  // evaluation against observed neighbor motion and for plot overlays.
  History ego_future;
  std::map<int, History> neighbor_futures;

  const VehicleState& ego_now() const { return ego_history.back(); }
};

enum class TrajectorySource { SocialForce, Idm, GroundTruth };

struct Trajectory {
  std::vector<VehicleState> states;
  TrajectorySource source{TrajectorySource::SocialForce};

  bool empty() const { return states.empty(); }
  std::size_t size() const { return states.size(); }
  const VehicleState& operator[](std::size_t i) const { return states[i]; }
  const VehicleState& back() const { return states.back(); }
};

using TrajectoryMap = std::map<int, Trajectory>;

struct Violation {
  std::string path;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline bool finite_state(const VehicleState& s) {
  return std::isfinite(s.t) && std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.vx) &&
         std::isfinite(s.vy);
}

inline void check_state(const VehicleState& s, const std::string& path, std::vector<Violation>& out) {
  if (!finite_state(s)) {
    out.push_back({path, "non-finite value"});
    return;
  }
  if (std::abs(s.vx) > kMaxAbsVx) out.push_back({path + ".vx", "longitudinal speed above 70 m/s"});
  if (std::abs(s.vy) > kMaxAbsVy) out.push_back({path + ".vy", "lateral speed above 15 m/s"});
}

}  // namespace detail

/// Checks every Scenario invariant and reports each violation with a field
/// path. Pure; never throws.
inline ValidationResult validate_scenario(const Scenario& s) {
  ValidationResult result;
  auto& out = result.violations;
  constexpr double kTimeTol = 1e-6;

  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) out.push_back({"dt", "timestep must be positive"});

  const auto& lanes = s.lanes;
  if (lanes.boundary_lines.size() < 2) {
    out.push_back({"lanes.boundary_lines", "fewer than two boundary lines"});
  } else {
    for (std::size_t i = 0; i < lanes.center_lines.size(); ++i) {
      const double c = lanes.center_lines[i];
      if (!(c > lanes.y_lower() && c < lanes.y_upper()))
        out.push_back({"lanes.center_lines[" + std::to_string(i) + "]", "center line outside boundaries"});
    }
  }
  if (!(lanes.lane_width > 0.0)) out.push_back({"lanes.lane_width", "lane width must be positive"});

  if (s.ego_history.empty()) {
    out.push_back({"ego_history", "empty history"});
    return result;
  }

  for (std::size_t i = 0; i < s.ego_history.size(); ++i)
    detail::check_state(s.ego_history[i], "ego_history[" + std::to_string(i) + "]", out);

  if (std::abs(s.ego_history.back().t) > kTimeTol) out.push_back({"ego_history", "history does not end at t=0"});
  for (std::size_t i = 0; i < s.ego_history.size(); ++i) {
    if (s.ego_history[i].t > kTimeTol) {
      out.push_back({"ego_history[" + std::to_string(i) + "].t", "history sample after t=0"});
      break;
    }
  }
  if (s.dt > 0.0) {
    for (std::size_t i = 1; i < s.ego_history.size(); ++i) {
      if (std::abs(s.ego_history[i].t - s.ego_history[i - 1].t - s.dt) > kTimeTol) {
        out.push_back({"ego_history[" + std::to_string(i) + "].t", "non-uniform timestamps"});
        break;
      }
    }
  }

  if (s.neighbors.size() > kMaxNeighbors) out.push_back({"neighbors", "more than 8 neighbors"});

  const VehicleState& ego0 = s.ego_history.back();
  for (const auto& [id, hist] : s.neighbors) {
    const std::string path = "neighbors[" + std::to_string(id) + "]";
    if (hist.size() != s.ego_history.size()) {
      out.push_back({path, "history length differs from ego"});
      continue;
    }
    for (std::size_t i = 0; i < hist.size(); ++i) {
      detail::check_state(hist[i], path + "[" + std::to_string(i) + "]", out);
      if (std::abs(hist[i].t - s.ego_history[i].t) > kTimeTol) {
        out.push_back({path + "[" + std::to_string(i) + "].t", "non-uniform timestamps"});
        break;
      }
    }
    const double d = (hist.back().position() - ego0.position()).norm();
    if (!(d <= kNeighborRadius)) out.push_back({path, "neighbor beyond 100 m"});
  }

  if (!std::isfinite(s.goal.x) || !std::isfinite(s.goal.y)) {
    out.push_back({"goal", "non-finite goal"});
  } else if (lanes.boundary_lines.size() >= 2 && !lanes.inside(s.goal.y)) {
    out.push_back({"goal.y", "goal outside road boundaries"});
  }
  if (s.goal.horizon_frames < 0) out.push_back({"goal.horizon_frames", "negative horizon"});

  return result;
}

/// True when every consecutive velocity change (starting from `start`)
/// implies an acceleration magnitude at most `limit`.
inline bool accelerations_plausible(const VehicleState& start, const Trajectory& traj, double dt,
                                    double limit = kPlausibleAccel) {
  if (!(dt > 0.0)) return false;
  Vec2 prev = start.velocity();
  for (const auto& s : traj.states) {
    const double a = ((s.velocity() - prev) / dt).norm();
    if (a > limit * (1.0 + 1e-9)) return false;
    prev = s.velocity();
  }
  return true;
}

}  // namespace letspi
