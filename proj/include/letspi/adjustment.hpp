#pragma once

// Goal adjustment and the safety analysis report that drives refinement.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/safety.hpp"
#include "letspi/scenario.hpp"

namespace letspi {

namespace text {

/// Fixed-precision number rendering used by every prompt and report so the
/// output never depends on locale or stream state.
inline std::string num(double v, int precision = 2) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_of("123456789") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string signed_num(double v, int precision = 2) {
  std::string s = num(v, precision);
  return (s[0] == '-' || s == "inf") ? s : "+" + s;
}

}  // namespace text

struct GoalAdjustment {
  double longitudinal_factor{0.4};  // 0 = extend range x1.2, 1 = shorten x0.7
  double lane_factor{0.0};          // -1 = one lane left, +1 = one lane right

  bool operator==(const GoalAdjustment&) const = default;
};

/// Leaves the goal where it is (scale exactly 1, no lateral shift).
inline constexpr GoalAdjustment kNeutralAdjustment{0.4, 0.0};

inline GoalAdjustment clamped(GoalAdjustment a) {
  a.longitudinal_factor = std::isfinite(a.longitudinal_factor) ? std::clamp(a.longitudinal_factor, 0.0, 1.0)
                                                               : kNeutralAdjustment.longitudinal_factor;
  a.lane_factor = std::isfinite(a.lane_factor) ? std::clamp(a.lane_factor, -1.0, 1.0) : 0.0;
  return a;
}

/// Linear map between the two stated endpoints: 0 -> 1.2, 1 -> 0.7.
inline double longitudinal_scale(double factor) { return 1.2 - 0.5 * factor; }

struct AdjustedGoal {
  Goal goal;
  Goal original;
  bool no_adjacent_lane{false};  // lateral shift requested toward a missing lane
};

/// Applies `adj` relative to the ORIGINAL goal (never cumulatively). The
/// lateral result is kept at least half a lane inside the road, or at the
/// original y when that is already closer to the edge.
inline AdjustedGoal apply_goal_adjustment(const Goal& goal, const VehicleState& ego0, GoalAdjustment adj,
                                          const LaneGeometry& lanes) {
  adj = clamped(adj);
  AdjustedGoal out{goal, goal, false};
  const double range = goal.x - ego0.x;
  out.goal.x = ego0.x + range * longitudinal_scale(adj.longitudinal_factor);

  if (adj.lane_factor != 0.0) {
    const bool to_right = adj.lane_factor > 0.0;
    if (std::abs(adj.lane_factor) > 0.5 && !lanes.adjacent(goal.y, to_right)) out.no_adjacent_lane = true;
    double y = goal.y - adj.lane_factor * lanes.lane_width;
    if (lanes.boundary_lines.size() >= 2) {
      const double margin = 0.5 * lanes.lane_width;
      const double lo = std::min(lanes.y_lower() + margin, goal.y);
      const double hi = std::max(lanes.y_upper() - margin, goal.y);
      y = std::clamp(y, lo, hi);
    }
    out.goal.y = y;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collision categorisation and the analysis report

enum class CollisionCategory { None, Front, Rear, Side };

inline const char* to_string(CollisionCategory c) {
  switch (c) {
    case CollisionCategory::None: return "None";
    case CollisionCategory::Front: return "Front";
    case CollisionCategory::Rear: return "Rear";
    case CollisionCategory::Side: return "Side";
  }
  return "?";
}

namespace detail {

inline double severity(const safety::SafetyViolation& v, const safety::Thresholds& th) {
  switch (v.kind) {
    case safety::ViolationKind::FrontTTC: return v.value / th.reflect_ttc;
    case safety::ViolationKind::Proximity: return v.value / th.reflect_distance;
    case safety::ViolationKind::BoundaryExit: return 1.0;
  }
  return 1.0;
}

}  // namespace detail

/// Index of the most severe neighbor violation (smallest value relative to
/// its threshold); boundary exits only win when nothing else is present.
inline int worst_violation(const std::vector<safety::SafetyViolation>& violations, const safety::Thresholds& th) {
  int best = -1;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    const auto& v = violations[i];
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& b = violations[static_cast<std::size_t>(best)];
    const bool v_nb = v.kind != safety::ViolationKind::BoundaryExit;
    const bool b_nb = b.kind != safety::ViolationKind::BoundaryExit;
    if (v_nb != b_nb) {
      if (v_nb) best = static_cast<int>(i);
      continue;
    }
    if (detail::severity(v, th) < detail::severity(b, th)) best = static_cast<int>(i);
  }
  return best;
}

inline CollisionCategory bearing_category(Vec2 relative) {
  if (std::abs(relative.x) >= std::abs(relative.y)) {
    return relative.x > 0.0 ? CollisionCategory::Front : CollisionCategory::Rear;
  }
  return CollisionCategory::Side;
}

inline CollisionCategory categorize_collision(const safety::SafetyReport& report, const Trajectory& ego,
                                              const TrajectoryMap& neighbors, const safety::Thresholds& th = {}) {
  const int idx = worst_violation(report.violations, th);
  if (idx < 0) return CollisionCategory::None;
  const auto& v = report.violations[static_cast<std::size_t>(idx)];
  if (v.kind == safety::ViolationKind::BoundaryExit) return CollisionCategory::Side;
  auto it = neighbors.find(v.neighbor_id);
  const auto frame = static_cast<std::size_t>(v.frame);
  if (it == neighbors.end() || frame >= it->second.size() || frame >= ego.size()) {
    return v.kind == safety::ViolationKind::FrontTTC ? CollisionCategory::Front : CollisionCategory::Side;
  }
  const auto& n = it->second.states[frame];
  const auto& e = ego.states[frame];
  const Vec2 rel = n.position() - e.position();
  // Coincident: fall back to the side the neighbor closed in from.
  if (std::hypot(rel.x, rel.y) < 1e-9) return bearing_category(Vec2{e.vx - n.vx, e.vy - n.vy});
  return bearing_category(rel);
}

struct SafetyAnalysisReport {
  std::string scenario_id;
  int iteration{0};
  std::vector<safety::SafetyViolation> violations;
  CollisionCategory collision_category{CollisionCategory::None};
  double min_ttc{safety::kInf};
  double min_distance{safety::kInf};
  double pet{safety::kInf};
  std::vector<std::string> narrative;
};

inline SafetyAnalysisReport build_analysis_report(const std::string& scenario_id, int iteration,
                                                  const safety::SafetyReport& report, const Trajectory& ego,
                                                  const TrajectoryMap& neighbors, double dt,
                                                  const safety::Thresholds& th = {}) {
  SafetyAnalysisReport out;
  out.scenario_id = scenario_id;
  out.iteration = iteration;
  out.violations = report.violations;
  out.collision_category = categorize_collision(report, ego, neighbors, th);
  out.min_ttc = report.min_ttc;
  out.min_distance = report.min_distance;
  out.pet = report.pet;

  for (const auto& v : report.violations) {
    const auto frame = static_cast<std::size_t>(v.frame);
    const double t = frame < ego.size() ? ego.states[frame].t : static_cast<double>(v.frame + 1) * dt;
    std::string line = "t=" + text::num(t) + " s (frame " + std::to_string(v.frame) + "), lane " +
                       std::to_string(v.lane_id) + ": ";
    auto nb = neighbors.find(v.neighbor_id);
    const bool have_pair = nb != neighbors.end() && frame < nb->second.size() && frame < ego.size();
    switch (v.kind) {
      case safety::ViolationKind::FrontTTC:
        line += "time-to-collision " + text::num(v.value) + " s to preceding vehicle #" +
                std::to_string(v.neighbor_id);
        if (have_pair) {
          const auto& e = ego.states[frame];
          const auto& n = nb->second.states[frame];
          line += " (gap " + text::num(n.x - e.x) + " m, ego " + text::num(e.vx) + " m/s, vehicle " +
                  text::num(n.vx) + " m/s)";
        }
        break;
      case safety::ViolationKind::Proximity:
        line += "distance " + text::num(v.value) + " m to vehicle #" + std::to_string(v.neighbor_id);
        if (have_pair) {
          const Vec2 rel = nb->second.states[frame].position() - ego.states[frame].position();
          line += " at relative position (" + text::signed_num(rel.x) + ", " + text::signed_num(rel.y) +
                  ") m, " + to_string(bearing_category(rel)) + " interaction";
        }
        break;
      case safety::ViolationKind::BoundaryExit:
        line += "ego crosses a road boundary at y=" + text::num(v.value) + " m";
        break;
    }
    out.narrative.push_back(std::move(line));
  }
  return out;
}

/// Stable text block embedded in refinement prompts.
inline std::string render_report_text(const SafetyAnalysisReport& r) {
  std::string s;
  s += "Safety analysis report (scenario " + r.scenario_id + ", iteration " + std::to_string(r.iteration) + ")\n";
  s += "Collision category: " + std::string(to_string(r.collision_category)) + "\n";
  s += "Minimum TTC: " + text::num(r.min_ttc) + " s; minimum distance: " + text::num(r.min_distance) +
       " m; PET: " + text::num(r.pet) + " s\n";
  s += "Violations:\n";
  if (r.narrative.empty()) s += "- none\n";
  for (const auto& line : r.narrative) s += "- " + line + "\n";
  return s;
}

inline nlohmann::json to_json(const SafetyAnalysisReport& r) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : r.violations) violations.push_back(safety::to_json(v));
  return {{"scenario_id", r.scenario_id},
          {"iteration", r.iteration},
          {"collision_category", to_string(r.collision_category)},
          {"min_ttc", safety::finite_or_null(r.min_ttc)},
          {"min_distance", safety::finite_or_null(r.min_distance)},
          {"pet", safety::finite_or_null(r.pet)},
          {"violations", violations},
          {"narrative", r.narrative}};
}

}  // namespace letspi
