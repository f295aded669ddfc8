#pragma once

// Prompt construction for the three request kinds. Every builder is a pure
// function of its inputs; numbers go through text::num so the output is
// byte-stable.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "letspi/adjustment.hpp"
#include "letspi/embedded_assets.hpp"
#include "letspi/error.hpp"
#include "letspi/memory.hpp"
#include "letspi/scenario.hpp"
#include "letspi/social_force.hpp"

namespace letspi::llm {

enum class PromptKind { PhysicsInformed, Refinement, Fast };

inline const char* to_string(PromptKind k) {
  switch (k) {
    case PromptKind::PhysicsInformed: return "PhysicsInformed";
    case PromptKind::Refinement: return "Refinement";
    case PromptKind::Fast: return "Fast";
  }
  return "?";
}

namespace marker {
inline constexpr std::string_view kRole = "## ROLE";
inline constexpr std::string_view kPhysics = "## SOCIAL FORCE MODEL";
inline constexpr std::string_view kScenario = "## SCENARIO";
inline constexpr std::string_view kOutput = "## OUTPUT FORMAT";
inline constexpr std::string_view kMemory = "## MEMORY EXAMPLES";
inline constexpr std::string_view kReflection = "## SAFETY REFLECTION";
inline constexpr std::string_view kSummary = "## SCENARIO SUMMARY";
inline constexpr std::string_view kGuidance = "## MEMORY GUIDANCE";
inline constexpr std::string_view kNeighborBlock = "### Neighbor ";
}  // namespace marker

struct PromptSection {
  std::string marker;
  std::string body;
};

struct PromptBundle {
  PromptKind kind{PromptKind::PhysicsInformed};
  std::string scenario_id;
  std::string system_text;
  std::vector<PromptSection> sections;  // user message, in order
  std::string user_text;
  std::size_t token_estimate{0};

  bool has_section(std::string_view m) const {
    for (const auto& s : sections)
      if (s.marker == m) return true;
    return system_text.rfind(std::string(m), 0) == 0;
  }
};

/// Rough token count: one token per four bytes, rounded up.
inline std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

inline void finalize(PromptBundle& b) {
  b.user_text.clear();
  for (std::size_t i = 0; i < b.sections.size(); ++i) {
    if (i) b.user_text += "\n";
    b.user_text += b.sections[i].marker + "\n" + b.sections[i].body;
  }
  b.token_estimate = estimate_tokens(b.system_text) + estimate_tokens(b.user_text);
}

inline constexpr int kHistoryStride = 5;  // history samples shown in the physics prompt

namespace detail {

using text::num;
using text::signed_num;

inline std::string state_line(const VehicleState& s, const LaneGeometry& lanes) {
  return "t=" + num(s.t) + " s: x=" + num(s.x) + " m, y=" + num(s.y) + " m, vx=" + num(s.vx) + " m/s, vy=" +
         num(s.vy) + " m/s, lane " + std::to_string(lanes.lane_id_at(s.y, s.lane_id));
}

inline std::vector<std::size_t> history_indices(std::size_t n, int stride) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(n) - 1; i >= 0; i -= stride)
    idx.insert(idx.begin(), static_cast<std::size_t>(i));
  return idx;
}

inline std::string lane_text(const LaneGeometry& lanes) {
  std::string s = "Road boundaries (not crossable) at y =";
  for (std::size_t i = 0; i < lanes.boundary_lines.size(); ++i)
    s += (i ? ", " : " ") + num(lanes.boundary_lines[i]);
  s += " m. Center lines (crossable) at y =";
  if (lanes.center_lines.empty()) s += " none";
  for (std::size_t i = 0; i < lanes.center_lines.size(); ++i) s += (i ? ", " : " ") + num(lanes.center_lines[i]);
  s += " m. Lane width " + num(lanes.lane_width) + " m.\n";
  for (const auto& l : lanes.lanes)
    s += "Lane " + std::to_string(l.id) + ": y in [" + num(l.y_min) + ", " + num(l.y_max) + ") m\n";
  return s;
}

inline const char* relation(const VehicleState& ego, const VehicleState& nb, const LaneGeometry& lanes) {
  const bool same_lane = lanes.lane_id_at(ego.y, ego.lane_id) == lanes.lane_id_at(nb.y, nb.lane_id);
  switch (sf::classify_neighbor(ego, nb, sf::EngineConfig{}.lateral_window)) {
    case sf::NeighborClass::Preceding: return same_lane ? "preceding, same lane" : "ahead, other lane";
    case sf::NeighborClass::Following: return same_lane ? "following, same lane" : "behind, other lane";
    case sf::NeighborClass::Lateral: return "alongside";
  }
  return "";
}

inline std::string goal_text(const Scenario& s) {
  const VehicleState& ego = s.ego_now();
  return "Goal: x=" + num(s.goal.x) + " m, y=" + num(s.goal.y) + " m (lane " +
         std::to_string(s.lanes.lane_id_at(s.goal.y, ego.lane_id)) + "), " + num(s.goal.x - ego.x) +
         " m ahead, to be reached after " + std::to_string(s.goal.horizon_frames) + " frames (" +
         num(s.goal.horizon_frames * s.dt) + " s).\n";
}

inline std::string params_text(const sf::SfParams& p) {
  return "tau=" + num(p.tau) + ", k_np=" + num(p.k_np) + ", k_nf=" + num(p.k_nf) + ", k_nl=" + num(p.k_nl) +
         ", k_boundary=" + num(p.k_boundary) + ", k_cline=" + num(p.k_cline);
}

inline std::string adjustment_text(const GoalAdjustment& a) {
  return "longitudinal_factor=" + num(a.longitudinal_factor) + ", lane_factor=" + num(a.lane_factor);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Physics-informed prompt

inline std::string scenario_description(const Scenario& s) {
  using detail::num;
  const VehicleState& ego = s.ego_now();
  std::string out;
  out += "Scenario " + s.scenario_id + ". Time step " + num(s.dt, 3) + " s. History covers " +
         num(-s.ego_history.front().t) + " s (" + std::to_string(s.ego_history.size()) +
         " frames, every " + std::to_string(kHistoryStride) + "th shown, ending at t=0).\n";
  out += "Coordinates: x along the direction of travel, y toward the left; lane 1 is the rightmost lane.\n";
  out += detail::lane_text(s.lanes);
  out += "\n### Ego vehicle\nCurrent: " + detail::state_line(ego, s.lanes) + "\nHistory:\n";
  for (std::size_t i : detail::history_indices(s.ego_history.size(), kHistoryStride))
    out += "  " + detail::state_line(s.ego_history[i], s.lanes) + "\n";
  out += detail::goal_text(s);
  out += "\nNeighbor vehicles: " + std::to_string(s.neighbors.size()) + "\n";
  for (const auto& [id, hist] : s.neighbors) {
    const VehicleState& nb = hist.back();
    out += "\n" + std::string(marker::kNeighborBlock) + std::to_string(id) + " (" + detail::relation(ego, nb, s.lanes) +
           ")\n";
    out += "Current: " + detail::state_line(nb, s.lanes) + "\n";
    out += "Relative to ego: dx=" + detail::signed_num(nb.x - ego.x) + " m, dy=" + detail::signed_num(nb.y - ego.y) +
           " m, dvx=" + detail::signed_num(nb.vx - ego.vx) + " m/s, distance " +
           num((nb.position() - ego.position()).norm()) + " m\n";
    out += "History:\n";
    for (std::size_t i : detail::history_indices(hist.size(), kHistoryStride))
      out += "  " + detail::state_line(hist[i], s.lanes) + "\n";
  }
  return out;
}

inline std::string physics_role_text() {
  return std::string(marker::kRole) +
         "\nYou are a highway motion-planning expert. You do not output a trajectory directly. Instead you "
         "choose the parameters of a social force model that will generate the ego vehicle's trajectory, so "
         "that the ego reaches its goal smoothly while keeping a safe time-to-collision (at least 1.5 s) and "
         "a safe distance (at least 2.0 m) to every other vehicle.\n";
}

inline std::string output_instruction(bool with_goal_adjustment) {
  std::string s =
      "Respond with a single JSON object that follows this schema. Choose values for all six parameters and "
      "explain your choice in \"reasoning\".\n";
  if (with_goal_adjustment) {
    s += "Include \"goal_adjustment\": longitudinal_factor in [0, 1] scales the forward range of the goal "
         "(0 gives x1.2, 0.4 keeps it, 1 gives x0.7); lane_factor in [-1, 1] shifts the goal by that many "
         "lanes (positive = right, negative = left).\n";
  }
  s += std::string(assets::kResponseSchema);
  if (s.back() != '\n') s += "\n";
  return s;
}

inline PromptBundle build_physics_prompt(const Scenario& s,
                                         std::string_view physics_background = assets::kPhysicsBackground) {
  PromptBundle b;
  b.kind = PromptKind::PhysicsInformed;
  b.scenario_id = s.scenario_id;
  b.system_text = physics_role_text();
  std::string background(physics_background);
  if (!background.empty() && background.back() != '\n') background += "\n";
  b.sections.push_back({std::string(marker::kPhysics), background});
  b.sections.push_back({std::string(marker::kScenario), scenario_description(s)});
  b.sections.push_back({std::string(marker::kOutput), output_instruction(false)});
  finalize(b);
  return b;
}

// ---------------------------------------------------------------------------
// Refinement prompt

inline std::string memory_example_text(const std::vector<memory::Match>& examples) {
  std::string s = "Validated experiences from similar scenarios:\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& r = examples[i].record;
    s += "Example " + std::to_string(i + 1) + " (similarity " + text::num(examples[i].similarity) + ", scenario " +
         r.scenario_id + "): " + detail::params_text(r.params) + ", " + detail::adjustment_text(r.goal_adjustment) +
         "; outcome: min TTC " + text::num(r.safety.min_ttc) + " s, min distance " + text::num(r.safety.min_distance) +
         " m\n";
    if (!r.guidance.empty()) s += "  Guidance: " + r.guidance + "\n";
  }
  return s;
}

inline PromptBundle build_refinement_prompt(const PromptBundle& base, const SafetyAnalysisReport& report,
                                            const std::vector<memory::Match>& memory_examples = {},
                                            const sf::SfParams* previous = nullptr) {
  if (report.violations.empty())
    throw Error(ErrorCode::Precondition, "refinement prompt requires a report with violations");
  PromptBundle b;
  b.kind = PromptKind::Refinement;
  b.scenario_id = base.scenario_id;
  b.system_text = base.system_text;
  for (const auto& sec : base.sections) {
    if (sec.marker == marker::kOutput || sec.marker == marker::kMemory || sec.marker == marker::kReflection) continue;
    b.sections.push_back(sec);
  }
  if (!memory_examples.empty()) b.sections.push_back({std::string(marker::kMemory), memory_example_text(memory_examples)});

  std::string refl;
  if (previous) refl += "The previous parameters (" + detail::params_text(*previous) + ") produced an unsafe trajectory.\n";
  refl += render_report_text(report);
  refl +=
      "Revise the parameters and the goal so that every violation above disappears.\n"
      "Prioritize longitudinal adjustments (x-coordinate) over lateral ones.\n"
      "Lane changes should be a last resort for severe safety concerns only.\n";
  b.sections.push_back({std::string(marker::kReflection), refl});
  b.sections.push_back({std::string(marker::kOutput), output_instruction(true)});
  finalize(b);
  return b;
}

// ---------------------------------------------------------------------------
// Fast prompt

inline std::string fast_role_text() {
  return std::string(marker::kRole) +
         "\nChoose social force parameters and a goal adjustment for the ego vehicle. Reply with JSON only.\n";
}

inline std::string scenario_summary(const Scenario& s) {
  using detail::num;
  const VehicleState& ego = s.ego_now();
  std::string out = "Ego: " + num(ego.velocity().norm()) + " m/s in lane " +
                    std::to_string(s.lanes.lane_id_at(ego.y, ego.lane_id)) + " of " +
                    std::to_string(s.lanes.lanes.size()) + ". Goal " + num(s.goal.x - ego.x) + " m ahead in lane " +
                    std::to_string(s.lanes.lane_id_at(s.goal.y, ego.lane_id)) + " after " +
                    num(s.goal.horizon_frames * s.dt) + " s.\n";
  for (const auto& [id, hist] : s.neighbors) {
    const VehicleState& nb = hist.back();
    out += "Vehicle " + std::to_string(id) + ": dx=" + detail::signed_num(nb.x - ego.x) + " m, dy=" +
           detail::signed_num(nb.y - ego.y) + " m, " + num(nb.velocity().norm()) + " m/s, " +
           detail::relation(ego, nb, s.lanes) + "\n";
  }
  return out;
}

inline std::string fast_guidance_text(const std::vector<memory::Match>& analogs) {
  if (analogs.empty()) return "No stored experience is available; choose physically reasonable values.\n";
  std::string s;
  for (std::size_t i = 0; i < analogs.size(); ++i) {
    const auto& r = analogs[i].record;
    s += "Example " + std::to_string(i + 1) + " (similarity " + text::num(analogs[i].similarity) + "): " +
         detail::params_text(r.params) + ", " + detail::adjustment_text(r.goal_adjustment) + "\n";
    s += "  Guidance: " + (r.guidance.empty() ? std::string("none") : r.guidance) + "\n";
  }
  return s;
}

inline constexpr std::string_view kFastSchema =
    "{\"tau\": n, \"k_np\": n, \"k_nf\": n, \"k_nl\": n, \"k_boundary\": n, \"k_cline\": n, "
    "\"goal_adjustment\": {\"longitudinal_factor\": n, \"lane_factor\": n}, \"reasoning\": \"short\"}\n";

inline PromptBundle build_fast_prompt(const Scenario& s, const std::vector<memory::Match>& analogs) {
  PromptBundle b;
  b.kind = PromptKind::Fast;
  b.scenario_id = s.scenario_id;
  b.system_text = fast_role_text();
  b.sections.push_back({std::string(marker::kSummary), scenario_summary(s)});
  b.sections.push_back({std::string(marker::kGuidance), fast_guidance_text(analogs)});
  b.sections.push_back({std::string(marker::kOutput), std::string(kFastSchema)});
  finalize(b);
  return b;
}

// ---------------------------------------------------------------------------
// Guidance line stored with each memory record

inline std::string guidance_for(const Scenario& s, const GoalAdjustment& adj) {
  const VehicleState& ego = s.ego_now();
  const int ego_lane = s.lanes.lane_id_at(ego.y, ego.lane_id);
  const VehicleState* leader = nullptr;
  const VehicleState* beside = nullptr;
  const VehicleState* follower = nullptr;
  for (const auto& [id, hist] : s.neighbors) {
    const VehicleState& nb = hist.back();
    const bool same_lane = s.lanes.lane_id_at(nb.y, nb.lane_id) == ego_lane;
    switch (sf::classify_neighbor(ego, nb, sf::EngineConfig{}.lateral_window)) {
      case sf::NeighborClass::Preceding:
        if (same_lane && (!leader || nb.x < leader->x)) leader = &nb;
        break;
      case sf::NeighborClass::Following:
        if (same_lane && (!follower || nb.x > follower->x)) follower = &nb;
        break;
      case sf::NeighborClass::Lateral:
        if (!beside || std::abs(nb.x - ego.x) < std::abs(beside->x - ego.x)) beside = &nb;
        break;
    }
  }
  std::string g;
  if (beside) {
    g = "Vehicle alongside—recommend elevated k_nl";
  } else if (leader && ego.vx > leader->vx) {
    g = "Approaching preceding vehicle—recommend elevated k_np";
  } else if (follower && follower->vx > ego.vx) {
    g = "Faster vehicle behind—recommend elevated k_nf";
  } else if (leader) {
    g = "Steady car following—moderate k_np suffices";
  } else {
    g = "Free road—default parameters suffice";
  }
  const GoalAdjustment a = clamped(adj);
  if (a.longitudinal_factor > kNeutralAdjustment.longitudinal_factor + 1e-9) g += " and adjust a conservative goal";
  if (a.lane_factor != 0.0) g += a.lane_factor > 0 ? " with a shift to the right" : " with a shift to the left";
  return g;
}

}  // namespace letspi::llm
