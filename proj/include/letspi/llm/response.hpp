#pragma once

// Structured parameter responses: extraction from free text, validation,
// clamping, and the inverse rendering.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/adjustment.hpp"
#include "letspi/error.hpp"
#include "letspi/social_force.hpp"

namespace letspi::llm {

struct ClampEvent {
  std::string field;
  double requested{0.0};
  double applied{0.0};
};

struct LlmResponse {
  sf::SfParams params;
  std::optional<GoalAdjustment> goal_adjustment;
  std::string reasoning;
  std::string raw;
  std::vector<ClampEvent> clamps;
  std::vector<std::string> ignored_fields;  // recognised but unused, e.g. predicted_trajectories
};

inline constexpr const char* kParamNames[] = {"tau", "k_np", "k_nf", "k_nl", "k_boundary", "k_cline"};

namespace detail {

inline std::string excerpt(std::string_view raw, std::size_t limit = 160) {
  std::string s(raw.substr(0, limit));
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  if (raw.size() > limit) s += "...";
  return s;
}

/// End index (exclusive) of the balanced object starting at raw[open], or
/// npos when the braces never close.
inline std::size_t balanced_end(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

inline double* param_slot(sf::SfParams& p, std::string_view name) {
  if (name == "tau") return &p.tau;
  if (name == "k_np") return &p.k_np;
  if (name == "k_nf") return &p.k_nf;
  if (name == "k_nl") return &p.k_nl;
  if (name == "k_boundary") return &p.k_boundary;
  if (name == "k_cline") return &p.k_cline;
  return nullptr;
}

}  // namespace detail

/// First parseable JSON object embedded in `raw` (code fences and prose
/// around it are skipped).
inline std::optional<nlohmann::json> extract_json_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const std::size_t end = detail::balanced_end(raw, open);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(raw.substr(open, end - open), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

inline LlmResponse parse_response(std::string_view raw) {
  auto obj = extract_json_object(raw);
  if (!obj) throw Error(ErrorCode::ParseFailure, "no JSON object in response: " + detail::excerpt(raw));
  const nlohmann::json& j = *obj;

  LlmResponse out;
  out.raw = std::string(raw);
  for (const char* name : kParamNames) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_number())
      throw Error(ErrorCode::SchemaFailure,
                  std::string("missing or non-numeric '") + name + "' in response: " + detail::excerpt(raw));
    *detail::param_slot(out.params, name) = it->get<double>();
  }
  sf::SfParams requested = out.params;
  for (const auto& field : sf::clamp_params(out.params)) {
    double* before = detail::param_slot(requested, field);
    double* after = detail::param_slot(out.params, field);
    if (before && after) out.clamps.push_back({field, *before, *after});
  }

  if (auto it = j.find("goal_adjustment"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorCode::SchemaFailure, "goal_adjustment is not an object");
    auto lf = it->find("longitudinal_factor");
    auto la = it->find("lane_factor");
    if (lf == it->end() || !lf->is_number() || la == it->end() || !la->is_number())
      throw Error(ErrorCode::SchemaFailure, "goal_adjustment needs numeric longitudinal_factor and lane_factor");
    const GoalAdjustment req{lf->get<double>(), la->get<double>()};
    const GoalAdjustment got = clamped(req);
    if (got.longitudinal_factor != req.longitudinal_factor)
      out.clamps.push_back({"longitudinal_factor", req.longitudinal_factor, got.longitudinal_factor});
    if (got.lane_factor != req.lane_factor) out.clamps.push_back({"lane_factor", req.lane_factor, got.lane_factor});
    out.goal_adjustment = got;
  }
  if (auto it = j.find("reasoning"); it != j.end() && it->is_string()) out.reasoning = it->get<std::string>();
  if (j.contains("predicted_trajectories")) out.ignored_fields.emplace_back("predicted_trajectories");
  return out;
}

inline nlohmann::json response_json(const LlmResponse& r) {
  nlohmann::json j = {{"tau", r.params.tau},   {"k_np", r.params.k_np},
                      {"k_nf", r.params.k_nf}, {"k_nl", r.params.k_nl},
                      {"k_boundary", r.params.k_boundary}, {"k_cline", r.params.k_cline},
                      {"reasoning", r.reasoning}};
  if (r.goal_adjustment)
    j["goal_adjustment"] = {{"longitudinal_factor", r.goal_adjustment->longitudinal_factor},
                            {"lane_factor", r.goal_adjustment->lane_factor}};
  return j;
}

inline std::string render_response(const LlmResponse& r) { return response_json(r).dump(); }

}  // namespace letspi::llm
