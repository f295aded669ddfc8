#pragma once

// Plan, check, report, refine. Each iteration asks the model for
// parameters (and, after the first, a goal adjustment), rolls the ego out,
// and evaluates the result against the reflection thresholds.

#include <optional>
#include <string>
#include <vector>

#include "letspi/adjustment.hpp"
#include "letspi/error.hpp"
#include "letspi/llm/backend.hpp"
#include "letspi/llm/prompt.hpp"
#include "letspi/llm/response.hpp"
#include "letspi/memory.hpp"
#include "letspi/safety.hpp"
#include "letspi/scenario.hpp"
#include "letspi/social_force.hpp"

namespace letspi {

struct PlanningContext {
  TrajectoryMap planning_futures;    // what the planner may assume about neighbors
  TrajectoryMap evaluation_futures;  // what the plan is scored against
};

/// Planning always uses IDM predictions. Scoring uses the recorded neighbor
/// futures when every neighbor has a complete one, and the predictions
/// otherwise.
inline PlanningContext make_context(const Scenario& s, const sf::IdmConfig& idm = {}) {
  PlanningContext ctx;
  const int frames = s.goal.horizon_frames;
  ctx.planning_futures = sf::predict_neighbor_futures(s, frames, idm);
  bool recorded = !s.neighbors.empty();
  for (const auto& [id, hist] : s.neighbors) {
    auto it = s.neighbor_futures.find(id);
    if (it == s.neighbor_futures.end() || it->second.size() < static_cast<std::size_t>(frames)) recorded = false;
  }
  if (recorded) {
    for (const auto& [id, hist] : s.neighbors) {
      Trajectory t;
      t.source = TrajectorySource::GroundTruth;
      t.states.assign(s.neighbor_futures.at(id).begin(), s.neighbor_futures.at(id).begin() + frames);
      ctx.evaluation_futures.emplace(id, std::move(t));
    }
  } else {
    ctx.evaluation_futures = ctx.planning_futures;
  }
  return ctx;
}

struct PlanResult {
  AdjustedGoal goal;
  Trajectory trajectory;
  safety::SafetyReport report;
};

inline PlanResult plan_and_evaluate(const Scenario& s, const PlanningContext& ctx, const sf::SfParams& params,
                                    const GoalAdjustment& adj, const sf::EngineConfig& engine,
                                    const safety::Thresholds& th) {
  PlanResult r;
  r.goal = apply_goal_adjustment(s.goal, s.ego_now(), adj, s.lanes);
  r.trajectory = sf::rollout(s, params, r.goal.goal, ctx.planning_futures, engine);
  r.report = safety::evaluate(r.trajectory, ctx.evaluation_futures, s.lanes, r.goal.goal, th, s.ego_now(), s.dt);
  return r;
}

/// Larger is safer: the tighter of the two reflection margins.
inline double safety_margin(const safety::SafetyReport& r, const safety::Thresholds& th) {
  return std::min(r.min_ttc / th.reflect_ttc, r.min_distance / th.reflect_distance) -
         (r.in_road ? 0.0 : 1e6);
}

struct ReflectionConfig {
  int budget{3};  // total model calls, first prompt included
  bool goal_adjustment{true};
  std::size_t memory_examples{0};  // analogs shown in refinement prompts
  safety::Thresholds thresholds;
  sf::EngineConfig engine;
  sf::IdmConfig idm;
  llm::CompleteOptions llm;
};

struct Attempt {
  int iteration{0};
  sf::SfParams params;
  GoalAdjustment adjustment{kNeutralAdjustment};
  PlanResult plan;
  std::optional<SafetyAnalysisReport> analysis;
};

enum class Outcome { Accepted, Rejected };

struct ReflectionResult {
  Outcome outcome{Outcome::Rejected};
  std::string reason;
  int llm_calls{0};
  std::vector<Attempt> attempts;
  std::optional<std::size_t> chosen;  // index into attempts (final for Accepted, best-so-far otherwise)

  bool accepted() const { return outcome == Outcome::Accepted; }
  int iterations() const { return static_cast<int>(attempts.size()); }
  const Attempt* final_attempt() const { return chosen ? &attempts[*chosen] : nullptr; }
};

inline ReflectionResult reflect_loop(const Scenario& s, llm::Backend& backend, const ReflectionConfig& cfg = {},
                                     const memory::MemoryBank* memory = nullptr) {
  if (cfg.budget < 1) throw Error(ErrorCode::Precondition, "reflect_loop: budget must be >= 1");
  ReflectionResult out;
  const PlanningContext ctx = make_context(s, cfg.idm);
  const llm::PromptBundle base = llm::build_physics_prompt(s);

  std::vector<memory::Match> examples;
  if (memory && cfg.memory_examples > 0 && memory->size() > 0)
    examples = memory->top_k(memory::extract_features(s), cfg.memory_examples);

  auto pick_best = [&] {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.attempts.size(); ++i) {
      if (safety_margin(out.attempts[i].plan.report, cfg.thresholds) >
          safety_margin(out.attempts[best].plan.report, cfg.thresholds))
        best = i;
    }
    out.chosen = best;
  };

  llm::PromptBundle prompt = base;
  for (int iter = 1; iter <= cfg.budget; ++iter) {
    llm::LlmResponse resp;
    try {
      ++out.llm_calls;
      resp = llm::parse_response(llm::complete(prompt, backend, cfg.llm));
    } catch (const Error& e) {
      const bool parse = e.code() == ErrorCode::ParseFailure || e.code() == ErrorCode::SchemaFailure;
      out.reason = std::string(parse ? "ParseFailure: " : "LlmUnavailable: ") + e.what();
      if (!out.attempts.empty()) pick_best();
      return out;
    }

    Attempt a;
    a.iteration = iter;
    a.params = resp.params;
    if (cfg.goal_adjustment && resp.goal_adjustment) a.adjustment = *resp.goal_adjustment;
    a.plan = plan_and_evaluate(s, ctx, a.params, a.adjustment, cfg.engine, cfg.thresholds);
    const bool clean = a.plan.report.passes_reflection();
    if (!clean) {
      a.analysis = build_analysis_report(s.scenario_id, iter, a.plan.report, a.plan.trajectory,
                                         ctx.evaluation_futures, s.dt, cfg.thresholds);
    }
    out.attempts.push_back(std::move(a));
    if (clean) {
      out.outcome = Outcome::Accepted;
      out.chosen = out.attempts.size() - 1;
      return out;
    }
    if (iter < cfg.budget) {
      prompt = llm::build_refinement_prompt(base, *out.attempts.back().analysis, examples, &out.attempts.back().params);
    }
  }
  out.reason = "budget of " + std::to_string(cfg.budget) + " iterations exhausted";
  pick_best();
  return out;
}

}  // namespace letspi
