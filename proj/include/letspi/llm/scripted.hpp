#pragma once

// Deterministic stand-in for a planning model. It behaves like a model that
// starts out optimistic, becomes conservative once it is shown a safety
// report, and in fast mode copies the best retrieved example.

#include <cstdio>
#include <string>

#include "letspi/adjustment.hpp"
#include "letspi/llm/backend.hpp"
#include "letspi/llm/response.hpp"
#include "letspi/social_force.hpp"

namespace letspi::llm {

struct ScriptedPlannerConfig {
  sf::SfParams aggressive{0.6, 0.5, 0.5, 0.5, 5.0, 1.0, 10.0};
  sf::SfParams conservative{1.0, 12.0, 2.0, 6.0, 5.0, 1.0, 10.0};
  double side_k_nl{20.0};  // used when the report names a side interaction
  GoalAdjustment refine_adjustment{1.0, 0.0};
};

class ScriptedPlanner : public Backend {
 public:
  explicit ScriptedPlanner(ScriptedPlannerConfig cfg = {}, int max_concurrency = 4)
      : Backend(max_concurrency), cfg_(cfg) {}

  std::string send(const ChatRequest& req) override {
    switch (req.kind) {
      case PromptKind::PhysicsInformed: return reply(cfg_.aggressive, std::nullopt, "initial estimate");
      case PromptKind::Refinement: {
        sf::SfParams p = cfg_.conservative;
        if (req.user.find("Collision category: Side") != std::string::npos) p.k_nl = cfg_.side_k_nl;
        return reply(p, cfg_.refine_adjustment, "stronger repulsion and a shorter goal after the report");
      }
      case PromptKind::Fast: {
        sf::SfParams p;
        GoalAdjustment a;
        if (read_first_example(req.user, p, a)) return reply(p, a, "following example 1");
        return reply(cfg_.aggressive, kNeutralAdjustment, "no examples");
      }
    }
    throw Error(ErrorCode::BackendRefusal, "unknown prompt kind");
  }

  std::string name() const override { return "scripted"; }

  static bool read_first_example(const std::string& prompt, sf::SfParams& p, GoalAdjustment& a) {
    const auto pos = prompt.find("Example 1 (similarity");
    if (pos == std::string::npos) return false;
    const auto colon = prompt.find("): ", pos);
    if (colon == std::string::npos) return false;
    p = sf::SfParams{};
    const int n = std::sscanf(prompt.c_str() + colon + 3,
                              "tau=%lf, k_np=%lf, k_nf=%lf, k_nl=%lf, k_boundary=%lf, k_cline=%lf, "
                              "longitudinal_factor=%lf, lane_factor=%lf",
                              &p.tau, &p.k_np, &p.k_nf, &p.k_nl, &p.k_boundary, &p.k_cline, &a.longitudinal_factor,
                              &a.lane_factor);
    return n == 8;
  }

 private:
  static std::string reply(const sf::SfParams& p, std::optional<GoalAdjustment> a, const std::string& why) {
    LlmResponse r;
    r.params = p;
    r.goal_adjustment = a;
    r.reasoning = why;
    return "```json\n" + render_response(r) + "\n```\n";
  }

  ScriptedPlannerConfig cfg_;
};

}  // namespace letspi::llm
