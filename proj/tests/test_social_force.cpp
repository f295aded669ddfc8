#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "letspi/social_force.hpp"

using namespace letspi;
using namespace letspi::sf;

namespace {

// Scalar restatement of the potential used to check the engine's gradient.
double potential_oracle(double x, double y, const std::vector<VehicleState>& nbs, const LaneGeometry& lanes,
                        const SfParams& p, double lateral_window) {
  double u = 0.0;
  for (const auto& n : nbs) {
    const double dx = n.x - x;
    const double k = std::abs(dx) < lateral_window ? p.k_nl : (dx > 0 ? p.k_np : p.k_nf);
    const double d = std::sqrt((x - n.x) * (x - n.x) + (y - n.y) * (y - n.y));
    u += p.r_col * k * std::exp(-d / p.r_col);
  }
  for (double c : lanes.center_lines) u += p.k_cline * std::exp(-(y - c) * (y - c));
  for (double b : lanes.boundary_lines) u += p.k_boundary * 0.5 / ((y - b) * (y - b));
  return u;
}

}  // namespace

TEST(SocialForce, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(-60.0, 60.0), uy(0.8, 10.45), uk(0.0, 20.0), ur(2.0, 20.0);
  const auto lanes = fixtures::three_lanes();
  EngineConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    VehicleState ego;
    ego.x = 0.0;
    ego.y = uy(rng);
    std::vector<VehicleState> nbs;
    const int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      VehicleState nb;
      nb.x = ux(rng);
      nb.y = uy(rng);
      // keep clear of the class switch at |dx| = lateral_window
      if (std::abs(std::abs(nb.x) - cfg.lateral_window) < 0.01) nb.x += 0.05;
      nbs.push_back(nb);
    }
    SfParams p{1.0, uk(rng), uk(rng), uk(rng), uk(rng), uk(rng), ur(rng)};
    const Vec2 f = repulsion_total(ego, nbs, lanes, p, cfg);
    const double h = 1e-5;
    const double gx = -(potential_oracle(ego.x + h, ego.y, nbs, lanes, p, cfg.lateral_window) -
                        potential_oracle(ego.x - h, ego.y, nbs, lanes, p, cfg.lateral_window)) /
                      (2 * h);
    const double gy = -(potential_oracle(ego.x, ego.y + h, nbs, lanes, p, cfg.lateral_window) -
                        potential_oracle(ego.x, ego.y - h, nbs, lanes, p, cfg.lateral_window)) /
                      (2 * h);
    const double scale = std::max(1.0, std::hypot(gx, gy));
    EXPECT_LE(std::hypot(f.x - gx, f.y - gy) / scale, 1e-4) << "trial " << trial;
    // Engine potential agrees with the oracle too.
    EXPECT_NEAR(repulsive_potential(ego, nbs, lanes, p, cfg),
                potential_oracle(ego.x, ego.y, nbs, lanes, p, cfg.lateral_window), 1e-9);
  }
}

TEST(SocialForce, EulerUsesOldVelocity) {
  const auto k = step({0, 0}, {0, 0}, {2, 0}, 0.04);
  EXPECT_EQ(k.position.x, 0.0);
  EXPECT_EQ(k.position.y, 0.0);
  EXPECT_DOUBLE_EQ(k.velocity.x, 0.08);
  EXPECT_EQ(k.velocity.y, 0.0);
}

TEST(SocialForce, EulerIsLinear) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p{u(rng), u(rng)}, v{u(rng), u(rng)}, a{u(rng), u(rng)};
    const double dt = 0.04;
    const auto k = step(p, v, a, dt);
    EXPECT_EQ(k.position.x, p.x + v.x * dt);
    EXPECT_EQ(k.position.y, p.y + v.y * dt);
    EXPECT_EQ(k.velocity.x, v.x + a.x * dt);
    EXPECT_EQ(k.velocity.y, v.y + a.y * dt);
  }
}

TEST(SocialForce, GoalAttractionDynamicSpeed) {
  // 100 m, 50 frames left at 0.04 s: v0 = 50 m/s toward +x.
  const Vec2 a = goal_attraction({0, 0}, {30, 0}, {100, 0}, 75, 125, 0.04, 2.0);
  EXPECT_DOUBLE_EQ(a.x, (50.0 - 30.0) / 2.0);
  EXPECT_DOUBLE_EQ(a.y, 0.0);
  const Vec2 zero = goal_attraction({5, 5}, {1, 1}, {5, 5}, 0, 10, 0.04, 1.0);
  EXPECT_EQ(zero.x, 0.0);
  EXPECT_LETSPI_ERROR(goal_attraction({0, 0}, {0, 0}, {1, 0}, 10, 10, 0.04, 1.0), ErrorCode::Precondition);
  EXPECT_LETSPI_ERROR(goal_attraction({0, 0}, {0, 0}, {1, 0}, 0, 10, 0.04, 0.0), ErrorCode::Precondition);
}

TEST(SocialForce, NeighborClassification) {
  VehicleState ego, nb;
  nb.x = 12.0;
  EXPECT_EQ(classify_neighbor(ego, nb, 10.0), NeighborClass::Preceding);
  nb.x = -12.0;
  EXPECT_EQ(classify_neighbor(ego, nb, 10.0), NeighborClass::Following);
  nb.x = 9.9;
  EXPECT_EQ(classify_neighbor(ego, nb, 10.0), NeighborClass::Lateral);
}

TEST(SocialForce, CoincidentVehiclesRaise) {
  VehicleState ego, nb;
  EXPECT_LETSPI_ERROR(vehicle_repulsion(ego, nb, SfParams{}), ErrorCode::CoincidentVehicles);
}

TEST(SocialForce, ClampParamsAndBounds) {
  SfParams p{0.01, -3.0, 150.0, 4.0, 5.0, 1.0, 80.0};
  EXPECT_FALSE(within_bounds(p));
  const auto moved = clamp_params(p);
  EXPECT_EQ(moved.size(), 4u);
  EXPECT_DOUBLE_EQ(p.tau, kTauMin);
  EXPECT_DOUBLE_EQ(p.k_np, 0.0);
  EXPECT_DOUBLE_EQ(p.k_nf, kStrengthMax);
  EXPECT_DOUBLE_EQ(p.r_col, kRcolMax);
  EXPECT_TRUE(within_bounds(p));
}

TEST(SocialForce, FreeRoadRolloutMatchesScalarOracle) {
  // No neighbors, no lanes: the engine reduces to a 1-D ODE.
  auto s = fixtures::free_road(20.0, 125);
  s.lanes = LaneGeometry{};
  s.goal = {150.0, 5.625, 125};
  SfParams p;
  p.tau = 0.7;
  const auto traj = rollout(s, p, s.goal, {});
  ASSERT_EQ(traj.size(), 125u);
  double x = 0.0, v = 20.0;
  for (int i = 0; i < 125; ++i) {
    const double v0 = (150.0 - x) / ((125 - i) * s.dt);
    double a = (v0 - v) / p.tau;
    a = std::clamp(a, -12.0, 12.0);
    x += v * s.dt;
    v += a * s.dt;
    EXPECT_NEAR(traj.states[static_cast<std::size_t>(i)].x, x, 1e-9);
    EXPECT_NEAR(traj.states[static_cast<std::size_t>(i)].vx, v, 1e-9);
  }
  EXPECT_NEAR(traj.states.back().t, 5.0, 1e-9);
}

TEST(SocialForce, FreeRoadConvergence) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ug(50.0, 200.0), uv(0.8, 1.2);
  for (int i = 0; i < 100; ++i) {
    const double g = ug(rng);
    auto s = fixtures::free_road(g / 5.0 * uv(rng), 125);
    s.goal = {g, 5.625, 125};
    const auto traj = rollout(s, SfParams{}, s.goal, {});
    EXPECT_LT(std::abs(traj.states.back().x - g), 0.5) << "goal " << g;
  }
}

TEST(SocialForce, RolloutAccelerationIsClamped) {
  auto s = fixtures::free_road(5.0, 125);
  s.goal = {400.0, 5.625, 125};
  const auto traj = rollout(s, SfParams{}, s.goal, {});
  EXPECT_TRUE(accelerations_plausible(s.ego_now(), traj, s.dt, 12.0));
}

TEST(SocialForce, RolloutNeedsNeighborFutures) {
  const auto s = fixtures::with_leader(30.0, 5.0);
  EXPECT_LETSPI_ERROR(rollout(s, SfParams{}, s.goal, {}), ErrorCode::Precondition);
}

TEST(SocialForce, LeaderRepulsionSlowsEgo) {
  const auto s = fixtures::with_leader(30.0, 5.0);
  TrajectoryMap fut{{7, fixtures::as_trajectory(s.neighbor_futures.at(7))}};
  const auto free = rollout(fixtures::free_road(), SfParams{}, s.goal, {});
  const auto blocked = rollout(s, SfParams{}, s.goal, fut);
  EXPECT_LT(blocked.states.back().x, free.states.back().x);
}

TEST(Idm, AccelerationMatchesFormula) {
  IdmParams p;
  const double v = 25.0, gap = 30.0, dv = 5.0;
  const double s_star = p.s0_min_gap + v * p.t_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comfort));
  const double expect = p.a_max * (1.0 - std::pow(v / p.v_desired, 4) - std::pow(s_star / gap, 2));
  EXPECT_NEAR(idm_acceleration(v, gap, dv, p).a, expect, 1e-12);
  EXPECT_NEAR(idm_acceleration(v, std::nullopt, 0.0, p).a, p.a_max * (1 - std::pow(v / p.v_desired, 4)), 1e-12);
  const auto hit = idm_acceleration(v, 0.0, dv, p);
  EXPECT_TRUE(hit.non_positive_gap);
  EXPECT_DOUBLE_EQ(hit.a, -kIdmEmergencyDecel);
}

TEST(Idm, RolloutMatchesScalarOracle) {
  const auto s = fixtures::with_leader(40.0, 6.0);
  const auto fut = predict_neighbor_futures(s, 125);
  const auto plan = idm_plan_ego(s, fut, 125);
  // Leader has no one ahead: it keeps its speed (v_desired tracks it).
  for (const auto& st : fut.at(7).states) EXPECT_NEAR(st.vx, 19.0, 1e-12);
  IdmParams p;
  p.v_desired = 25.0;
  double x = 0.0, v = 25.0;
  for (int i = 0; i < 125; ++i) {
    const double lx = i == 0 ? 40.0 : fut.at(7).states[static_cast<std::size_t>(i - 1)].x;
    const double a = idm_acceleration(v, lx - x, v - 19.0, p).a;
    x += v * s.dt;
    v = std::max(0.0, v + a * s.dt);
    EXPECT_NEAR(plan.trajectory.states[static_cast<std::size_t>(i)].x, x, 1e-9);
  }
  EXPECT_TRUE(plan.flagged_frames.empty());
}

TEST(Idm, NonPositiveGapIsFlagged) {
  const auto s = fixtures::with_leader(0.5, 20.0);
  const auto fut = predict_neighbor_futures(s, 20);
  const auto plan = idm_plan_ego(s, fut, 20);
  EXPECT_FALSE(plan.flagged_frames.empty());
}
