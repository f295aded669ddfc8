#pragma once

// Small scenario builders shared by the unit tests.

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "letspi/error.hpp"
#include "letspi/scenario.hpp"
#include "letspi/synth.hpp"

namespace fixtures {

using namespace letspi;

inline LaneGeometry three_lanes() { return synth::default_lanes(); }

// Constant-velocity history of h+1 samples ending at t=0.
inline History cv_history(double x0, double y, double vx, int lane, int h = 74, double dt = kHighDTimestep) {
  History out;
  for (int i = -h; i <= 0; ++i) {
    VehicleState s;
    s.t = i * dt;
    s.x = x0 + vx * s.t;
    s.y = y;
    s.vx = vx;
    s.lane_id = lane;
    out.push_back(s);
  }
  return out;
}

// Constant-velocity future of n samples at t = dt .. n*dt.
inline History cv_future(double x0, double y, double vx, int lane, int n = 125, double dt = kHighDTimestep) {
  History out;
  for (int i = 1; i <= n; ++i) {
    VehicleState s;
    s.t = i * dt;
    s.x = x0 + vx * s.t;
    s.y = y;
    s.vx = vx;
    s.lane_id = lane;
    out.push_back(s);
  }
  return out;
}

inline Trajectory as_trajectory(const History& h) {
  Trajectory t;
  t.states = h;
  return t;
}

// Ego in the middle lane at x=0 with constant speed `v`; goal is where the
// ego would be after the horizon at that speed.
inline Scenario free_road(double v = 25.0, int horizon = 125) {
  Scenario s;
  s.scenario_id = "free";
  s.lanes = three_lanes();
  s.ego_history = cv_history(0.0, 5.625, v, 2);
  s.ego_future = cv_future(0.0, 5.625, v, 2, horizon);
  s.goal = {v * horizon * s.dt, 5.625, horizon};
  return s;
}

// Free road plus one vehicle ahead in the same lane, `gap0` metres away and
// `dv` m/s slower. Its future is included.
inline Scenario with_leader(double gap0, double dv, double v = 25.0, int horizon = 125) {
  Scenario s = free_road(v, horizon);
  s.scenario_id = "leader";
  s.neighbors[7] = cv_history(gap0, 5.625, v - dv, 2);
  s.neighbor_futures[7] = cv_future(gap0, 5.625, v - dv, 2, horizon);
  return s;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::path(LETSPI_TEST_TMP) / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace fixtures

#define EXPECT_LETSPI_ERROR(stmt, expected_code)                                  \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << letspi::to_string(expected_code);           \
    } catch (const letspi::Error& e__) {                                          \
      EXPECT_EQ(e__.code(), expected_code) << e__.what();                         \
    }                                                                             \
  } while (0)
