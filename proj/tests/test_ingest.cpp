#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "letspi/ingest.hpp"

using namespace letspi;
using namespace letspi::ingest;

namespace {

std::vector<TrackRow> straight_track(int id, int frames, double x0, double y, double v, int lane, int first = 0) {
  std::vector<TrackRow> rows;
  for (int f = 0; f < frames; ++f) rows.push_back({first + f, id, x0 + v * f * 0.04, y, v, 0.0, lane});
  return rows;
}

}  // namespace

TEST(Windowing, CountArithmetic) {
  const WindowSpec spec;
  EXPECT_EQ(window_count(400, spec), 11);
  EXPECT_EQ(window_count(199, spec), 0);
  EXPECT_EQ(window_count(200, spec), 1);
  EXPECT_EQ(window_count(219, spec), 1);
  EXPECT_EQ(window_count(220, spec), 2);
  for (int len = 0; len < 1000; ++len) {
    int brute = 0;
    for (int s = 0; s + 200 <= len; s += 20) ++brute;
    EXPECT_EQ(window_count(len, spec), brute) << len;
  }
}

TEST(Windowing, SegmentsSyntheticTracks) {
  const auto lanes = fixtures::three_lanes();
  auto rows = straight_track(1, 400, 0.0, 5.625, 25.0, 2);
  auto short_rows = straight_track(2, 199, 5000.0, 5.625, 25.0, 2);
  rows.insert(rows.end(), short_rows.begin(), short_rows.end());
  const auto r = segment_windows(rows, WindowSpec{}, lanes);
  EXPECT_EQ(r.scenarios.size(), 11u);
  EXPECT_EQ(r.short_tracks, 1u);
  EXPECT_EQ(r.invalid_windows, 0u);
  const auto& s = r.scenarios.front();
  EXPECT_EQ(s.scenario_id, "v1_f0");
  EXPECT_EQ(s.ego_history.size(), 75u);
  EXPECT_EQ(s.ego_future.size(), 125u);
  EXPECT_DOUBLE_EQ(s.ego_now().t, 0.0);
  EXPECT_NEAR(s.ego_history.front().t, -74 * 0.04, 1e-12);
  EXPECT_NEAR(s.ego_future.front().t, 0.04, 1e-12);
  EXPECT_DOUBLE_EQ(s.goal.x, s.ego_future.back().x);
  EXPECT_EQ(s.goal.horizon_frames, 125);
  EXPECT_EQ(r.scenarios[1].scenario_id, "v1_f20");
}

TEST(Windowing, GapsSplitRuns) {
  auto rows = straight_track(1, 210, 0.0, 5.625, 25.0, 2);
  auto later = straight_track(1, 210, 500.0, 5.625, 25.0, 2, 300);
  rows.insert(rows.end(), later.begin(), later.end());
  const auto r = segment_windows(rows, WindowSpec{}, fixtures::three_lanes());
  EXPECT_EQ(r.scenarios.size(), 2u);
}

TEST(Windowing, NeighborSelection) {
  const auto lanes = fixtures::three_lanes();
  auto rows = straight_track(1, 200, 0.0, 5.625, 25.0, 2);
  // 10 vehicles in the left lane at increasing distance, one too far.
  for (int k = 0; k < 10; ++k) {
    auto nb = straight_track(10 + k, 200, 10.0 * (k + 1), 9.375, 25.0, 3);
    rows.insert(rows.end(), nb.begin(), nb.end());
  }
  auto far = straight_track(50, 200, 150.0, 1.875, 25.0, 1);
  rows.insert(rows.end(), far.begin(), far.end());
  // Arrives late: missing history.
  auto late = straight_track(60, 150, 5.0, 1.875, 25.0, 1, 50);
  rows.insert(rows.end(), late.begin(), late.end());
  SegmentOptions opt;
  opt.ego_ids = std::set<int>{1};
  const auto r = segment_windows(rows, WindowSpec{}, lanes, opt);
  ASSERT_EQ(r.scenarios.size(), 1u);
  const auto& s = r.scenarios[0];
  EXPECT_EQ(s.neighbors.size(), 8u);
  EXPECT_TRUE(s.neighbors.count(10));
  EXPECT_TRUE(s.neighbors.count(17));
  EXPECT_FALSE(s.neighbors.count(18));
  EXPECT_FALSE(s.neighbors.count(50));
  EXPECT_FALSE(s.neighbors.count(60));
  EXPECT_EQ(s.neighbor_futures.at(10).size(), 125u);
}

TEST(Windowing, ConstantVelocityGoal) {
  SegmentOptions opt;
  opt.goal_mode = GoalMode::ConstantVelocity;
  const auto r = segment_windows(straight_track(1, 200, 0.0, 5.625, 20.0, 2), WindowSpec{}, fixtures::three_lanes(), opt);
  ASSERT_EQ(r.scenarios.size(), 1u);
  const auto& s = r.scenarios[0];
  EXPECT_NEAR(s.goal.x, s.ego_now().x + 20.0 * 5.0, 1e-9);
}

TEST(Csv, ParsesHighDColumnsInAnyOrder) {
  std::istringstream in(
      "laneId,xVelocity,id,frame,x,y,yVelocity,extra\n"
      "2,25.0,7,1,10.0,5.6,0.0,foo\n"
      "2,25.0,7,0,9.0,5.6,0.0,\"a,b\"\n"
      "3,20.0,3,0,1.0,9.3,-0.1,x\n");
  const auto rows = parse_tracks(in, {});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].vehicle_id, 3);
  EXPECT_EQ(rows[1].frame, 0);
  EXPECT_DOUBLE_EQ(rows[2].x, 10.0);
  EXPECT_DOUBLE_EQ(rows[0].vy, -0.1);
}

TEST(Csv, Errors) {
  {
    std::istringstream in("frame,id,x,y,xVelocity,yVelocity\n");
    EXPECT_LETSPI_ERROR(parse_tracks(in, {}), ErrorCode::MissingColumn);
  }
  {
    std::istringstream in("frame,id,x,y,xVelocity,yVelocity,laneId\n0,1,abc,0,0,0,1\n");
    try {
      parse_tracks(in, {});
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonNumericCell);
      EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
      EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
    }
  }
  {
    std::istringstream in("frame,id,x,y,xVelocity,yVelocity,laneId\n0,1,0,0,0,0,1\n0,1,1,0,0,0,1\n");
    EXPECT_LETSPI_ERROR(parse_tracks(in, {}), ErrorCode::DuplicateKey);
  }
}

TEST(Csv, CustomSchema) {
  std::istringstream in("t,vid,px,py,vx,vy,lane\n0,1,0,0,0,0,1\n");
  const auto schema = schema_from_json({{"frame", "t"}, {"vehicle_id", "vid"}, {"x", "px"}, {"y", "py"},
                                        {"vx", "vx"}, {"vy", "vy"}, {"lane_id", "lane"}});
  EXPECT_EQ(parse_tracks(in, schema).size(), 1u);
  EXPECT_LETSPI_ERROR(schema_from_json({{"x", 3}}), ErrorCode::ConfigError);
}

TEST(Sampling, SeededWithoutReplacement) {
  std::vector<Scenario> all(30);
  for (int i = 0; i < 30; ++i) all[static_cast<std::size_t>(i)].scenario_id = "s" + std::to_string(i);
  const auto a = sample_scenarios(all, 10, 42);
  const auto b = sample_scenarios(all, 10, 42);
  ASSERT_EQ(a.size(), 10u);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].scenario_id, b[i].scenario_id);
    ids.insert(a[i].scenario_id);
  }
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(sample_scenarios(all, 30, 1).size(), 30u);
  EXPECT_LETSPI_ERROR(sample_scenarios(all, 31, 1), ErrorCode::NTooLarge);
}

TEST(ScenarioJson, RoundTripThroughFile) {
  fixtures::TempDir dir("scenario_json");
  auto s = fixtures::with_leader(30.0, 5.0);
  s.ego_history[3].vy = 0.125;
  write_scenarios(dir.file("s.jsonl"), {s, fixtures::free_road()});
  const auto back = read_scenarios(dir.file("s.jsonl"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].scenario_id, s.scenario_id);
  EXPECT_EQ(back[0].ego_history, s.ego_history);
  EXPECT_EQ(back[0].neighbors, s.neighbors);
  EXPECT_EQ(back[0].neighbor_futures, s.neighbor_futures);
  EXPECT_EQ(back[0].goal, s.goal);
  EXPECT_EQ(back[0].lanes.boundary_lines, s.lanes.boundary_lines);
  EXPECT_EQ(back[0].lanes.lanes.size(), 3u);
}

TEST(Lanes, JsonRoundTrip) {
  const auto g = fixtures::three_lanes();
  const auto back = lanes_from_json(lanes_to_json(g));
  EXPECT_EQ(back.boundary_lines, g.boundary_lines);
  EXPECT_EQ(back.center_lines, g.center_lines);
  EXPECT_EQ(back.lane_id_at(5.0), 2);
}
