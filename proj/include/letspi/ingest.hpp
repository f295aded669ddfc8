#pragma once

// Track CSV loading, lane sidecars, sliding-window segmentation and
// seeded sampling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/scenario.hpp"

namespace letspi::ingest {

struct TrackRow {
  std::int64_t frame{0};
  int vehicle_id{0};
  double x{0.0};
  double y{0.0};
  double vx{0.0};
  double vy{0.0};
  int lane_id{0};

  bool operator==(const TrackRow&) const = default;
};

/// Logical field -> CSV column name. Defaults are the HighD track columns.
struct ColumnSchema {
  std::string frame{"frame"};
  std::string vehicle_id{"id"};
  std::string x{"x"};
  std::string y{"y"};
  std::string vx{"xVelocity"};
  std::string vy{"yVelocity"};
  std::string lane_id{"laneId"};
};

inline ColumnSchema schema_from_json(const nlohmann::json& j) {
  ColumnSchema s;
  auto take = [&](const char* key, std::string& field) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_string()) throw Error(ErrorCode::ConfigError, std::string("schema field '") + key + "' must be a string");
      field = it->get<std::string>();
    }
  };
  take("frame", s.frame);
  take("vehicle_id", s.vehicle_id);
  take("x", s.x);
  take("y", s.y);
  take("vx", s.vx);
  take("vy", s.vy);
  take("lane_id", s.lane_id);
  return s;
}

inline ColumnSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DatasetError, "cannot open schema " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigError, "schema " + path + " is not a JSON object");
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

/// Splits one CSV record; handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline std::optional<double> to_double(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> to_int(const std::string& cell) {
  auto v = to_double(cell);
  if (!v || *v != std::floor(*v) || std::abs(*v) > 9e15) return std::nullopt;
  return static_cast<std::int64_t>(*v);
}

}  // namespace detail

inline std::vector<TrackRow> parse_tracks(std::istream& in, const ColumnSchema& schema, const std::string& label = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, label + ": empty file, no header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw Error(ErrorCode::MissingColumn, label + ": missing column '" + name + "'");
  };
  const std::size_t c_frame = col(schema.frame), c_id = col(schema.vehicle_id), c_x = col(schema.x),
                    c_y = col(schema.y), c_vx = col(schema.vx), c_vy = col(schema.vy), c_lane = col(schema.lane_id);

  std::vector<TrackRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || detail::trim(line) == "\r") continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](std::size_t c, const std::string& name) -> const std::string& {
      if (c >= cells.size())
        throw Error(ErrorCode::NonNumericCell, label + ": row " + std::to_string(lineno) + ", column '" + name + "' is empty");
      return cells[c];
    };
    auto num = [&](std::size_t c, const std::string& name) {
      auto v = detail::to_double(cell(c, name));
      if (!v) throw Error(ErrorCode::NonNumericCell, label + ": row " + std::to_string(lineno) + ", column '" + name + "'");
      return *v;
    };
    auto integer = [&](std::size_t c, const std::string& name) {
      auto v = detail::to_int(cell(c, name));
      if (!v) throw Error(ErrorCode::NonNumericCell, label + ": row " + std::to_string(lineno) + ", column '" + name + "'");
      return *v;
    };
    TrackRow r;
    r.frame = integer(c_frame, schema.frame);
    r.vehicle_id = static_cast<int>(integer(c_id, schema.vehicle_id));
    r.x = num(c_x, schema.x);
    r.y = num(c_y, schema.y);
    r.vx = num(c_vx, schema.vx);
    r.vy = num(c_vy, schema.vy);
    r.lane_id = static_cast<int>(integer(c_lane, schema.lane_id));
    if (r.frame < 0) throw Error(ErrorCode::NonNumericCell, label + ": row " + std::to_string(lineno) + ", negative frame");
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(), [](const TrackRow& a, const TrackRow& b) {
    return a.vehicle_id != b.vehicle_id ? a.vehicle_id < b.vehicle_id : a.frame < b.frame;
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].vehicle_id == rows[i - 1].vehicle_id && rows[i].frame == rows[i - 1].frame)
      throw Error(ErrorCode::DuplicateKey, label + ": duplicate (frame " + std::to_string(rows[i].frame) + ", id " +
                                               std::to_string(rows[i].vehicle_id) + ")");
  }
  return rows;
}

inline std::vector<TrackRow> load_tracks(const std::string& path, const ColumnSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DatasetError, "cannot open " + path);
  return parse_tracks(in, schema, path);
}

// ---------------------------------------------------------------------------
// Lane sidecar

inline LaneGeometry lanes_from_json(const nlohmann::json& j) {
  LaneGeometry g;
  try {
    g.lane_width = j.at("lane_width").get<double>();
    g.boundary_lines = j.at("boundaries").get<std::vector<double>>();
    g.center_lines = j.value("centers", std::vector<double>{});
    for (const auto& l : j.value("lanes", nlohmann::json::array()))
      g.lanes.push_back({l.at("id").get<int>(), l.at("y_min").get<double>(), l.at("y_max").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DatasetError, std::string("lane sidecar: ") + e.what());
  }
  std::sort(g.lanes.begin(), g.lanes.end(), [](const LaneSpan& a, const LaneSpan& b) { return a.y_min < b.y_min; });
  if (g.boundary_lines.size() < 2) throw Error(ErrorCode::DatasetError, "lane sidecar: need two boundaries");
  if (!(g.lane_width > 0.0)) throw Error(ErrorCode::DatasetError, "lane sidecar: lane_width must be positive");
  return g;
}

inline nlohmann::json lanes_to_json(const LaneGeometry& g) {
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& l : g.lanes) lanes.push_back({{"id", l.id}, {"y_min", l.y_min}, {"y_max", l.y_max}});
  return {{"lane_width", g.lane_width}, {"boundaries", g.boundary_lines}, {"centers", g.center_lines}, {"lanes", lanes}};
}

inline LaneGeometry load_lanes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DatasetError, "cannot open lane sidecar " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::DatasetError, "lane sidecar " + path + " is not JSON");
  return lanes_from_json(j);
}

// ---------------------------------------------------------------------------
// Segmentation

struct WindowSpec {
  int history_frames{75};
  int future_frames{125};
  int stride{20};

  int total() const { return history_frames + future_frames; }
};

enum class GoalMode { GroundTruth, ConstantVelocity };

struct SegmentOptions {
  double dt{kHighDTimestep};
  bool neighbor_full_window{false};  // require presence and proximity over all frames, not just t=0
  GoalMode goal_mode{GoalMode::GroundTruth};
  std::optional<std::set<int>> ego_ids;  // restrict ego candidates
};

struct SegmentResult {
  std::vector<Scenario> scenarios;
  std::size_t short_tracks{0};     // candidate egos with no run of total() frames
  std::size_t invalid_windows{0};  // windows dropped by validate_scenario
};

/// Number of windows a run of `length` consecutive frames yields.
inline int window_count(int length, const WindowSpec& spec) {
  if (length < spec.total() || spec.stride <= 0) return 0;
  return (length - spec.total()) / spec.stride + 1;
}

namespace detail {

inline VehicleState to_state(const TrackRow& r, double t) { return {t, r.x, r.y, r.vx, r.vy, r.lane_id}; }

}  // namespace detail

inline SegmentResult segment_windows(const std::vector<TrackRow>& rows, const WindowSpec& spec,
                                     const LaneGeometry& lanes, const SegmentOptions& opt = {}) {
  SegmentResult out;
  if (spec.history_frames < 1 || spec.future_frames < 0 || spec.stride < 1)
    throw Error(ErrorCode::Precondition, "segment_windows: bad window spec");

  std::map<int, std::vector<const TrackRow*>> tracks;  // sorted by frame within each vehicle
  std::unordered_map<std::int64_t, std::vector<const TrackRow*>> by_frame;
  for (const auto& r : rows) {
    tracks[r.vehicle_id].push_back(&r);
    by_frame[r.frame].push_back(&r);
  }
  for (auto& [id, t] : tracks)
    std::sort(t.begin(), t.end(), [](const TrackRow* a, const TrackRow* b) { return a->frame < b->frame; });

  // Per-vehicle frame lookup for neighbor histories.
  std::unordered_map<int, std::unordered_map<std::int64_t, const TrackRow*>> at;
  for (const auto& [id, t] : tracks)
    for (const TrackRow* r : t) at[id][r->frame] = r;

  const int H = spec.history_frames;
  const int F = spec.future_frames;
  for (const auto& [ego_id, track] : tracks) {
    if (opt.ego_ids && !opt.ego_ids->count(ego_id)) continue;
    bool any = false;
    std::size_t run_begin = 0;
    for (std::size_t i = 1; i <= track.size(); ++i) {
      if (i < track.size() && track[i]->frame == track[i - 1]->frame + 1) continue;
      const int run_len = static_cast<int>(i - run_begin);
      const int n = window_count(run_len, spec);
      for (int w = 0; w < n; ++w) {
        any = true;
        const std::size_t s0 = run_begin + static_cast<std::size_t>(w * spec.stride);
        const std::int64_t start = track[s0]->frame;
        const std::int64_t now = start + H - 1;
        auto t_of = [&](std::int64_t f) { return static_cast<double>(f - now) * opt.dt; };

        Scenario sc;
        sc.scenario_id = "v" + std::to_string(ego_id) + "_f" + std::to_string(start);
        sc.lanes = lanes;
        sc.dt = opt.dt;
        for (int k = 0; k < H; ++k) sc.ego_history.push_back(detail::to_state(*track[s0 + k], t_of(start + k)));
        for (int k = H; k < H + F; ++k) sc.ego_future.push_back(detail::to_state(*track[s0 + k], t_of(start + k)));
        const VehicleState& ego0 = sc.ego_history.back();
        if (opt.goal_mode == GoalMode::GroundTruth && !sc.ego_future.empty()) {
          sc.goal = {sc.ego_future.back().x, sc.ego_future.back().y, F};
        } else {
          const double T = F * opt.dt;
          double gy = ego0.y;
          if (lanes.boundary_lines.size() >= 2)
            gy = std::clamp(gy, lanes.y_lower() + 0.05, lanes.y_upper() - 0.05);
          sc.goal = {ego0.x + ego0.vx * T, gy, F};
        }

        // Neighbor candidates: everyone present at t=0 with a complete history.
        std::vector<std::pair<double, int>> near;
        auto frame_it = by_frame.find(now);
        if (frame_it != by_frame.end()) {
          for (const TrackRow* r : frame_it->second) {
            if (r->vehicle_id == ego_id) continue;
            const double d = std::hypot(r->x - ego0.x, r->y - ego0.y);
            if (!(d <= kNeighborRadius)) continue;
            const auto& nb_at = at[r->vehicle_id];
            bool ok = true;
            for (std::int64_t f = start; f <= now && ok; ++f) ok = nb_at.count(f) > 0;
            if (ok && opt.neighbor_full_window) {
              for (std::int64_t f = start; f < start + H + F && ok; ++f) {
                auto it = nb_at.find(f);
                const auto eit = at[ego_id].find(f);
                ok = it != nb_at.end() &&
                     std::hypot(it->second->x - eit->second->x, it->second->y - eit->second->y) <= kNeighborRadius;
              }
            }
            if (ok) near.emplace_back(d, r->vehicle_id);
          }
        }
        std::sort(near.begin(), near.end());
        if (near.size() > kMaxNeighbors) near.resize(kMaxNeighbors);
        for (const auto& [d, nid] : near) {
          const auto& nb_at = at[nid];
          History h;
          for (std::int64_t f = start; f <= now; ++f) h.push_back(detail::to_state(*nb_at.at(f), t_of(f)));
          sc.neighbors.emplace(nid, std::move(h));
          History fut;
          for (std::int64_t f = now + 1; f <= now + F; ++f) {
            auto it = nb_at.find(f);
            if (it == nb_at.end()) break;
            fut.push_back(detail::to_state(*it->second, t_of(f)));
          }
          if (!fut.empty()) sc.neighbor_futures.emplace(nid, std::move(fut));
        }

        if (validate_scenario(sc).ok()) out.scenarios.push_back(std::move(sc));
        else ++out.invalid_windows;
      }
      run_begin = i;
    }
    if (!any) ++out.short_tracks;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// Seeded sample without replacement (partial Fisher-Yates).
inline std::vector<Scenario> sample_scenarios(const std::vector<Scenario>& scenarios, std::size_t n,
                                              std::uint64_t seed) {
  if (n > scenarios.size())
    throw Error(ErrorCode::NTooLarge, "requested " + std::to_string(n) + " of " + std::to_string(scenarios.size()));
  std::vector<std::size_t> idx(scenarios.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scenarios[idx[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario JSON (one object per line in scenarios.jsonl)

inline nlohmann::json state_to_json(const VehicleState& s) { return {s.t, s.x, s.y, s.vx, s.vy, s.lane_id}; }

inline VehicleState state_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>(), j.at(4).get<double>(), j.at(5).get<int>()};
}

inline nlohmann::json history_to_json(const History& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& s : h) a.push_back(state_to_json(s));
  return a;
}

inline History history_from_json(const nlohmann::json& j) {
  History h;
  for (const auto& s : j) h.push_back(state_from_json(s));
  return h;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json nbs = nlohmann::json::object();
  for (const auto& [id, h] : s.neighbors) nbs[std::to_string(id)] = history_to_json(h);
  nlohmann::json futs = nlohmann::json::object();
  for (const auto& [id, h] : s.neighbor_futures) futs[std::to_string(id)] = history_to_json(h);
  return {{"scenario_id", s.scenario_id},
          {"dt", s.dt},
          {"lanes", lanes_to_json(s.lanes)},
          {"goal", {{"x", s.goal.x}, {"y", s.goal.y}, {"horizon_frames", s.goal.horizon_frames}}},
          {"ego_history", history_to_json(s.ego_history)},
          {"neighbors", nbs},
          {"ego_future", history_to_json(s.ego_future)},
          {"neighbor_futures", futs}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.dt = j.at("dt").get<double>();
  s.lanes = lanes_from_json(j.at("lanes"));
  const auto& g = j.at("goal");
  s.goal = {g.at("x").get<double>(), g.at("y").get<double>(), g.at("horizon_frames").get<int>()};
  s.ego_history = history_from_json(j.at("ego_history"));
  for (const auto& [k, v] : j.at("neighbors").items()) s.neighbors.emplace(std::stoi(k), history_from_json(v));
  s.ego_future = history_from_json(j.value("ego_future", nlohmann::json::array()));
  const auto futs = j.value("neighbor_futures", nlohmann::json::object());
  for (const auto& [k, v] : futs.items()) s.neighbor_futures.emplace(std::stoi(k), history_from_json(v));
  return s;
}

inline void write_scenarios(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  for (const auto& s : scenarios) out << scenario_to_json(s).dump() << '\n';
}

inline std::vector<Scenario> read_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DatasetError, "cannot open " + path);
  std::vector<Scenario> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(scenario_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::DatasetError, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace letspi::ingest
