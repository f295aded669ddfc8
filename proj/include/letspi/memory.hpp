#pragma once

// Validated-experience store with weighted feature retrieval.
//
//   Sim(curr, mem) = 1 / (1 + D),   D = sum_k w_k d_k
//
// Corrected mode:     d_k = min(1, |f_curr - f_mem| / max(f_curr, eps))
// PaperLiteral mode:  d_k = 1 - min(1, ...)  (kept for fidelity runs; makes
//                     identical vectors maximally distant)
//
// Normalisation divides by the QUERY value, so Sim is not symmetric.
// Storage is an append-only JSON-lines file; the in-process vector is
// rebuilt on load.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "letspi/adjustment.hpp"
#include "letspi/error.hpp"
#include "letspi/safety.hpp"
#include "letspi/scenario.hpp"
#include "letspi/social_force.hpp"

namespace letspi::memory {

inline constexpr double kNoNeighborDistance = 1e6;  // stands in for +inf
inline constexpr double kEpsilon = 1e-5;

struct FeatureVector {
  double num_vehicles{1.0};
  double ego_speed0{0.0};
  bool lane_change{false};
  double min_nb_dist{kNoNeighborDistance};
  double avg_nb_dist{0.0};
  double avg_nb_speed{0.0};

  bool operator==(const FeatureVector&) const = default;
};

struct FeatureWeights {
  double num_vehicles{1.0};
  double ego_speed0{2.0};
  double lane_change{3.0};
  double min_nb_dist{2.5};
  double avg_nb_dist{1.5};
  double avg_nb_speed{1.0};

  double sum() const { return num_vehicles + ego_speed0 + lane_change + min_nb_dist + avg_nb_dist + avg_nb_speed; }
};

enum class DistanceMode { Corrected, PaperLiteral };

inline FeatureVector extract_features(const Scenario& s) {
  FeatureVector f;
  const VehicleState& ego = s.ego_now();
  f.num_vehicles = 1.0 + static_cast<double>(s.neighbors.size());
  f.ego_speed0 = ego.velocity().norm();
  const int ego_lane = s.lanes.lane_id_at(ego.y, ego.lane_id);
  const int goal_lane = s.lanes.lane_id_at(s.goal.y, ego_lane);
  f.lane_change = goal_lane != ego_lane;
  if (s.neighbors.empty()) return f;

  double sum_d = 0.0;
  double sum_v = 0.0;
  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& [id, hist] : s.neighbors) {
    const VehicleState& nb = hist.back();
    const double d = (nb.position() - ego.position()).norm();
    min_d = std::min(min_d, d);
    sum_d += d;
    sum_v += nb.velocity().norm();
  }
  const double n = static_cast<double>(s.neighbors.size());
  f.min_nb_dist = min_d;
  f.avg_nb_dist = sum_d / n;
  f.avg_nb_speed = sum_v / n;
  return f;
}

namespace detail {

inline double ratio_term(double curr, double mem, DistanceMode mode) {
  const double r = std::min(1.0, std::abs(curr - mem) / std::max(curr, kEpsilon));
  return mode == DistanceMode::Corrected ? r : 1.0 - r;
}

}  // namespace detail

inline double feature_distance(const FeatureVector& curr, const FeatureVector& mem, const FeatureWeights& w = {},
                               DistanceMode mode = DistanceMode::Corrected) {
  const double lane_term = mode == DistanceMode::Corrected
                               ? (curr.lane_change == mem.lane_change ? 0.0 : 1.0)
                               : detail::ratio_term(curr.lane_change ? 1.0 : 0.0, mem.lane_change ? 1.0 : 0.0, mode);
  double d = 0.0;
  d += w.num_vehicles * detail::ratio_term(curr.num_vehicles, mem.num_vehicles, mode);
  d += w.ego_speed0 * detail::ratio_term(curr.ego_speed0, mem.ego_speed0, mode);
  d += w.lane_change * lane_term;
  d += w.min_nb_dist * detail::ratio_term(curr.min_nb_dist, mem.min_nb_dist, mode);
  d += w.avg_nb_dist * detail::ratio_term(curr.avg_nb_dist, mem.avg_nb_dist, mode);
  d += w.avg_nb_speed * detail::ratio_term(curr.avg_nb_speed, mem.avg_nb_speed, mode);
  return d;
}

inline double similarity_from_distance(double d) { return 1.0 / (1.0 + d); }

inline double similarity(const FeatureVector& curr, const FeatureVector& mem, const FeatureWeights& w = {},
                         DistanceMode mode = DistanceMode::Corrected) {
  return similarity_from_distance(feature_distance(curr, mem, w, mode));
}

// ---------------------------------------------------------------------------
// Records

struct SafetySummary {
  double min_ttc{safety::kInf};
  double min_distance{safety::kInf};
  double pet{safety::kInf};
  bool collided{false};

  bool operator==(const SafetySummary&) const = default;
};

inline SafetySummary summarize(const safety::SafetyReport& r) {
  return {r.min_ttc, r.min_distance, r.pet, r.collided};
}

struct MemoryRecord {
  std::string scenario_id;
  FeatureVector features;
  sf::SfParams params;
  GoalAdjustment goal_adjustment{kNeutralAdjustment};
  SafetySummary safety;
  std::string guidance;
  std::string created_at;  // RFC 3339, UTC, microseconds; assigned on insert when empty
};

// ---------------------------------------------------------------------------
// RFC 3339 timestamps (UTC, microsecond resolution)

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace detail

inline std::string format_rfc3339(std::int64_t micros_since_epoch) {
  std::int64_t secs = micros_since_epoch / 1000000;
  std::int64_t us = micros_since_epoch % 1000000;
  if (us < 0) {
    us += 1000000;
    secs -= 1;
  }
  const auto tt = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(us));
  return buf;
}

/// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)" to microseconds
/// since the epoch; nullopt on malformed input.
inline std::optional<std::int64_t> parse_rfc3339(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6)
    return std::nullopt;
  std::size_t pos = static_cast<std::size_t>(consumed);
  std::int64_t us = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (digits < 6) us = us * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 6; ++i) us *= 10;
  }
  std::int64_t offset = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh = 0, om = 0;
    if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) return std::nullopt;
    offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size() || mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  const std::int64_t days = detail::days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  const std::int64_t total = days * 86400 + h * 3600 + mi * 60 + sec - offset;
  return total * 1000000 + us;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const FeatureVector& f) {
  return {{"num_vehicles", f.num_vehicles}, {"ego_speed0", f.ego_speed0},   {"lane_change", f.lane_change},
          {"min_nb_dist", f.min_nb_dist},   {"avg_nb_dist", f.avg_nb_dist}, {"avg_nb_speed", f.avg_nb_speed}};
}

inline nlohmann::json to_json(const sf::SfParams& p) {
  return {{"tau", p.tau},   {"k_np", p.k_np},
          {"k_nf", p.k_nf}, {"k_nl", p.k_nl},
          {"k_boundary", p.k_boundary}, {"k_cline", p.k_cline},
          {"r_col", p.r_col}};
}

inline nlohmann::json to_json(const MemoryRecord& r) {
  return {{"scenario_id", r.scenario_id},
          {"features", to_json(r.features)},
          {"params", to_json(r.params)},
          {"goal_adjustment",
           {{"longitudinal_factor", r.goal_adjustment.longitudinal_factor},
            {"lane_factor", r.goal_adjustment.lane_factor}}},
          {"safety",
           {{"min_ttc", safety::finite_or_null(r.safety.min_ttc)},
            {"min_distance", safety::finite_or_null(r.safety.min_distance)},
            {"pet", safety::finite_or_null(r.safety.pet)},
            {"collided", r.safety.collided}}},
          {"guidance", r.guidance},
          {"created_at", r.created_at}};
}

inline MemoryRecord record_from_json(const nlohmann::json& j) {
  MemoryRecord r;
  r.scenario_id = j.at("scenario_id").get<std::string>();
  const auto& f = j.at("features");
  r.features.num_vehicles = f.at("num_vehicles").get<double>();
  r.features.ego_speed0 = f.at("ego_speed0").get<double>();
  r.features.lane_change = f.at("lane_change").get<bool>();
  r.features.min_nb_dist = f.at("min_nb_dist").get<double>();
  r.features.avg_nb_dist = f.at("avg_nb_dist").get<double>();
  r.features.avg_nb_speed = f.at("avg_nb_speed").get<double>();
  const auto& p = j.at("params");
  r.params.tau = p.at("tau").get<double>();
  r.params.k_np = p.at("k_np").get<double>();
  r.params.k_nf = p.at("k_nf").get<double>();
  r.params.k_nl = p.at("k_nl").get<double>();
  r.params.k_boundary = p.at("k_boundary").get<double>();
  r.params.k_cline = p.at("k_cline").get<double>();
  r.params.r_col = p.value("r_col", sf::SfParams{}.r_col);
  const auto& g = j.at("goal_adjustment");
  r.goal_adjustment = {g.at("longitudinal_factor").get<double>(), g.at("lane_factor").get<double>()};
  const auto& s = j.at("safety");
  r.safety.min_ttc = safety::number_or_inf(s.at("min_ttc"));
  r.safety.min_distance = safety::number_or_inf(s.at("min_distance"));
  r.safety.pet = safety::number_or_inf(s.at("pet"));
  r.safety.collided = s.at("collided").get<bool>();
  r.guidance = j.value("guidance", "");
  r.created_at = j.value("created_at", "");
  return r;
}

// ---------------------------------------------------------------------------
// Store

struct Match {
  MemoryRecord record;
  double similarity{0.0};
};

struct StoreOptions {
  std::size_t capacity{1'000'000};
  double min_ttc{1.5};       // gate: reflection thresholds
  double min_distance{2.0};
  std::function<std::chrono::system_clock::time_point()> clock{[] { return std::chrono::system_clock::now(); }};
};

/// Single writer, many readers. `insert` appends one line to the backing
/// file (when there is one) before the record becomes visible to `top_k`.
class MemoryBank {
 public:
  explicit MemoryBank(StoreOptions options = {}) : options_(std::move(options)) {}

  /// Opens (or creates on first insert) a JSON-lines store at `path`.
  static MemoryBank open(const std::string& path, StoreOptions options = {}) {
    MemoryBank bank(std::move(options));
    bank.path_ = path;
    std::ifstream in(path);
    if (!in) return bank;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        MemoryRecord rec = record_from_json(nlohmann::json::parse(line));
        bank.append_loaded(std::move(rec));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoFailure, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return bank;
  }

  MemoryBank(const MemoryBank& other) {
    std::shared_lock lock(other.mutex_);
    options_ = other.options_;
    path_ = other.path_;
    records_ = other.records_;
    stamps_ = other.stamps_;
    last_stamp_ = other.last_stamp_;
  }
  MemoryBank& operator=(const MemoryBank&) = delete;

  bool admissible(const MemoryRecord& r) const {
    return !r.safety.collided && r.safety.min_ttc >= options_.min_ttc && r.safety.min_distance >= options_.min_distance;
  }

  /// Appends a validated record. Returns the stored copy (with created_at).
  MemoryRecord insert(MemoryRecord record) {
    if (!admissible(record))
      throw Error(ErrorCode::InvalidRecord, "record " + record.scenario_id + " does not meet the safety thresholds");
    std::unique_lock lock(mutex_);
    if (records_.size() >= options_.capacity) throw Error(ErrorCode::StorageFull, "memory capacity reached");
    std::int64_t stamp = 0;
    if (record.created_at.empty()) {
      stamp = std::chrono::duration_cast<std::chrono::microseconds>(options_.clock().time_since_epoch()).count();
      if (!records_.empty() && stamp <= last_stamp_) stamp = last_stamp_ + 1;
      record.created_at = format_rfc3339(stamp);
    } else {
      auto parsed = parse_rfc3339(record.created_at);
      if (!parsed) throw Error(ErrorCode::InvalidRecord, "bad created_at '" + record.created_at + "'");
      stamp = *parsed;
    }
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path_ + " for append");
      out << to_json(record).dump() << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::IoFailure, "write to " + path_ + " failed");
    }
    records_.push_back(record);
    stamps_.push_back(stamp);
    last_stamp_ = std::max(last_stamp_, stamp);
    return record;
  }

  std::vector<Match> top_k(const FeatureVector& query, std::size_t k, const FeatureWeights& w = {},
                           DistanceMode mode = DistanceMode::Corrected) const {
    if (k == 0) throw Error(ErrorCode::Precondition, "top_k: k must be >= 1");
    std::shared_lock lock(mutex_);
    struct Scored {
      std::size_t index;
      double sim;
    };
    std::vector<Scored> scored;
    scored.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
      scored.push_back({i, similarity(query, records_[i].features, w, mode)});
    const auto better = [&](const Scored& a, const Scored& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      if (stamps_[a.index] != stamps_[b.index]) return stamps_[a.index] > stamps_[b.index];
      if (records_[a.index].scenario_id != records_[b.index].scenario_id)
        return records_[a.index].scenario_id < records_[b.index].scenario_id;
      return a.index < b.index;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    std::vector<Match> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({records_[scored[i].index], scored[i].sim});
    return out;
  }

  std::vector<MemoryRecord> records() const {
    std::shared_lock lock(mutex_);
    return records_;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
  }

  const std::string& path() const { return path_; }

  /// In-memory copy holding the first floor(fraction * N) records (no file).
  MemoryBank prefix(double fraction) const {
    std::shared_lock lock(mutex_);
    MemoryBank out(options_);
    const double f = std::clamp(fraction, 0.0, 1.0);
    const auto n = static_cast<std::size_t>(std::floor(f * static_cast<double>(records_.size()) + 1e-9));
    for (std::size_t i = 0; i < n; ++i) out.append_loaded(records_[i]);
    return out;
  }

 private:
  void append_loaded(MemoryRecord rec) {
    auto stamp = parse_rfc3339(rec.created_at);
    if (!stamp) throw Error(ErrorCode::IoFailure, "record " + rec.scenario_id + " has bad created_at");
    records_.push_back(std::move(rec));
    stamps_.push_back(*stamp);
    last_stamp_ = std::max(last_stamp_, *stamp);
  }

  StoreOptions options_;
  std::string path_;
  mutable std::shared_mutex mutex_;
  std::vector<MemoryRecord> records_;
  std::vector<std::int64_t> stamps_;
  std::int64_t last_stamp_{std::numeric_limits<std::int64_t>::min()};
};

}  // namespace letspi::memory
