#pragma once

// Trajectory and time-space diagrams as CSV series plus a plain SVG
// rendering of each.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "letspi/adjustment.hpp"
#include "letspi/error.hpp"
#include "letspi/scenario.hpp"

namespace letspi::plots {

struct PlotInput {
  const Scenario* scenario{nullptr};
  Trajectory planned;
  TrajectoryMap neighbor_futures;  // what the plan was scored against
  std::string report_text;         // safety analysis panel, may be empty
};

struct PlotFiles {
  std::string trajectory_csv;
  std::string trajectory_svg;
  std::string timespace_csv;
  std::string timespace_svg;
};

namespace detail {

struct Series {
  std::string name;
  int vehicle_id{0};
  std::vector<VehicleState> states;
  std::string color;
  bool dashed{false};
};

inline std::vector<Series> collect(const PlotInput& in) {
  const Scenario& s = *in.scenario;
  constexpr int kEgo = 0;
  std::vector<Series> out;
  out.push_back({"past", kEgo, s.ego_history, "#444444", false});
  out.push_back({"planned", kEgo, in.planned.states, "#d62728", false});
  if (!s.ego_future.empty()) out.push_back({"ground_truth", kEgo, s.ego_future, "#2ca02c", true});
  for (const auto& [id, hist] : s.neighbors) {
    out.push_back({"neighbor_past", id, hist, "#1f77b4", false});
    auto it = in.neighbor_futures.find(id);
    if (it != in.neighbor_futures.end()) out.push_back({"neighbor_future", id, it->second.states, "#1f77b4", true});
  }
  return out;
}

inline std::string fmt(double v) { return text::num(v, 3); }

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

struct Frame {
  double x0, x1, y0, y1;  // data extents
  double w, h, pad;       // pixels

  double px(double x) const { return pad + (x - x0) / std::max(x1 - x0, 1e-9) * (w - 2 * pad); }
  double py(double y) const { return h - pad - (y - y0) / std::max(y1 - y0, 1e-9) * (h - 2 * pad); }
};

inline std::string polyline(const Frame& f, const std::vector<std::pair<double, double>>& pts, const std::string& color,
                            bool dashed) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"";
  if (dashed) s += " stroke-dasharray=\"5,3\"";
  s += " points=\"";
  for (const auto& [x, y] : pts) s += fmt(f.px(x)) + "," + fmt(f.py(y)) + " ";
  s += "\"/>\n";
  return s;
}

inline std::string svg_open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" font-family=\"monospace\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

}  // namespace detail

inline PlotFiles emit_plots(const PlotInput& in, const std::string& outdir) {
  if (!in.scenario) throw Error(ErrorCode::Precondition, "emit_plots: no scenario");
  const Scenario& s = *in.scenario;
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + outdir + ": " + ec.message());
  PlotFiles files{outdir + "/trajectory.csv", outdir + "/trajectory.svg", outdir + "/timespace.csv",
                  outdir + "/timespace.svg"};
  const auto series = detail::collect(in);

  // Trajectory diagram: x against y.
  std::string csv = "series,vehicle_id,t,x,y,vx,vy,lane_id\n";
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  for (const auto& se : series) {
    for (const auto& st : se.states) {
      csv += se.name + "," + std::to_string(se.vehicle_id) + "," + detail::fmt(st.t) + "," + detail::fmt(st.x) + "," +
             detail::fmt(st.y) + "," + detail::fmt(st.vx) + "," + detail::fmt(st.vy) + "," +
             std::to_string(st.lane_id) + "\n";
      x0 = std::min(x0, st.x);
      x1 = std::max(x1, st.x);
    }
  }
  detail::write_file(files.trajectory_csv, csv);

  const double y0 = s.lanes.boundary_lines.empty() ? -5.0 : s.lanes.y_lower() - 1.0;
  const double y1 = s.lanes.boundary_lines.empty() ? 5.0 : s.lanes.y_upper() + 1.0;
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
  std::vector<std::string> panel;
  if (!in.report_text.empty()) {
    std::size_t start = 0;
    while (start < in.report_text.size()) {
      const auto end = in.report_text.find('\n', start);
      panel.push_back(in.report_text.substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  const double plot_h = 260.0;
  const double total_h = plot_h + 20.0 + 14.0 * static_cast<double>(panel.size());
  detail::Frame f{x0, x1, y0, y1, 900.0, plot_h, 30.0};
  std::string svg = detail::svg_open(f.w, total_h);
  svg += "<text x=\"30\" y=\"18\">" + detail::xml_escape("Scenario " + s.scenario_id + ": trajectory diagram") + "</text>\n";
  for (double b : s.lanes.boundary_lines)
    svg += detail::polyline(f, {{x0, b}, {x1, b}}, "#000000", false);
  for (double c : s.lanes.center_lines) svg += detail::polyline(f, {{x0, c}, {x1, c}}, "#999999", true);
  for (const auto& se : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& st : se.states) pts.emplace_back(st.x, st.y);
    svg += detail::polyline(f, pts, se.color, se.dashed);
  }
  svg += detail::polyline(f, {{s.goal.x, s.goal.y - 0.4}, {s.goal.x, s.goal.y + 0.4}}, "#ff7f0e", false);
  for (std::size_t i = 0; i < panel.size(); ++i)
    svg += "<text x=\"30\" y=\"" + detail::fmt(plot_h + 20.0 + 14.0 * static_cast<double>(i)) + "\">" +
           detail::xml_escape(panel[i]) + "</text>\n";
  svg += "</svg>\n";
  detail::write_file(files.trajectory_svg, svg);

  // Time-space diagram: x against t, plus the per-frame gap to every neighbor.
  std::string ts = "frame,t,vehicle_id,x,gap_to_ego\n";
  const auto& plan = in.planned.states;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    ts += std::to_string(i + 1) + "," + detail::fmt(plan[i].t) + ",0," + detail::fmt(plan[i].x) + ",0.000\n";
    for (const auto& [id, fut] : in.neighbor_futures) {
      if (i >= fut.size()) continue;
      const auto& n = fut.states[i];
      ts += std::to_string(i + 1) + "," + detail::fmt(n.t) + "," + std::to_string(id) + "," + detail::fmt(n.x) + "," +
            detail::fmt(n.x - plan[i].x) + "\n";
    }
  }
  detail::write_file(files.timespace_csv, ts);

  double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
  for (const auto& se : series)
    for (const auto& st : se.states) {
      t0 = std::min(t0, st.t);
      t1 = std::max(t1, st.t);
    }
  if (!std::isfinite(t0)) t0 = 0.0, t1 = 1.0;
  detail::Frame g{t0, t1, x0, x1, 900.0, 400.0, 30.0};
  std::string svg2 = detail::svg_open(g.w, g.h);
  svg2 += "<text x=\"30\" y=\"18\">" + detail::xml_escape("Scenario " + s.scenario_id + ": time-space diagram") + "</text>\n";
  for (const auto& se : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& st : se.states) pts.emplace_back(st.t, st.x);
    svg2 += detail::polyline(g, pts, se.color, se.dashed);
  }
  svg2 += "</svg>\n";
  detail::write_file(files.timespace_svg, svg2);
  return files;
}

}  // namespace letspi::plots
