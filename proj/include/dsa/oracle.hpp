// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/config.hpp"
#include "dsa/cost.hpp"
#include "dsa/error.hpp"
#include "dsa/metrics.hpp"
#include "dsa/trace.hpp"

namespace dsa {

// Configurations of one frame whose per-image AP is at least the baseline's.
// Frames without ground truth of the category are metric-neutral: every
// configuration is safe there.
struct SafeSet {
  std::string video;
  int frame = 0;
  bool metric_neutral = false;
  std::optional<double> baseline_ap;
  ConfigSet members;
};

namespace detail {

inline void require_frame_dense(const FrameRecord& frame,
                                const ConfigGrid& grid, const char* op) {
  if (!frame.covers(grid))
    throw ValidationError(std::string(op) + ": video \"" + frame.video +
                          "\" frame " + std::to_string(frame.frame) +
                          " is sparse (does not cover the grid)");
}

// FPS argmax with ties broken toward the larger height, then the larger
// proposal count. Candidates arrive in grid enumeration order, which is
// exactly that tie order, so the first strict maximum wins.
inline ApproxConfig fastest_config(const std::vector<ApproxConfig>& candidates,
                                   const CostModel& cost) {
  ApproxConfig best = candidates.front();
  double best_fps = cost.fps(best);
  for (const ApproxConfig& c : candidates) {
    double f = cost.fps(c);
    if (f > best_fps) {
      best = c;
      best_fps = f;
    }
  }
  return best;
}

}  // namespace detail

inline SafeSet safe_set(const FrameRecord& frame, const ConfigGrid& grid,
                        int category, double iou_threshold) {
  detail::require_frame_dense(frame, grid, "safe_set");
  SafeSet result;
  result.video = frame.video;
  result.frame = frame.frame;
  result.baseline_ap = frame_ap(frame, grid.baseline(), category, iou_threshold);
  if (!result.baseline_ap) {
    result.metric_neutral = true;
    result.members.insert(grid.configs().begin(), grid.configs().end());
    return result;
  }
  for (const ApproxConfig& c : grid.configs()) {
    auto ap = frame_ap(frame, c, category, iou_threshold);
    if (*ap >= *result.baseline_ap) result.members.insert(c);
  }
  return result;
}

// The fastest safe configuration of one frame for one category.
inline ApproxConfig optimal_config(const FrameRecord& frame,
                                   const ConfigGrid& grid, int category,
                                   const CostModel& cost,
                                   double iou_threshold) {
  SafeSet safe = safe_set(frame, grid, category, iou_threshold);
  std::vector<ApproxConfig> members(safe.members.begin(), safe.members.end());
  return detail::fastest_config(members, cost);
}

// The fastest configuration safe for every category present in the frame;
// the whole grid when the frame has no ground truth at all.
inline ApproxConfig frame_optimal_config(const FrameRecord& frame,
                                         const ConfigGrid& grid,
                                         const CostModel& cost,
                                         double iou_threshold) {
  detail::require_frame_dense(frame, grid, "frame_optimal_config");
  std::set<int> cats;
  for (const auto& gt : frame.gts) cats.insert(gt.category);
  std::vector<ApproxConfig> members(grid.configs().begin(),
                                    grid.configs().end());
  for (int cat : cats) {
    SafeSet safe = safe_set(frame, grid, cat, iou_threshold);
    std::erase_if(members, [&](const ApproxConfig& c) {
      return safe.members.count(c) == 0;
    });
  }
  return detail::fastest_config(members, cost);
}

// How much of a frame population is optimally served by its k most popular
// optimal configurations, for growing k.
struct CoverageCurve {
  std::vector<ApproxConfig> ranking;          // by frame count descending
  std::vector<std::pair<int, double>> points;  // (k, coverage)

  std::string to_csv() const {
    std::ostringstream out;
    out << "k,coverage\n";
    for (const auto& [k, coverage] : points)
      out << k << "," << detail::fixed(coverage, 6) << "\n";
    return out.str();
  }
};

inline CoverageCurve coverage_curve(
    const std::vector<const FrameRecord*>& frames, const ConfigGrid& grid,
    int category, const CostModel& cost, double iou_threshold) {
  if (frames.empty())
    throw ValidationError("coverage_curve: empty frame list");
  std::map<ApproxConfig, std::size_t, GridOrder> counts;
  for (const FrameRecord* f : frames)
    ++counts[optimal_config(*f, grid, category, cost, iou_threshold)];

  // Rank by frame count descending; the map already orders ties by lattice
  // enumeration order, and stable_sort keeps it that way.
  std::vector<std::pair<ApproxConfig, std::size_t>> ranked(counts.begin(),
                                                           counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });

  CoverageCurve curve;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    covered += ranked[i].second;
    curve.ranking.push_back(ranked[i].first);
    curve.points.emplace_back(static_cast<int>(i + 1),
                              static_cast<double>(covered) /
                                  static_cast<double>(frames.size()));
  }
  return curve;
}

// Limit study of one category: the per-frame (dynamic) and single-config
// (static) oracles, with speedups accounted as total stream time against
// always-baseline.
struct OracleCategoryRow {
  int category = 0;
  std::optional<double> baseline_map;
  bool degenerate = false;  // baseline mAP zero or undefined
  ApproxConfig static_config;
  double static_speedup = 1.0;
  std::optional<double> static_map;
  double dynamic_speedup = 1.0;
  std::optional<double> dynamic_map;
  std::vector<ApproxConfig> per_frame_optimal;  // trace frame order
};

struct OracleReport {
  std::string detector;
  std::string trace_id;
  std::vector<OracleCategoryRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out << "category,baseline_map,degenerate,static_height,static_proposals,"
           "static_speedup,static_map,dynamic_speedup,dynamic_map\n";
    for (const auto& r : rows) {
      out << r.category << ",";
      if (r.baseline_map) out << detail::fixed(*r.baseline_map, 6);
      out << "," << (r.degenerate ? 1 : 0) << "," << r.static_config.image_height
          << "," << r.static_config.proposal_count << ","
          << detail::fixed(r.static_speedup, 6) << ",";
      if (r.static_map) out << detail::fixed(*r.static_map, 6);
      out << "," << detail::fixed(r.dynamic_speedup, 6) << ",";
      if (r.dynamic_map) out << detail::fixed(*r.dynamic_map, 6);
      out << "\n";
    }
    return out.str();
  }

  std::string to_table() const {
    std::ostringstream out;
    out << std::left << std::setw(10) << "category" << std::setw(14)
        << "baseline mAP" << std::setw(14) << "static cfg" << std::setw(16)
        << "static speedup" << std::setw(17) << "dynamic speedup"
        << "\n";
    for (const auto& r : rows) {
      out << std::left << std::setw(10) << r.category << std::setw(14)
          << (r.baseline_map ? detail::fixed(*r.baseline_map, 4)
                             : std::string("undefined"))
          << std::setw(14) << to_string(r.static_config) << std::setw(16)
          << detail::fixed(r.static_speedup, 4) << std::setw(17)
          << detail::fixed(r.dynamic_speedup, 4)
          << (r.degenerate ? " [degenerate]" : "") << "\n";
    }
    return out.str();
  }

  bool any_degenerate() const {
    return std::any_of(rows.begin(), rows.end(),
                       [](const auto& r) { return r.degenerate; });
  }
};

inline OracleCategoryRow limit_study_category(const DetectionTrace& trace,
                                              const CostModel& cost,
                                              int category,
                                              double iou_threshold) {
  OracleCategoryRow row;
  row.category = category;
  const ApproxConfig baseline = trace.grid.baseline();
  row.baseline_map = category_map(trace, baseline, category, iou_threshold);
  row.degenerate = !row.baseline_map || *row.baseline_map == 0.0;

  // Static oracle: fastest single configuration whose category mAP does not
  // fall below the baseline's.
  std::vector<ApproxConfig> feasible;
  for (const ApproxConfig& c : trace.grid.configs()) {
    auto map = category_map(trace, c, category, iou_threshold);
    bool safe = !row.baseline_map || (map && *map >= *row.baseline_map);
    if (safe) feasible.push_back(c);
  }
  if (feasible.empty()) feasible.push_back(baseline);
  row.static_config = detail::fastest_config(feasible, cost);
  row.static_map = category_map(trace, row.static_config, category,
                                iou_threshold);

  double baseline_seconds = 0.0;
  double static_seconds = 0.0;
  double dynamic_seconds = 0.0;
  double dynamic_ap_sum = 0.0;
  std::size_t dynamic_ap_n = 0;
  trace.for_each_frame([&](const FrameRecord& f) {
    ApproxConfig chosen =
        optimal_config(f, trace.grid, category, cost, iou_threshold);
    row.per_frame_optimal.push_back(chosen);
    baseline_seconds += cost.seconds_per_frame(baseline);
    static_seconds += cost.seconds_per_frame(row.static_config);
    dynamic_seconds += cost.seconds_per_frame(chosen);
    if (auto ap = frame_ap(f, chosen, category, iou_threshold)) {
      dynamic_ap_sum += *ap;
      ++dynamic_ap_n;
    }
  });
  row.static_speedup = baseline_seconds / static_seconds;
  row.dynamic_speedup = baseline_seconds / dynamic_seconds;
  if (dynamic_ap_n > 0)
    row.dynamic_map = dynamic_ap_sum / static_cast<double>(dynamic_ap_n);
  return row;
}

inline OracleReport limit_study(const DetectionTrace& trace,
                                const CostModel& cost, double iou_threshold) {
  trace.require_dense("limit_study");
  if (trace.frame_count() == 0)
    throw ValidationError("limit_study: trace has no frames");
  OracleReport report;
  report.detector = cost.detector();
  report.trace_id = trace.identity();
  for (int category : trace.categories())
    report.rows.push_back(
        limit_study_category(trace, cost, category, iou_threshold));
  return report;
}

}  // namespace dsa
