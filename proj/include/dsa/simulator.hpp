// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dsa/config.hpp"
#include "dsa/cost.hpp"
#include "dsa/error.hpp"
#include "dsa/metrics.hpp"
#include "dsa/policy.hpp"
#include "dsa/trace.hpp"

namespace dsa {

struct ConstantPolicy {
  ApproxConfig config;
};

// Pre-computed per-frame configurations in trace frame order, e.g. the
// dynamic oracle's schedule.
struct SchedulePolicy {
  std::vector<ApproxConfig> per_frame;
};

// Category-aware static policy applied with prior category knowledge (the
// frame's ground-truth categories select the mapped configuration).
struct StaticRuntimePolicy {
  StaticPolicy policy;
};

struct AutoFocusPolicy {
  AutoFocusModel model;
};

using SimPolicy = std::variant<ConstantPolicy, StaticRuntimePolicy,
                               SchedulePolicy, AutoFocusPolicy>;

// Outcome of replaying one trace under one policy. Total time accrues
// 1/fps(chosen) per frame plus the per-decision controller overhead of
// dynamic policies; accuracy comes from the outputs the chosen
// configurations would have produced.
struct StreamResult {
  std::string policy_name;
  std::string trace_id;
  std::vector<ApproxConfig> frame_configs;
  double baseline_seconds = 0;
  double total_seconds = 0;
  double speedup = 1.0;
  std::size_t decision_count = 0;  // regressor predictions
  double overhead_ms_per_decision = 0;
  double overhead_fraction_of_baseline_frame = 0;
  std::map<int, std::optional<double>> per_category_map;
  std::map<int, std::optional<double>> baseline_category_map;
  std::optional<double> pooled;
  std::optional<double> baseline_pooled;

  // (baseline mAP - policy mAP) / baseline mAP; undefined on a degenerate
  // baseline.
  std::optional<double> degradation(int category) const {
    auto base = baseline_category_map.find(category);
    auto got = per_category_map.find(category);
    if (base == baseline_category_map.end() ||
        got == per_category_map.end() || !base->second || !got->second ||
        *base->second == 0.0)
      return std::nullopt;
    return (*base->second - *got->second) / *base->second;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "policy,frames,total_seconds,baseline_seconds,speedup,decisions,"
           "overhead_ms_per_decision,overhead_fraction_of_baseline_frame\n";
    out << policy_name << "," << frame_configs.size() << ","
        << detail::fixed(total_seconds, 6) << ","
        << detail::fixed(baseline_seconds, 6) << ","
        << detail::fixed(speedup, 6) << "," << decision_count << ","
        << detail::fixed(overhead_ms_per_decision, 3) << ","
        << detail::fixed(overhead_fraction_of_baseline_frame, 6) << "\n";
    out << "category,map,baseline_map,degradation\n";
    for (const auto& [category, map] : per_category_map) {
      out << category << ",";
      if (map) out << detail::fixed(*map, 6);
      out << ",";
      auto base = baseline_category_map.at(category);
      if (base) out << detail::fixed(*base, 6);
      out << ",";
      if (auto d = degradation(category)) out << detail::fixed(*d, 6);
      out << "\n";
    }
    return out.str();
  }
};

inline StreamResult simulate_stream(const DetectionTrace& trace,
                                    const SimPolicy& policy,
                                    const CostModel& cost,
                                    double iou_threshold,
                                    std::string policy_name) {
  trace.require_dense("simulate_stream");
  if (auto* schedule = std::get_if<SchedulePolicy>(&policy))
    if (schedule->per_frame.size() != trace.frame_count())
      throw ValidationError("simulate_stream: schedule covers " +
                            std::to_string(schedule->per_frame.size()) +
                            " frames, trace has " +
                            std::to_string(trace.frame_count()));

  StreamResult result;
  result.policy_name = std::move(policy_name);
  result.trace_id = trace.identity();
  result.overhead_ms_per_decision = cost.overhead_ms_per_decision();
  result.overhead_fraction_of_baseline_frame =
      cost.overhead_ms_per_decision() / 1000.0 /
      cost.seconds_per_frame(trace.grid.baseline());

  const bool dynamic = std::holds_alternative<AutoFocusPolicy>(policy);
  std::size_t frame_index = 0;
  double frame_seconds = 0.0;
  for (const auto& video : trace.videos) {
    // Each video is its own stream: the controller cold-starts on it.
    ControllerState state = ControllerState::initial(trace.grid);
    for (const FrameRecord& frame : video) {
      ApproxConfig chosen = std::visit(
          [&](const auto& p) -> ApproxConfig {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantPolicy>) {
              return p.config;
            } else if constexpr (std::is_same_v<P, StaticRuntimePolicy>) {
              return p.policy.select(frame, cost, trace.grid);
            } else if constexpr (std::is_same_v<P, SchedulePolicy>) {
              return p.per_frame[frame_index];
            } else {
              return autofocus_decide(state, p.model, trace.grid);
            }
          },
          policy);
      if (!trace.grid.contains(chosen))
        throw std::logic_error("policy \"" + result.policy_name +
                               "\" chose off-grid config " + to_string(chosen));
      result.frame_configs.push_back(chosen);
      result.baseline_seconds +=
          cost.seconds_per_frame(trace.grid.baseline());
      frame_seconds += cost.seconds_per_frame(chosen);
      if (dynamic) state.observe(frame, frame.outputs_for(chosen));
      ++frame_index;
    }
    if (dynamic) result.decision_count += state.prediction_count;
  }
  result.total_seconds =
      frame_seconds + static_cast<double>(result.decision_count) *
                          cost.overhead_ms_per_decision() / 1000.0;
  result.speedup = result.baseline_seconds / result.total_seconds;

  // Accuracy of the observed outputs, per category and pooled.
  for (int category : trace.categories()) {
    double sum = 0.0, base_sum = 0.0;
    std::size_t n = 0;
    std::size_t i = 0;
    trace.for_each_frame([&](const FrameRecord& f) {
      if (auto ap =
              frame_ap(f, result.frame_configs[i], category, iou_threshold)) {
        sum += *ap;
        base_sum +=
            *frame_ap(f, trace.grid.baseline(), category, iou_threshold);
        ++n;
      }
      ++i;
    });
    result.per_category_map[category] =
        n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
    result.baseline_category_map[category] =
        n ? std::optional<double>(base_sum / static_cast<double>(n))
          : std::nullopt;
  }
  {
    double sum = 0.0, base_sum = 0.0;
    std::size_t n = 0;
    std::size_t i = 0;
    trace.for_each_frame([&](const FrameRecord& f) {
      std::set<int> cats;
      for (const auto& gt : f.gts) cats.insert(gt.category);
      for (int c : cats) {
        if (auto ap =
                frame_ap(f, result.frame_configs[i], c, iou_threshold)) {
          sum += *ap;
          base_sum += *frame_ap(f, trace.grid.baseline(), c, iou_threshold);
          ++n;
        }
      }
      ++i;
    });
    if (n) {
      result.pooled = sum / static_cast<double>(n);
      result.baseline_pooled = base_sum / static_cast<double>(n);
    }
  }
  return result;
}

// One Fig.-style comparison row: a policy evaluated for one category.
struct ComparisonRow {
  int category = 0;
  std::string policy;
  double speedup = 1.0;
  std::optional<double> map;
  std::optional<double> degradation;
};

struct ComparisonReport {
  std::string trace_id;
  std::string detector;
  std::vector<ComparisonRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out << "category,policy,speedup,map,degradation\n";
    for (const auto& r : rows) {
      out << r.category << "," << r.policy << ","
          << detail::fixed(r.speedup, 6) << ",";
      if (r.map) out << detail::fixed(*r.map, 6);
      out << ",";
      if (r.degradation) out << detail::fixed(*r.degradation, 6);
      out << "\n";
    }
    return out.str();
  }

  std::string to_table() const {
    std::ostringstream out;
    out << std::left << std::setw(10) << "category" << std::setw(20)
        << "policy" << std::setw(10) << "speedup" << std::setw(10) << "mAP"
        << std::setw(13) << "degradation" << "\n";
    for (const auto& r : rows) {
      out << std::left << std::setw(10) << r.category << std::setw(20)
          << r.policy << std::setw(10) << detail::fixed(r.speedup, 4)
          << std::setw(10)
          << (r.map ? detail::fixed(*r.map, 4) : std::string("-"))
          << std::setw(13)
          << (r.degradation ? detail::fixed(*r.degradation, 4)
                            : std::string("-"))
          << "\n";
    }
    return out.str();
  }
};

// A result entered into the comparison, restricted to one category when the
// policy was computed for that category only.
struct ComparisonEntry {
  std::string policy;
  std::optional<int> category_scope;
  StreamResult result;
};

inline ComparisonReport compare_report(const StreamResult& baseline,
                                       const std::vector<ComparisonEntry>& entries,
                                       std::string detector) {
  ComparisonReport report;
  report.trace_id = baseline.trace_id;
  report.detector = std::move(detector);
  for (const auto& e : entries)
    if (e.result.trace_id != baseline.trace_id)
      throw ValidationError("compare_report: result \"" + e.policy +
                            "\" was computed on a different trace (" +
                            e.result.trace_id + " vs " + baseline.trace_id +
                            ")");
  for (const auto& [category, base_map] : baseline.per_category_map) {
    for (const auto& e : entries) {
      if (e.category_scope && *e.category_scope != category) continue;
      ComparisonRow row;
      row.category = category;
      row.policy = e.policy;
      row.speedup = e.result.speedup;
      auto it = e.result.per_category_map.find(category);
      if (it != e.result.per_category_map.end()) row.map = it->second;
      row.degradation = e.result.degradation(category);
      report.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     if (a.category != b.category)
                       return a.category < b.category;
                     return a.policy < b.policy;
                   });
  return report;
}

}  // namespace dsa
