// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/config.hpp"
#include "dsa/error.hpp"
#include "dsa/geometry.hpp"
#include "dsa/trace.hpp"

namespace dsa {

inline constexpr double kDefaultIouThreshold = 0.5;

namespace detail {

// Indices of `dets` in descending score, ties kept in input order.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  return order;
}

inline std::string fixed(double v, int decimals) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << v;
  return out.str();
}

}  // namespace detail

// Greedy one-to-one matching: detections in descending score (ties by input
// order) each claim the unmatched ground truth of maximal IoU, provided the
// IoU reaches the threshold. Callers pass detections and truths of a single
// category. Result: per detection, the matched ground-truth index.
inline std::vector<std::optional<std::size_t>> match_detections(
    const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
    double iou_threshold) {
  std::vector<std::optional<std::size_t>> match(dets.size());
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t idx : detail::score_order(dets)) {
    double best_iou = 0.0;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      double v = iou(dets[idx].box, gts[j].box);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = j;
      }
    }
    if (best) {
      taken[*best] = true;
      match[idx] = best;
    }
  }
  return match;
}

// Per-image average precision of one category: area under the interpolated
// precision envelope of the ranked detections. Undefined (nullopt) when the
// image has no ground truth of the category, so empty frames do not dilute
// category means.
inline std::optional<double> average_precision(
    const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
    double iou_threshold) {
  if (gts.empty()) return std::nullopt;
  const auto match = match_detections(dets, gts, iou_threshold);
  const auto order = detail::score_order(dets);

  std::vector<double> precision(order.size());
  std::vector<double> recall(order.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (match[order[i]]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gts.size());
  }

  // Integrate the envelope right to left: each recall step contributes the
  // maximum precision attained at or beyond it.
  double ap = 0.0;
  double max_precision = 0.0;
  for (std::size_t i = order.size(); i-- > 0;) {
    max_precision = std::max(max_precision, precision[i]);
    double prev_recall = i == 0 ? 0.0 : recall[i - 1];
    ap += (recall[i] - prev_recall) * max_precision;
  }
  return ap;
}

inline std::vector<Detection> filter_category(const std::vector<Detection>& dets,
                                              int category) {
  std::vector<Detection> out;
  for (const auto& d : dets)
    if (d.category == category) out.push_back(d);
  return out;
}

inline std::vector<GroundTruth> filter_category(
    const std::vector<GroundTruth>& gts, int category) {
  std::vector<GroundTruth> out;
  for (const auto& gt : gts)
    if (gt.category == category) out.push_back(gt);
  return out;
}

// Per-image AP of one category on one frame under one stored configuration.
inline std::optional<double> frame_ap(const FrameRecord& frame,
                                      const ApproxConfig& config, int category,
                                      double iou_threshold) {
  return average_precision(filter_category(frame.outputs_for(config), category),
                           filter_category(frame.gts, category), iou_threshold);
}

// Mean of the defined per-image APs over all frames containing the category.
// Undefined when no frame contains it.
inline std::optional<double> category_map(const DetectionTrace& trace,
                                          const ApproxConfig& config,
                                          int category,
                                          double iou_threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  trace.for_each_frame([&](const FrameRecord& f) {
    auto ap = frame_ap(f, config, category, iou_threshold);
    if (ap) {
      sum += *ap;
      ++n;
    }
  });
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Mean AP pooled over every (frame, category present in the frame) pair.
inline std::optional<double> pooled_map(const DetectionTrace& trace,
                                        const ApproxConfig& config,
                                        double iou_threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  trace.for_each_frame([&](const FrameRecord& f) {
    std::set<int> cats;
    for (const auto& gt : f.gts) cats.insert(gt.category);
    for (int c : cats) {
      auto ap = frame_ap(f, config, c, iou_threshold);
      if (ap) {
        sum += *ap;
        ++n;
      }
    }
  });
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Per-configuration category mAP normalized by the baseline configuration's
// mAP, over the whole grid. Degenerate when the baseline mAP is zero or
// undefined; cells are then undefined.
struct ApGridReport {
  std::string detector;
  int category = 0;
  ConfigGrid grid = enumerate_grid();
  std::optional<double> baseline_map;
  bool degenerate = false;
  std::vector<std::optional<double>> normalized;  // by grid enumeration index

  // Rows = image heights descending, columns = proposal counts descending,
  // cells at 4 decimal places; undefined cells stay empty.
  std::string to_csv() const {
    std::ostringstream out;
    out << "height";
    for (int p : grid.proposals()) out << "," << p;
    out << "\n";
    std::size_t i = 0;
    for (int h : grid.heights()) {
      out << h;
      for (std::size_t c = 0; c < grid.proposals().size(); ++c, ++i) {
        out << ",";
        if (normalized[i]) out << detail::fixed(*normalized[i], 4);
      }
      out << "\n";
    }
    return out.str();
  }
};

inline ApGridReport normalized_ap_grid(const DetectionTrace& trace,
                                       int category, double iou_threshold) {
  trace.require_dense("normalized_ap_grid");
  ApGridReport report;
  report.detector = trace.detector;
  report.category = category;
  report.grid = trace.grid;
  report.normalized.assign(trace.grid.size(), std::nullopt);
  report.baseline_map =
      category_map(trace, trace.grid.baseline(), category, iou_threshold);
  if (!report.baseline_map || *report.baseline_map == 0.0) {
    report.degenerate = true;
    return report;
  }
  for (std::size_t i = 0; i < trace.grid.size(); ++i) {
    auto map = category_map(trace, trace.grid.configs()[i], category,
                            iou_threshold);
    report.normalized[i] = *map / *report.baseline_map;
  }
  return report;
}

}  // namespace dsa
