// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/config.hpp"
#include "dsa/error.hpp"
#include "dsa/metrics.hpp"

namespace dsa {

inline constexpr double kDefaultOverheadMs = 3.2;

namespace detail {

// Measured Tegra X1 throughput tables. Rows are image heights ascending
// 80..480, columns are proposal counts 300, 200, 100, 50, 10.
inline constexpr int kTableHeights[11] = {80,  120, 160, 200, 240, 280,
                                          320, 360, 400, 440, 480};
inline constexpr int kTableProposals[5] = {300, 200, 100, 50, 10};

inline constexpr double kFasterRcnnFps[11][5] = {
    {8.98, 9.22, 9.26, 9.76, 17.88},  // 80
    {5.89, 5.73, 5.13, 9.37, 16.18},  // 120
    {4.12, 3.42, 4.76, 8.28, 13.70},  // 160
    {3.25, 3.31, 4.45, 7.27, 10.65},  // 200
    {3.03, 3.08, 4.14, 6.53, 9.14},   // 240
    {2.85, 2.92, 3.80, 5.72, 7.53},   // 280
    {2.65, 2.71, 3.47, 4.81, 6.37},   // 320
    {2.56, 2.57, 3.27, 4.51, 5.74},   // 360
    {2.36, 2.39, 2.94, 3.99, 5.01},   // 400
    {2.21, 2.25, 2.74, 3.66, 4.42},   // 440
    {2.08, 2.11, 2.54, 3.28, 3.91},   // 480
};

inline constexpr double kRfcnFps[11][5] = {
    {12.56, 13.12, 13.25, 13.02, 13.04},  // 80
    {11.39, 11.12, 11.37, 10.97, 11.51},  // 120
    {7.61, 7.73, 7.71, 7.85, 7.64},       // 160
    {5.36, 5.35, 5.50, 5.49, 5.45},       // 200
    {4.28, 4.35, 4.39, 4.37, 4.41},       // 240
    {3.26, 3.30, 3.32, 3.34, 3.34},       // 280
    {2.64, 2.66, 2.66, 2.67, 2.69},       // 320
    {2.18, 2.19, 2.21, 2.22, 2.21},       // 360
    {1.73, 1.74, 1.75, 1.75, 1.76},       // 400
    {1.45, 1.47, 1.48, 1.48, 1.48},       // 440
    {1.27, 1.29, 1.29, 1.30, 1.30},       // 480
};

}  // namespace detail

// Per-configuration throughput of one detector, plus the per-decision
// controller overhead charged to dynamic policies.
class CostModel {
 public:
  CostModel(std::string detector, ConfigGrid grid,
            std::vector<double> fps_by_index,
            double overhead_ms = kDefaultOverheadMs)
      : detector_(std::move(detector)),
        grid_(std::move(grid)),
        fps_(std::move(fps_by_index)),
        overhead_ms_(overhead_ms) {
    if (fps_.size() != grid_.size())
      throw ValidationError("cost model for \"" + detector_ + "\" covers " +
                            std::to_string(fps_.size()) + " configs, grid has " +
                            std::to_string(grid_.size()));
    for (std::size_t i = 0; i < fps_.size(); ++i)
      if (!std::isfinite(fps_[i]) || fps_[i] <= 0.0)
        throw ValidationError("cost model fps for config " +
                              to_string(grid_.configs()[i]) +
                              " must be positive and finite");
  }

  const std::string& detector() const { return detector_; }
  const ConfigGrid& grid() const { return grid_; }
  double overhead_ms_per_decision() const { return overhead_ms_; }
  void set_overhead_ms_per_decision(double ms) { overhead_ms_ = ms; }

  // Exact table value; off-grid configs are rejected.
  double fps(const ApproxConfig& config) const {
    return fps_[grid_.index_of(config)];
  }

  double seconds_per_frame(const ApproxConfig& config) const {
    return 1.0 / fps(config);
  }

  // Fig. 2-style table: rows heights descending, columns proposals
  // descending, cells in FPS.
  std::string to_grid_csv() const {
    std::ostringstream out;
    out << "height";
    for (int p : grid_.proposals()) out << "," << p;
    out << "\n";
    std::size_t i = 0;
    for (int h : grid_.heights()) {
      out << h;
      for (std::size_t c = 0; c < grid_.proposals().size(); ++c, ++i)
        out << "," << detail::fixed(fps_[i], 2);
      out << "\n";
    }
    return out.str();
  }

  static CostModel faster_rcnn() {
    return from_table("faster-rcnn", detail::kFasterRcnnFps);
  }

  static CostModel rfcn() { return from_table("rfcn", detail::kRfcnFps); }

  // Long-format CSV: one "height,proposals,fps" row per configuration; the
  // rows must tile a complete heights x proposals grid.
  static CostModel from_csv(std::istream& in, std::string detector,
                            double overhead_ms = kDefaultOverheadMs) {
    std::vector<int> heights, proposals;
    std::vector<std::tuple<int, int, double>> cells;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line_no == 1 && line.find("height") != std::string::npos) continue;
      std::istringstream row(line);
      std::string h_s, p_s, fps_s;
      if (!std::getline(row, h_s, ',') || !std::getline(row, p_s, ',') ||
          !std::getline(row, fps_s))
        throw ValidationError("cost model CSV line " +
                              std::to_string(line_no) +
                              ": expected height,proposals,fps");
      try {
        cells.emplace_back(std::stoi(h_s), std::stoi(p_s), std::stod(fps_s));
      } catch (const std::exception&) {
        throw ValidationError("cost model CSV line " +
                              std::to_string(line_no) + ": bad number");
      }
      heights.push_back(std::get<0>(cells.back()));
      proposals.push_back(std::get<1>(cells.back()));
    }
    if (cells.empty()) throw ValidationError("cost model CSV is empty");
    auto distinct = [](std::vector<int>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    distinct(heights);
    distinct(proposals);
    ConfigGrid grid(heights, proposals);
    std::vector<double> fps(grid.size(), -1.0);
    for (const auto& [h, p, value] : cells) {
      std::size_t i = grid.index_of({h, p});
      if (fps[i] >= 0.0)
        throw ValidationError("cost model CSV repeats config " +
                              to_string({h, p}));
      fps[i] = value;
    }
    for (std::size_t i = 0; i < fps.size(); ++i)
      if (fps[i] < 0.0)
        throw ValidationError("cost model CSV misses config " +
                              to_string(grid.configs()[i]));
    return CostModel(std::move(detector), std::move(grid), std::move(fps),
                     overhead_ms);
  }

  // Resolves "faster-rcnn" / "rfcn" to the embedded tables, anything else
  // as a path to a long-format CSV.
  static CostModel resolve(const std::string& name_or_path,
                           double overhead_ms = kDefaultOverheadMs) {
    if (name_or_path == "faster-rcnn") {
      CostModel m = faster_rcnn();
      m.set_overhead_ms_per_decision(overhead_ms);
      return m;
    }
    if (name_or_path == "rfcn") {
      CostModel m = rfcn();
      m.set_overhead_ms_per_decision(overhead_ms);
      return m;
    }
    std::ifstream in(name_or_path);
    if (!in)
      throw ValidationError("unknown cost model \"" + name_or_path +
                            "\" (not a built-in name and not a readable file)");
    std::string stem = name_or_path;
    if (auto slash = stem.find_last_of('/'); slash != std::string::npos)
      stem = stem.substr(slash + 1);
    if (auto dot = stem.find_last_of('.'); dot != std::string::npos)
      stem = stem.substr(0, dot);
    return from_csv(in, stem, overhead_ms);
  }

 private:
  static CostModel from_table(const char* name, const double table[11][5]) {
    ConfigGrid grid = enumerate_grid();
    std::vector<double> fps(grid.size(), 0.0);
    for (int r = 0; r < 11; ++r)
      for (int c = 0; c < 5; ++c)
        fps[grid.index_of({detail::kTableHeights[r],
                           detail::kTableProposals[c]})] = table[r][c];
    return CostModel(name, std::move(grid), std::move(fps));
  }

  std::string detector_;
  ConfigGrid grid_;
  std::vector<double> fps_;
  double overhead_ms_;
};

inline double fps_lookup(const CostModel& cost, const ApproxConfig& config) {
  return cost.fps(config);
}

}  // namespace dsa
