// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/error.hpp"

namespace dsa {

// One approximation level: the height the input image is scaled to and the
// number of region proposals the detector keeps.
struct ApproxConfig {
  int image_height = 0;
  int proposal_count = 0;

  friend bool operator==(const ApproxConfig&, const ApproxConfig&) = default;
};

// Report / serialization order: descending height first, then descending
// proposal count, so the least approximate configuration comes first.
struct GridOrder {
  bool operator()(const ApproxConfig& a, const ApproxConfig& b) const {
    if (a.image_height != b.image_height)
      return a.image_height > b.image_height;
    return a.proposal_count > b.proposal_count;
  }
};

inline std::string to_string(const ApproxConfig& c) {
  std::ostringstream out;
  out << "(" << c.image_height << ", " << c.proposal_count << ")";
  return out.str();
}

// The lattice of approximation configurations: the cross product of a list
// of image heights and a list of proposal counts. The baseline is the
// least approximate member, (max height, max proposals).
class ConfigGrid {
 public:
  ConfigGrid(std::vector<int> heights, std::vector<int> proposals)
      : heights_(normalize_levels(std::move(heights), "image heights")),
        proposals_(normalize_levels(std::move(proposals), "proposal counts")) {
    configs_.reserve(heights_.size() * proposals_.size());
    for (int h : heights_)
      for (int p : proposals_) configs_.push_back({h, p});
  }

  // Level lists in enumeration order (descending).
  const std::vector<int>& heights() const { return heights_; }
  const std::vector<int>& proposals() const { return proposals_; }

  const std::vector<ApproxConfig>& configs() const { return configs_; }
  std::size_t size() const { return configs_.size(); }
  ApproxConfig baseline() const { return configs_.front(); }

  bool contains(const ApproxConfig& c) const {
    return std::binary_search(heights_.begin(), heights_.end(),
                              c.image_height, std::greater<int>()) &&
           std::binary_search(proposals_.begin(), proposals_.end(),
                              c.proposal_count, std::greater<int>());
  }

  // Position of `c` in enumeration order.
  std::size_t index_of(const ApproxConfig& c) const {
    if (!contains(c))
      throw ValidationError("config " + to_string(c) + " is not on the grid");
    auto h = std::lower_bound(heights_.begin(), heights_.end(), c.image_height,
                              std::greater<int>());
    auto p = std::lower_bound(proposals_.begin(), proposals_.end(),
                              c.proposal_count, std::greater<int>());
    return static_cast<std::size_t>(h - heights_.begin()) * proposals_.size() +
           static_cast<std::size_t>(p - proposals_.begin());
  }

  // Snaps a real-valued (height, proposals) estimate onto the lattice, each
  // axis independently. Out-of-range estimates clamp to the boundary level;
  // exact midpoints round toward the larger (less approximate) level.
  ApproxConfig nearest(double height_estimate, double proposals_estimate) const {
    if (!std::isfinite(height_estimate) || !std::isfinite(proposals_estimate))
      throw ValidationError("nearest config estimate is not finite");
    return {nearest_level(heights_, height_estimate),
            nearest_level(proposals_, proposals_estimate)};
  }

  friend bool operator==(const ConfigGrid& a, const ConfigGrid& b) {
    return a.heights_ == b.heights_ && a.proposals_ == b.proposals_;
  }

 private:
  static std::vector<int> normalize_levels(std::vector<int> levels,
                                           const char* what) {
    if (levels.empty())
      throw ValidationError(std::string("grid ") + what + " list is empty");
    for (int v : levels)
      if (v <= 0)
        throw ValidationError(std::string("grid ") + what +
                              " must be positive");
    std::sort(levels.begin(), levels.end(), std::greater<int>());
    if (std::adjacent_find(levels.begin(), levels.end()) != levels.end())
      throw ValidationError(std::string("grid ") + what +
                            " contains duplicates");
    return levels;
  }

  static int nearest_level(const std::vector<int>& levels_desc, double x) {
    int best = levels_desc.front();
    double best_dist = std::abs(x - best);
    for (int level : levels_desc) {
      double dist = std::abs(x - level);
      // Strict improvement only: scanning from the largest level keeps
      // midpoint ties on the larger side.
      if (dist < best_dist) {
        best = level;
        best_dist = dist;
      }
    }
    return best;
  }

  std::vector<int> heights_;
  std::vector<int> proposals_;
  std::vector<ApproxConfig> configs_;
};

// The canonical 11x5 lattice: heights 480 down to 80 in steps of 40,
// proposal counts 300, 200, 100, 50, 10. Baseline (480, 300).
inline ConfigGrid enumerate_grid() {
  return ConfigGrid({80, 120, 160, 200, 240, 280, 320, 360, 400, 440, 480},
                    {10, 50, 100, 200, 300});
}

using ConfigSet = std::set<ApproxConfig, GridOrder>;

}  // namespace dsa
