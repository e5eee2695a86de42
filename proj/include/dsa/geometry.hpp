// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>

namespace dsa {

// Axis-aligned box, min corner inclusive of max corner; all units pixels.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_max >= x_min && y_max >= y_min; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox box;
  double score = 0;  // in [0, 1]
  int category = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruth {
  BBox box;
  int category = 0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Intersection over union; 0 when the union has no area.
inline double iou(const BBox& a, const BBox& b) {
  const double ix =
      std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy =
      std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double intersection = ix * iy;
  const double unified = a.area() + b.area() - intersection;
  return unified > 0.0 ? intersection / unified : 0.0;
}

}  // namespace dsa
