// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "dsa/emulator.hpp"
#include "dsa/metrics.hpp"
#include "support/oracles.hpp"

using dsa::ApproxConfig;
using dsa::average_precision;
using dsa::BBox;
using dsa::Detection;
using dsa::GroundTruth;
using dsa::iou;
using dsa::match_detections;

namespace {

BBox random_box(std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  double x = u(0, 80), y = u(0, 80), w = u(1, 40), h = u(1, 40);
  return {x, y, x + w, y + h};
}

}  // namespace

TEST_CASE("iou basics") {
  BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  // Intersection 50, union 150.
  CHECK(iou(a, {5, 0, 15, 10}) == Catch::Approx(1.0 / 3.0));
  // Degenerate boxes have no union area.
  CHECK(iou({1, 1, 1, 1}, {1, 1, 1, 1}) == 0.0);
}

TEST_CASE("iou is symmetric and bounded") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 400; ++i) {
    BBox a = random_box(rng);
    BBox b = random_box(rng);
    double v = iou(a, b);
    REQUIRE(v == iou(b, a));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    REQUIRE(iou(a, a) == 1.0);
  }
}

TEST_CASE("matching: perfect detection matches its truth") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}};
  std::vector<Detection> dets{{{0, 0, 10, 10}, 0.9, 1}};
  auto match = match_detections(dets, gts, 0.5);
  REQUIRE(match[0].has_value());
  CHECK(*match[0] == 0);
}

TEST_CASE("matching: higher score wins a contested truth") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}};
  std::vector<Detection> dets{{{0, 0, 10, 10}, 0.3, 1},
                              {{1, 0, 11, 10}, 0.8, 1}};
  auto match = match_detections(dets, gts, 0.5);
  CHECK_FALSE(match[0].has_value());
  REQUIRE(match[1].has_value());
  CHECK(*match[1] == 0);
  // Cross-check against the selection-based reference.
  auto ref = testsupport::reference_matching(dets, gts, 0.5);
  CHECK(ref[0] == -1);
  CHECK(ref[1] == 0);
}

TEST_CASE("matching: IoU below the threshold stays unmatched") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}};
  // Overlap 40, union 160: IoU 0.25.
  std::vector<Detection> dets{{{6, 0, 22, 10}, 0.9, 1}};
  CHECK(iou(dets[0].box, gts[0].box) < 0.5);
  auto match = match_detections(dets, gts, 0.5);
  CHECK_FALSE(match[0].has_value());
}

TEST_CASE("matching is a partial injection") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    for (std::size_t i = 0; i < rng() % 4; ++i) gts.push_back({random_box(rng), 1});
    for (std::size_t i = 0; i < rng() % 6; ++i)
      dets.push_back({random_box(rng),
                      static_cast<double>(rng() >> 11) * 0x1.0p-53, 1});
    auto match = match_detections(dets, gts, 0.5);
    std::set<std::size_t> used;
    for (const auto& m : match) {
      if (!m) continue;
      REQUIRE(*m < gts.size());
      REQUIRE(used.insert(*m).second);
    }
    // Same assignment as the reference route.
    auto ref = testsupport::reference_matching(dets, gts, 0.5);
    for (std::size_t i = 0; i < dets.size(); ++i)
      REQUIRE((match[i] ? static_cast<int>(*match[i]) : -1) == ref[i]);
  }
}

TEST_CASE("average precision of a perfect single detection is 1") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}};
  std::vector<Detection> dets{{{0, 0, 10, 10}, 1.0, 1}};
  auto ap = average_precision(dets, gts, 0.5);
  REQUIRE(ap.has_value());
  CHECK(*ap == 1.0);
}

TEST_CASE("average precision with no detections is 0") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}};
  auto ap = average_precision({}, gts, 0.5);
  REQUIRE(ap.has_value());
  CHECK(*ap == 0.0);
}

TEST_CASE("average precision is undefined without ground truth") {
  std::vector<Detection> dets{{{0, 0, 10, 10}, 1.0, 1}};
  CHECK_FALSE(average_precision(dets, {}, 0.5).has_value());
  CHECK_FALSE(average_precision({}, {}, 0.5).has_value());
}

TEST_CASE("average precision of ranked [TP, FP, TP] over two truths") {
  std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1}, {{50, 50, 60, 60}, 1}};
  std::vector<Detection> dets{
      {{0, 0, 10, 10}, 0.9, 1},    // TP on the first truth
      {{100, 0, 110, 10}, 0.8, 1},  // FP in empty space
      {{50, 50, 60, 60}, 0.7, 1},  // TP on the second truth
  };
  // Precisions 1, 1/2, 2/3; the envelope integrates to 1*0.5 + (2/3)*0.5.
  auto oracle = testsupport::reference_average_precision(dets, gts, 0.5);
  REQUIRE(oracle.has_value());
  CHECK(*oracle == Catch::Approx(5.0 / 6.0).epsilon(1e-12));
  auto ap = average_precision(dets, gts, 0.5);
  REQUIRE(ap.has_value());
  CHECK(*ap == Catch::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(*ap == Catch::Approx(*oracle).epsilon(1e-12));
}

TEST_CASE("average precision agrees with the exhaustive PR oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    for (std::size_t i = 0; i < 1 + rng() % 3; ++i)
      gts.push_back({random_box(rng), 1});
    for (std::size_t i = 0; i < rng() % 6; ++i) {
      // Mix boxes near truths with unrelated ones.
      BBox b = (rng() % 2 == 0 && !gts.empty())
                   ? gts[rng() % gts.size()].box
                   : random_box(rng);
      b.x_min += static_cast<double>(rng() % 7) - 3;
      b.x_max += static_cast<double>(rng() % 7) - 3;
      if (b.x_max < b.x_min) std::swap(b.x_min, b.x_max);
      dets.push_back({b, static_cast<double>(rng() >> 11) * 0x1.0p-53, 1});
    }
    auto got = average_precision(dets, gts, 0.5);
    auto want = testsupport::reference_average_precision(dets, gts, 0.5);
    REQUIRE(got.has_value() == want.has_value());
    if (got) REQUIRE(*got == Catch::Approx(*want).margin(1e-12));
    if (got) {
      REQUIRE(*got >= 0.0);
      REQUIRE(*got <= 1.0);
    }
  }
}

TEST_CASE("appending a lowest-score TP never decreases AP, an FP never increases it") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    std::size_t n_gts = 2 + rng() % 2;
    for (std::size_t i = 0; i < n_gts; ++i) {
      double x = 100.0 * static_cast<double>(i);
      gts.push_back({{x, 0, x + 10, 10}, 1});
    }
    // Detect a random subset at scores above 0.5.
    for (std::size_t i = 0; i + 1 < n_gts; ++i)
      if (rng() % 2 == 0)
        dets.push_back({gts[i].box, 0.5 + 0.4 * (static_cast<double>(rng() >> 11) * 0x1.0p-53), 1});
    double before = average_precision(dets, gts, 0.5).value();

    auto with_tp = dets;
    with_tp.push_back({gts[n_gts - 1].box, 0.1, 1});  // fresh truth, lowest score
    double after_tp = average_precision(with_tp, gts, 0.5).value();
    REQUIRE(after_tp >= before - 1e-12);

    auto with_fp = dets;
    with_fp.push_back({{1000, 1000, 1010, 1010}, 0.05, 1});
    double after_fp = average_precision(with_fp, gts, 0.5).value();
    REQUIRE(after_fp <= before + 1e-12);
  }
}

TEST_CASE("category mAP averages per-image APs of frames with the category") {
  dsa::ConfigGrid grid({100}, {10});
  dsa::DetectionTrace trace;
  trace.detector = "toy";
  trace.grid = grid;
  GroundTruth gt{{0, 0, 10, 10}, 1};
  auto perfect = [&](const ApproxConfig&) {
    return std::vector<Detection>{{gt.box, 1.0, 1}};
  };
  auto blind = [&](const ApproxConfig&) { return std::vector<Detection>{}; };

  SECTION("all frames perfect") {
    trace.videos.push_back(
        {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, perfect),
         testsupport::make_dense_frame(grid, "v", 1, 64, 64, {gt}, perfect)});
    auto map = dsa::category_map(trace, grid.baseline(), 1, 0.5);
    REQUIRE(map.has_value());
    CHECK(*map == 1.0);
  }

  SECTION("half perfect, half blind") {
    trace.videos.push_back(
        {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, perfect),
         testsupport::make_dense_frame(grid, "v", 1, 64, 64, {gt}, blind)});
    auto map = dsa::category_map(trace, grid.baseline(), 1, 0.5);
    REQUIRE(map.has_value());
    CHECK(*map == 0.5);
  }

  SECTION("frames without the category do not dilute the mean") {
    trace.videos.push_back(
        {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, perfect),
         testsupport::make_dense_frame(grid, "v", 1, 64, 64, {}, blind)});
    auto map = dsa::category_map(trace, grid.baseline(), 1, 0.5);
    REQUIRE(map.has_value());
    CHECK(*map == 1.0);
    CHECK_FALSE(dsa::category_map(trace, grid.baseline(), 2, 0.5).has_value());
  }
}

TEST_CASE("category mAP equals the mean of per-image oracle APs") {
  dsa::SceneSpec scene;
  scene.videos.push_back({"v0", 640, 480, 8,
                          {{1, 1.2, 100, 200, 40, 500, 260, 220},
                           {1, 0.8, 400, 300, 150, 200, 250, 60}}});
  dsa::EmulatorParams params;
  params.clutter_rate = 2.0;
  params.jitter_coefficient = 0.4;
  params.seed = 5;
  auto trace = dsa::generate_synthetic(scene, params);
  const ApproxConfig config{240, 50};
  double sum = 0;
  std::size_t n = 0;
  trace.for_each_frame([&](const dsa::FrameRecord& f) {
    auto ap = testsupport::reference_frame_ap(f, config, 1, 0.5);
    if (ap) {
      sum += *ap;
      ++n;
    }
  });
  REQUIRE(n > 0);
  auto map = dsa::category_map(trace, config, 1, 0.5);
  REQUIRE(map.has_value());
  CHECK(*map == Catch::Approx(sum / static_cast<double>(n)).margin(1e-12));
}

TEST_CASE("normalized AP grid") {
  dsa::ConfigGrid grid = dsa::enumerate_grid();
  GroundTruth gt{{0, 0, 30, 30}, 1};

  SECTION("identical behavior everywhere gives all cells 1.0") {
    auto perfect = [&](const ApproxConfig&) {
      return std::vector<Detection>{{gt.box, 1.0, 1}};
    };
    dsa::DetectionTrace trace;
    trace.grid = grid;
    trace.videos.push_back(
        {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, perfect)});
    auto report = dsa::normalized_ap_grid(trace, 1, 0.5);
    REQUIRE_FALSE(report.degenerate);
    for (const auto& cell : report.normalized) {
      REQUIRE(cell.has_value());
      REQUIRE(*cell == 1.0);
    }
    CHECK(report.normalized[0] == 1.0);  // baseline cell, exactly
  }

  SECTION("monotone emulator cells are non-decreasing along height") {
    dsa::SceneSpec scene;
    scene.videos.push_back({"v0", 640, 480, 6,
                            {{1, 1.0, 200, 240, 30, 420, 240, 320}}});
    dsa::EmulatorParams params;
    params.seed = 9;
    auto trace = dsa::generate_synthetic(scene, params);
    auto report = dsa::normalized_ap_grid(trace, 1, 0.5);
    REQUIRE_FALSE(report.degenerate);
    // Walk each proposal column from the smallest height up.
    for (std::size_t col = 0; col < grid.proposals().size(); ++col) {
      for (std::size_t row = 0; row + 1 < grid.heights().size(); ++row) {
        double taller = *report.normalized[row * 5 + col];
        double shorter = *report.normalized[(row + 1) * 5 + col];
        REQUIRE(taller >= shorter - 1e-12);
      }
    }
    CHECK(*report.normalized[0] == 1.0);
  }

  SECTION("a blind trace is degenerate") {
    auto blind = [&](const ApproxConfig&) { return std::vector<Detection>{}; };
    dsa::DetectionTrace trace;
    trace.grid = grid;
    trace.videos.push_back(
        {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, blind)});
    auto report = dsa::normalized_ap_grid(trace, 1, 0.5);
    CHECK(report.degenerate);
    for (const auto& cell : report.normalized) CHECK_FALSE(cell.has_value());
  }
}

TEST_CASE("AP grid CSV layout") {
  dsa::ConfigGrid grid = dsa::enumerate_grid();
  GroundTruth gt{{0, 0, 30, 30}, 1};
  auto perfect = [&](const ApproxConfig&) {
    return std::vector<Detection>{{gt.box, 1.0, 1}};
  };
  dsa::DetectionTrace trace;
  trace.grid = grid;
  trace.videos.push_back(
      {testsupport::make_dense_frame(grid, "v", 0, 64, 64, {gt}, perfect)});
  auto csv = dsa::normalized_ap_grid(trace, 1, 0.5).to_csv();
  CHECK(csv.rfind("height,300,200,100,50,10\n480,1.0000,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  CHECK(csv.find("\n80,1.0000,1.0000,1.0000,1.0000,1.0000\n") !=
        std::string::npos);
}
