// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <set>

#include <catch_amalgamated.hpp>

#include "dsa/config.hpp"

using dsa::ApproxConfig;
using dsa::ConfigGrid;
using dsa::enumerate_grid;

TEST_CASE("canonical grid enumerates 55 distinct configs") {
  ConfigGrid grid = enumerate_grid();
  REQUIRE(grid.size() == 55);
  std::set<std::pair<int, int>> seen;
  for (const auto& c : grid.configs())
    seen.insert({c.image_height, c.proposal_count});
  CHECK(seen.size() == 55);
  CHECK(grid.configs().front() == ApproxConfig{480, 300});
  CHECK(grid.configs().back() == ApproxConfig{80, 10});
  CHECK(grid.baseline() == ApproxConfig{480, 300});
}

TEST_CASE("grid enumeration is descending-height major") {
  ConfigGrid grid = enumerate_grid();
  const auto& configs = grid.configs();
  for (std::size_t i = 1; i < configs.size(); ++i) {
    const auto& prev = configs[i - 1];
    const auto& cur = configs[i];
    bool ordered = prev.image_height > cur.image_height ||
                   (prev.image_height == cur.image_height &&
                    prev.proposal_count > cur.proposal_count);
    REQUIRE(ordered);
  }
  CHECK(configs[1] == ApproxConfig{480, 200});
  CHECK(configs[5] == ApproxConfig{440, 300});
}

TEST_CASE("enumerate_grid is pure") {
  ConfigGrid a = enumerate_grid();
  ConfigGrid b = enumerate_grid();
  REQUIRE(a == b);
  REQUIRE(a.configs() == b.configs());
}

TEST_CASE("nearest snaps to the closest level per axis") {
  ConfigGrid grid = enumerate_grid();
  CHECK(grid.nearest(470.0, 290.0) == ApproxConfig{480, 300});
  CHECK(grid.nearest(81.0, 12.0) == ApproxConfig{80, 10});
}

TEST_CASE("nearest clamps out-of-range estimates") {
  ConfigGrid grid = enumerate_grid();
  CHECK(grid.nearest(9999.0, -5.0) == ApproxConfig{480, 10});
  CHECK(grid.nearest(-100.0, 1e6) == ApproxConfig{80, 300});
}

TEST_CASE("nearest resolves midpoint ties toward the larger level") {
  ConfigGrid grid = enumerate_grid();
  // 100 is equidistant from 80 and 120; 150 from 100 and 200.
  CHECK(grid.nearest(100.0, 150.0) == ApproxConfig{120, 200});
  CHECK(grid.nearest(460.0, 250.0) == ApproxConfig{480, 300});
}

TEST_CASE("nearest rejects non-finite estimates") {
  ConfigGrid grid = enumerate_grid();
  CHECK_THROWS_AS(grid.nearest(std::nan(""), 100.0), dsa::ValidationError);
  CHECK_THROWS_AS(grid.nearest(100.0, std::numeric_limits<double>::infinity()),
                  dsa::ValidationError);
}

TEST_CASE("every grid member is its own nearest config") {
  ConfigGrid grid = enumerate_grid();
  for (const auto& c : grid.configs())
    REQUIRE(grid.nearest(c.image_height, c.proposal_count) == c);
}

TEST_CASE("nearest always lands on the grid") {
  ConfigGrid grid = enumerate_grid();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    double h = -200.0 + (rng() % 10000) / 10.0;
    double p = -50.0 + (rng() % 5000) / 10.0;
    REQUIRE(grid.contains(grid.nearest(h, p)));
  }
}

TEST_CASE("index_of matches enumeration order") {
  ConfigGrid grid = enumerate_grid();
  for (std::size_t i = 0; i < grid.size(); ++i)
    REQUIRE(grid.index_of(grid.configs()[i]) == i);
  CHECK_THROWS_AS(grid.index_of({81, 300}), dsa::ValidationError);
}

TEST_CASE("custom level lists are supported") {
  ConfigGrid grid({100, 300, 200}, {5, 1});
  CHECK(grid.size() == 6);
  CHECK(grid.baseline() == ApproxConfig{300, 5});
  CHECK(grid.configs().back() == ApproxConfig{100, 1});
  CHECK(grid.nearest(149.0, 3.0) == ApproxConfig{100, 5});
}

TEST_CASE("degenerate level lists are rejected") {
  CHECK_THROWS_AS(ConfigGrid({}, {10}), dsa::ValidationError);
  CHECK_THROWS_AS(ConfigGrid({80, 80}, {10}), dsa::ValidationError);
  CHECK_THROWS_AS(ConfigGrid({80}, {0}), dsa::ValidationError);
}
