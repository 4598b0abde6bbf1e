// Copyright 2026 The gpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "gpmorse/grid.hpp"

using namespace gpmorse;

namespace {

// Closed-interval overlap allowing any whole-period shift on periodic axes.
bool brute_overlap(const CubicalGrid& g, CellId c, const StateBox& q) {
  const StateBox cb = g.cell_box(c);
  for (std::size_t d = 0; d < g.dim(); ++d) {
    bool hit = false;
    const int range = g.periodic(d) ? 3 : 0;
    for (int k = -range; k <= range && !hit; ++k) {
      const double s = k * g.period(d);
      hit = cb.lower[d] + s <= q.upper[d] && q.lower[d] <= cb.upper[d] + s;
    }
    if (!hit) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("state boxes validate their bounds") {
  CHECK_THROWS_AS(StateBox({0.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StateBox({0.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_NOTHROW(StateBox({1.0}, {1.0}, true));
  const StateBox b({0.0, 0.0}, {1.0, 2.0});
  CHECK(b.contains(State{1.0, 2.0}));
  CHECK_FALSE(b.contains(State{1.0, 2.1}));
  CHECK(b.volume() == doctest::Approx(2.0));
  CHECK(b.intersects(StateBox({1.0, 2.0}, {3.0, 3.0})));
  CHECK_FALSE(b.intersects(StateBox({1.1, 0.0}, {3.0, 3.0})));
}

TEST_CASE("cell ids are mixed radix with dimension 0 fastest") {
  const CubicalGrid g(StateBox({0, 0, 0}, {1, 1, 1}), {3, 4, 5});
  CHECK(g.cell_count() == 60);
  CHECK(g.cell_id(std::vector<std::size_t>{1, 0, 0}) == 1);
  CHECK(g.cell_id(std::vector<std::size_t>{0, 1, 0}) == 3);
  CHECK(g.cell_id(std::vector<std::size_t>{0, 0, 1}) == 12);
  for (CellId c = 0; c < g.cell_count(); ++c) CHECK(g.cell_id(g.multi_index(c)) == c);
}

TEST_CASE("subdivision exponents give powers of two") {
  const auto g = CubicalGrid::from_subdivisions(StateBox({0, 0}, {1, 1}), {3, 0});
  CHECK(g.cells_along(0) == 8);
  CHECK(g.cells_along(1) == 1);
  const auto r = g.refined(4);
  CHECK(r.cells_along(0) == 32);
  CHECK(r.cells_along(1) == 4);
}

TEST_CASE("locate follows the face convention and periodic wrap") {
  const CubicalGrid five(StateBox({-3.0}, {3.0}), {5});
  CHECK(*five.locate(State{-2.0}) == 0);
  CHECK(*five.locate(State{-3.0}) == 0);
  CHECK(*five.locate(State{3.0}) == 4);
  CHECK(*five.locate(State{-1.8}) == 0);  // shared face goes to the lower cell
  CHECK_FALSE(five.locate(State{3.0001}).has_value());

  const double pi = std::numbers::pi;
  const CubicalGrid cyl(StateBox({-pi, -1.0}, {pi, 1.0}), {16, 4}, {true, false});
  CHECK(*cyl.locate(State{pi + 0.1, 0.3}) == *cyl.locate(State{-pi + 0.1, 0.3}));
  CHECK(*cyl.locate(State{-pi, -1.0}) == 0);
  CHECK_FALSE(cyl.locate(State{0.0, 1.5}).has_value());
  CHECK_THROWS_AS(cyl.locate(State{0.0}), DimensionError);
}

TEST_CASE("random points fall into a cell whose box contains them") {
  const double pi = std::numbers::pi;
  const CubicalGrid g(StateBox({-pi, -2.0, 0.0}, {pi, 2.0, 1.0}), {8, 5, 3}, {true, false, false});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    State x{-3 * pi + 6 * pi * u(rng), -2.0 + 4.0 * u(rng), u(rng)};
    const auto c = g.locate(x);
    REQUIRE(c.has_value());
    CHECK(g.cell_box(*c).contains(g.wrap(x)));
  }
}

TEST_CASE("centers lie in their own cell") {
  const CubicalGrid g(StateBox({-1, 2}, {3, 7}), {7, 9}, {false, true});
  for (CellId c = 0; c < g.cell_count(); ++c) {
    CHECK(g.cell_box(c).contains(g.center(c)));
    CHECK(*g.locate(g.center(c)) == c);
  }
  const CubicalGrid unit(StateBox({0.0}, {1.0}), {1});
  CHECK(unit.center(0)[0] == 0.5);
  CHECK(unit.corners(0) == std::vector<State>{{0.0}, {1.0}});
}

TEST_CASE("vertex lattice is deduplicated and corners are shared bit for bit") {
  const CubicalGrid g = CubicalGrid::from_subdivisions(StateBox({-1.3, 0.7, 2.0}, {2.9, 1.9, 5.5}), {3, 3, 1});
  CHECK(g.vertex_count() == 9 * 9 * 3);
  const CubicalGrid p(StateBox({-1, -1}, {1, 1}), {8, 4}, {true, true});
  CHECK(p.vertex_count() == 32);

  for (const CubicalGrid* grid : {&g, &p}) {
    std::vector<std::optional<State>> seen(grid->vertex_count());
    for (CellId c = 0; c < grid->cell_count(); ++c) {
      const auto corners = grid->corners(c);
      const auto vids = grid->corner_vertices(c);
      REQUIRE(corners.size() == vids.size());
      for (std::size_t k = 0; k < corners.size(); ++k) {
        const State w = grid->wrap(corners[k]);
        CHECK(w == grid->vertex_point(vids[k]));
        if (seen[vids[k]]) CHECK(*seen[vids[k]] == w);
        seen[vids[k]] = w;
      }
    }
    for (const auto& s : seen) CHECK(s.has_value());
  }
}

TEST_CASE("cells_intersecting matches the brute-force filter") {
  const double pi = std::numbers::pi;
  const CubicalGrid plain(StateBox({0, 0}, {16, 16}), {16, 16});
  const CubicalGrid cyl(StateBox({-pi, -2}, {pi, 2}), {16, 16}, {true, false});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 1.3);
  std::uniform_real_distribution<double> w(0.0, 0.4);
  for (const CubicalGrid* g : {&plain, &cyl}) {
    for (int i = 0; i < 2000; ++i) {
      State lo(2), hi(2);
      for (std::size_t d = 0; d < 2; ++d) {
        const double span = g->bounds().width(d);
        lo[d] = g->bounds().lower[d] + u(rng) * span;
        if (i % 11 == 0) lo[d] = g->edge(d, static_cast<std::size_t>(i / 11) % g->cells_along(d));
        hi[d] = lo[d] + w(rng) * span;
        if (i % 7 == 0) hi[d] = lo[d];  // degenerate boxes
      }
      const StateBox q(lo, hi, true);
      const auto got = g->cells_intersecting(q);
      bool clipped = false;
      for (std::size_t d = 0; d < 2; ++d) {
        if (!g->periodic(d) && (lo[d] < g->bounds().lower[d] || hi[d] > g->bounds().upper[d])) clipped = true;
      }
      CHECK(got.clipped == clipped);
      std::vector<CellId> want;
      for (CellId c = 0; c < g->cell_count(); ++c) {
        if (brute_overlap(*g, c, q)) want.push_back(c);
      }
      if (!clipped) CHECK(got.cells == want);
    }
  }
}

TEST_CASE("cells_intersecting trivial cases") {
  const CubicalGrid g(StateBox({0, 0}, {4, 4}), {4, 4});
  CHECK(g.cells_intersecting(StateBox({1.2, 2.2}, {1.8, 2.7})).cells == std::vector<CellId>{9});
  CHECK(g.cells_intersecting(g.bounds()).cells.size() == 16);
  CHECK_FALSE(g.cells_intersecting(g.bounds()).clipped);
  const auto outside = g.cells_intersecting(StateBox({5, 5}, {6, 6}));
  CHECK(outside.clipped);
  CHECK(outside.cells.empty());
  // a box straddling the periodic seam stays narrow
  const CubicalGrid p(StateBox({0.0}, {1.0}), {10}, {true});
  CHECK(p.cells_intersecting(StateBox({0.95}, {1.05})).cells == std::vector<CellId>{0, 9});
  CHECK(p.cells_intersecting(StateBox({-2.0}, {-0.5})).cells.size() == 10);
}

TEST_CASE("Moore neighbours with and without wrap") {
  const CubicalGrid g(StateBox({0, 0}, {3, 3}), {3, 3});
  CHECK(g.neighbours(4).size() == 8);
  CHECK(g.neighbours(0) == std::vector<CellId>{1, 3, 4});
  const CubicalGrid p(StateBox({0, 0}, {4, 3}), {4, 3}, {true, false});
  CHECK(p.neighbours(0) == std::vector<CellId>{1, 3, 4, 5, 7});
  const CubicalGrid two(StateBox({0.0}, {1.0}), {2}, {true});
  CHECK(two.neighbours(0) == std::vector<CellId>{1});
}
