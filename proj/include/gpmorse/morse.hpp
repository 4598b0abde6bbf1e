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

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "gpmorse/grid.hpp"
#include "gpmorse/mvmap.hpp"

namespace gpmorse {

/// Strongly connected components of a map, collapsed to a DAG.
struct Condensation {
  std::vector<std::size_t> component;               // per cell
  std::vector<std::vector<CellId>> members;         // per component, sorted
  std::vector<std::vector<std::size_t>> successors; // per component, sorted, no self edges
  std::vector<bool> recurrent;                      // has at least one internal edge
  std::vector<bool> escaped;                        // contains an escaped cell
  std::vector<bool> cell_escaped;                   // per cell
  std::vector<std::size_t> order;                   // topological, sources first

  std::size_t size() const { return members.size(); }
};

Condensation condense(const MultivaluedMap& map);

/// Per-cell labels besides morse node indices.
inline constexpr int kUncertain = -1;
inline constexpr int kEscaped = -2;

struct MorseGraphResult {
  std::vector<std::vector<CellId>> nodes;            // recurrent sets, ordered by smallest cell
  std::vector<std::size_t> node_component;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // transitively reduced
  std::vector<std::vector<std::size_t>> reachable;   // full reachability, sorted
  std::vector<std::size_t> attractors;               // nodes without outgoing edges
  std::vector<int> roa;                               // per cell; empty until computed

  bool is_attractor(std::size_t node) const { return reachable[node].empty(); }
};

MorseGraphResult morse_graph(const Condensation& condensation);

/// A cell gets attractor i when i is the only attractor it can reach and no
/// escaped cell is reachable; otherwise it is uncertain. Escaped cells keep
/// their own label; cells sharing a component with them are uncertain.
std::vector<int> regions_of_attraction(const Condensation& condensation, const MorseGraphResult& graph);

/// condense + morse_graph + regions_of_attraction.
MorseGraphResult analyze(const MultivaluedMap& map);

struct GoalRegion {
  std::vector<std::size_t> attractors;  // empty: no attractor meets the goal
  std::vector<CellId> cells;            // union of their regions, sorted
};

GoalRegion roa_for_goal(const MorseGraphResult& graph, const CubicalGrid& grid, const StateBox& goal);

/// Integer label per cell of a grid.
struct Raster {
  CubicalGrid grid;
  std::vector<int> labels;
};

void write_dot(std::ostream& out, const MorseGraphResult& graph);
void write_raster(std::ostream& out, const Raster& raster);
Raster read_raster(std::istream& in);

}  // namespace gpmorse
