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
#include <span>
#include <vector>

#include "gpmorse/dynamics.hpp"
#include "gpmorse/gp.hpp"
#include "gpmorse/grid.hpp"

namespace gpmorse {

enum class MapMode { TrueDynamics, GpConfidence };

/// Directed graph on the cells of a grid, stored in compressed rows.
/// Successor lists are sorted and unique; self-loops are allowed.
class MultivaluedMap {
 public:
  /// Takes arbitrary successor lists; they are sorted and deduplicated.
  MultivaluedMap(CubicalGrid grid, const std::vector<std::vector<CellId>>& successors,
                 std::vector<bool> escaped = {}, MapMode mode = MapMode::TrueDynamics,
                 std::vector<double> padding = {}, double delta = 0.0);

  const CubicalGrid& grid() const { return grid_; }
  std::size_t cell_count() const { return grid_.cell_count(); }
  std::size_t edge_count() const { return targets_.size(); }

  std::span<const CellId> successors(CellId cell) const {
    return {targets_.data() + offsets_[cell], offsets_[cell + 1] - offsets_[cell]};
  }
  bool has_edge(CellId from, CellId to) const;

  bool escaped(CellId cell) const { return escaped_[cell]; }
  const std::vector<bool>& escaped_flags() const { return escaped_; }
  std::vector<CellId> escaped_cells() const;

  MapMode mode() const { return mode_; }
  const std::vector<double>& padding() const { return padding_; }
  double delta() const { return delta_; }

  /// Same grid and the same edges (mode parameters are ignored).
  bool same_edges(const MultivaluedMap& other) const;

 private:
  CubicalGrid grid_;
  std::vector<std::size_t> offsets_;
  std::vector<CellId> targets_;
  std::vector<bool> escaped_;
  MapMode mode_;
  std::vector<double> padding_;
  double delta_;
};

/// Images of one cell's corners in the covering space: the image of a
/// deduplicated vertex is shifted by whole periods when the corner it stands
/// for lies one period above it.
std::vector<State> lift_corner_images(const CubicalGrid& grid, CellId cell,
                                      const std::vector<State>& vertex_images);

/// Smallest box containing the points.
StateBox bounding_box(const std::vector<State>& points);

/// Corner-image map of the true dynamics, one flow per unique vertex.
MultivaluedMap build_true_map(const CubicalGrid& grid, FlowMap& flow,
                              const std::vector<double>& padding = {});

/// Pointwise confidence map of a GP surrogate. Consumes no propagations.
/// `center_stddev`, when given, receives the mean predictive standard
/// deviation over cell centers and outputs. `padding` inflates the box of
/// corner means per dimension (default 0).
MultivaluedMap build_gp_map(const CubicalGrid& grid, const GpSurrogate& model, double delta,
                            double* center_stddev = nullptr, const std::vector<double>& padding = {});

/// Edge list with a commented header.
void write_map(std::ostream& out, const MultivaluedMap& map);

namespace reference {

/// Single-threaded builders with the same semantics, kept for testing and
/// benchmarking the parallel versions.
MultivaluedMap build_true_map(const CubicalGrid& grid, FlowMap& flow,
                              const std::vector<double>& padding = {});
MultivaluedMap build_gp_map(const CubicalGrid& grid, const GpSurrogate& model, double delta,
                            const std::vector<double>& padding = {});

}  // namespace reference

}  // namespace gpmorse
