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
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpmorse {

using State = std::vector<double>;

/// Thrown when a state or box does not have the dimension the grid expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned orthotope, closed on every side.
struct StateBox {
  State lower;
  State upper;

  StateBox() = default;
  /// Validates lower[i] < upper[i] (or <= when `allow_degenerate`).
  StateBox(State lo, State hi, bool allow_degenerate = false);

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  bool intersects(const StateBox& other) const;
  double width(std::size_t i) const { return upper[i] - lower[i]; }
  double volume() const;
};

using CellId = std::size_t;
using VertexId = std::size_t;

/// Uniform cubical decomposition of a StateBox.
///
/// Cells are numbered by mixed-radix encoding of their multi-index with
/// dimension 0 varying fastest: id = i0 + n0 * (i1 + n1 * (i2 + ...)).
/// Vertices (cell corners) use the same encoding over (n_i + 1) points per
/// non-periodic dimension and n_i points per periodic one, so a corner
/// shared by neighbouring cells has a single VertexId.
class CubicalGrid {
 public:
  CubicalGrid(StateBox bounds, std::vector<std::size_t> cells_per_dim,
              std::vector<bool> periodic = {});

  /// The 2^k_i construction used by the pipeline.
  static CubicalGrid from_subdivisions(StateBox bounds,
                                       const std::vector<int>& subdivisions,
                                       std::vector<bool> periodic = {});

  /// Same bounds and periodicity with every per-dimension count multiplied.
  CubicalGrid refined(std::size_t factor) const;

  std::size_t dim() const { return counts_.size(); }
  std::size_t cell_count() const { return cell_count_; }
  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t cells_along(std::size_t i) const { return counts_[i]; }
  double cell_width(std::size_t i) const { return widths_[i]; }
  bool periodic(std::size_t i) const { return periodic_[i]; }
  double period(std::size_t i) const { return bounds_.width(i); }
  const StateBox& bounds() const { return bounds_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<bool>& periodic_flags() const { return periodic_; }

  std::vector<std::size_t> multi_index(CellId cell) const;
  CellId cell_id(std::span<const std::size_t> multi) const;

  /// Coordinate of the i-th grid line along dimension d (index may be n_d).
  double edge(std::size_t d, std::size_t index) const {
    return bounds_.lower[d] + static_cast<double>(index) * widths_[d];
  }

  /// Wraps periodic coordinates into [lower, upper); others untouched.
  State wrap(std::span<const double> x) const;

  /// Cell containing x; nullopt when a non-periodic coordinate lies outside
  /// the bounds. Points on a shared face go to the lower-index cell.
  std::optional<CellId> locate(std::span<const double> x) const;

  StateBox cell_box(CellId cell) const;
  State center(CellId cell) const;

  /// The 2^M corners; bit d of the position selects the upper face in d.
  /// Periodic upper corners are reported unwrapped (lower + n * width).
  std::vector<State> corners(CellId cell) const;

  /// Vertex ids of the 2^M corners, in the same order as corners().
  std::vector<VertexId> corner_vertices(CellId cell) const;

  /// Coordinates of a deduplicated vertex (periodic dims in [lower, upper)).
  State vertex_point(VertexId v) const;

  struct Intersection {
    std::vector<CellId> cells;  // sorted
    bool clipped = false;       // part of the query lay outside non-periodic bounds
  };

  /// All cells whose closed box meets the closed query box.
  Intersection cells_intersecting(const StateBox& box) const;

  /// Cells sharing at least a corner with `cell` (periodic wrap), excluding it.
  std::vector<CellId> neighbours(CellId cell) const;

  bool operator==(const CubicalGrid& other) const;

 private:
  StateBox bounds_;
  std::vector<std::size_t> counts_;
  std::vector<bool> periodic_;
  std::vector<double> widths_;
  std::vector<std::size_t> vertex_counts_;
  std::size_t cell_count_ = 0;
  std::size_t vertex_count_ = 0;
};

}  // namespace gpmorse
