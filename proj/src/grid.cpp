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

#include "gpmorse/grid.hpp"

#include <algorithm>
#include <cmath>

namespace gpmorse {

StateBox::StateBox(State lo, State hi, bool allow_degenerate)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw DimensionError("box bounds have different lengths");
  }
  if (lower.empty()) {
    throw std::invalid_argument("box must have at least one dimension");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw std::invalid_argument("box bounds must be finite");
    }
    const bool ok = allow_degenerate ? lower[i] <= upper[i] : lower[i] < upper[i];
    if (!ok) {
      throw std::invalid_argument("box lower bound must be below upper bound in dimension " +
                                  std::to_string(i));
    }
  }
}

bool StateBox::contains(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("state dimension does not match box");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

bool StateBox::intersects(const StateBox& other) const {
  if (other.dim() != dim()) throw DimensionError("box dimensions differ");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (other.upper[i] < lower[i] || other.lower[i] > upper[i]) return false;
  }
  return true;
}

double StateBox::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= width(i);
  return v;
}

CubicalGrid::CubicalGrid(StateBox bounds, std::vector<std::size_t> cells_per_dim,
                         std::vector<bool> periodic)
    : bounds_(std::move(bounds)), counts_(std::move(cells_per_dim)), periodic_(std::move(periodic)) {
  const std::size_t m = bounds_.dim();
  if (counts_.size() != m) throw DimensionError("cell counts do not match box dimension");
  if (periodic_.empty()) periodic_.assign(m, false);
  if (periodic_.size() != m) throw DimensionError("periodic flags do not match box dimension");
  cell_count_ = 1;
  vertex_count_ = 1;
  widths_.resize(m);
  vertex_counts_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (counts_[i] == 0) throw std::invalid_argument("every dimension needs at least one cell");
    widths_[i] = bounds_.width(i) / static_cast<double>(counts_[i]);
    vertex_counts_[i] = periodic_[i] ? counts_[i] : counts_[i] + 1;
    cell_count_ *= counts_[i];
    vertex_count_ *= vertex_counts_[i];
  }
}

CubicalGrid CubicalGrid::from_subdivisions(StateBox bounds, const std::vector<int>& subdivisions,
                                           std::vector<bool> periodic) {
  std::vector<std::size_t> counts;
  counts.reserve(subdivisions.size());
  for (int k : subdivisions) {
    if (k < 0 || k > 30) throw std::invalid_argument("subdivision exponent out of range");
    counts.push_back(std::size_t{1} << k);
  }
  return CubicalGrid(std::move(bounds), std::move(counts), std::move(periodic));
}

CubicalGrid CubicalGrid::refined(std::size_t factor) const {
  if (factor == 0) throw std::invalid_argument("refinement factor must be positive");
  std::vector<std::size_t> counts = counts_;
  for (auto& c : counts) c *= factor;
  return CubicalGrid(bounds_, std::move(counts), periodic_);
}

std::vector<std::size_t> CubicalGrid::multi_index(CellId cell) const {
  std::vector<std::size_t> idx(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    idx[d] = cell % counts_[d];
    cell /= counts_[d];
  }
  return idx;
}

CellId CubicalGrid::cell_id(std::span<const std::size_t> multi) const {
  if (multi.size() != dim()) throw DimensionError("multi-index dimension mismatch");
  CellId id = 0;
  for (std::size_t d = dim(); d-- > 0;) id = id * counts_[d] + multi[d];
  return id;
}

State CubicalGrid::wrap(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("state dimension does not match grid");
  State out(x.begin(), x.end());
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!periodic_[d] || !std::isfinite(out[d])) continue;
    const double p = period(d);
    double v = out[d] - bounds_.lower[d];
    v -= std::floor(v / p) * p;
    if (v >= p) v -= p;
    if (v < 0.0) v = 0.0;
    out[d] = bounds_.lower[d] + v;
  }
  return out;
}

std::optional<CellId> CubicalGrid::locate(std::span<const double> x) const {
  const State w = wrap(x);
  std::vector<std::size_t> idx(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    const double v = w[d];
    if (!std::isfinite(v)) return std::nullopt;
    if (!periodic_[d] && (v < bounds_.lower[d] || v > bounds_.upper[d])) return std::nullopt;
    const auto n = static_cast<std::ptrdiff_t>(counts_[d]);
    auto i = static_cast<std::ptrdiff_t>(std::ceil((v - bounds_.lower[d]) / widths_[d])) - 1;
    i = std::clamp<std::ptrdiff_t>(i, 0, n - 1);
    // settle against the exact edge formula; faces belong to the lower cell
    while (i > 0 && v <= edge(d, static_cast<std::size_t>(i))) --i;
    while (i < n - 1 && v > edge(d, static_cast<std::size_t>(i + 1))) ++i;
    idx[d] = static_cast<std::size_t>(i);
  }
  return cell_id(idx);
}

StateBox CubicalGrid::cell_box(CellId cell) const {
  const auto idx = multi_index(cell);
  State lo(dim()), hi(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    lo[d] = edge(d, idx[d]);
    hi[d] = edge(d, idx[d] + 1);
  }
  return StateBox(std::move(lo), std::move(hi));
}

State CubicalGrid::center(CellId cell) const {
  const auto idx = multi_index(cell);
  State c(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    c[d] = bounds_.lower[d] + (static_cast<double>(idx[d]) + 0.5) * widths_[d];
  }
  return c;
}

std::vector<State> CubicalGrid::corners(CellId cell) const {
  const auto idx = multi_index(cell);
  const std::size_t n = std::size_t{1} << dim();
  std::vector<State> out(n, State(dim()));
  for (std::size_t mask = 0; mask < n; ++mask) {
    for (std::size_t d = 0; d < dim(); ++d) {
      out[mask][d] = edge(d, idx[d] + ((mask >> d) & 1u));
    }
  }
  return out;
}

std::vector<VertexId> CubicalGrid::corner_vertices(CellId cell) const {
  const auto idx = multi_index(cell);
  const std::size_t n = std::size_t{1} << dim();
  std::vector<VertexId> out(n);
  for (std::size_t mask = 0; mask < n; ++mask) {
    VertexId v = 0;
    for (std::size_t d = dim(); d-- > 0;) {
      std::size_t j = idx[d] + ((mask >> d) & 1u);
      if (periodic_[d]) j %= counts_[d];
      v = v * vertex_counts_[d] + j;
    }
    out[mask] = v;
  }
  return out;
}

State CubicalGrid::vertex_point(VertexId v) const {
  State p(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    p[d] = edge(d, v % vertex_counts_[d]);
    v /= vertex_counts_[d];
  }
  return p;
}

namespace {

// Index range [lo, hi] (possibly beyond [0, n) for periodic dims) of cells
// along one axis whose closed interval meets [a, b].
struct AxisRange {
  std::ptrdiff_t lo = 0;
  std::ptrdiff_t hi = -1;
};

}  // namespace

CubicalGrid::Intersection CubicalGrid::cells_intersecting(const StateBox& box) const {
  if (box.dim() != dim()) throw DimensionError("query box dimension does not match grid");
  Intersection result;
  std::vector<std::vector<std::size_t>> axes(dim());

  for (std::size_t d = 0; d < dim(); ++d) {
    double a = box.lower[d];
    double b = box.upper[d];
    const auto n = static_cast<std::ptrdiff_t>(counts_[d]);
    const double lower = bounds_.lower[d];
    const double w = widths_[d];
    auto& axis = axes[d];
    if (!std::isfinite(a) || !std::isfinite(b)) {
      result.clipped = true;
      return result;
    }

    if (periodic_[d]) {
      const double p = period(d);
      if (b - a >= p) {
        axis.resize(counts_[d]);
        for (std::size_t i = 0; i < counts_[d]; ++i) axis[i] = i;
        continue;
      }
      const double shift = std::floor((a - lower) / p) * p;
      a -= shift;
      b -= shift;
    } else {
      if (b < lower || a > edge(d, counts_[d]) || a > bounds_.upper[d]) {
        result.clipped = true;
        return result;
      }
      if (a < lower || b > bounds_.upper[d]) result.clipped = true;
    }

    auto ext_edge = [&](std::ptrdiff_t j) { return lower + static_cast<double>(j) * w; };
    const std::ptrdiff_t min_index = periodic_[d] ? -1 : 0;
    const std::ptrdiff_t max_index = periodic_[d] ? 2 * n : n - 1;

    AxisRange r;
    r.lo = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor((a - lower) / w)),
                                      min_index, max_index);
    while (r.lo > min_index && ext_edge(r.lo) >= a) --r.lo;
    while (r.lo < max_index && ext_edge(r.lo + 1) < a) ++r.lo;
    r.hi = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor((b - lower) / w)),
                                      min_index, max_index);
    while (r.hi < max_index && ext_edge(r.hi + 1) <= b) ++r.hi;
    while (r.hi > min_index && ext_edge(r.hi) > b) --r.hi;

    if (periodic_[d]) {
      std::vector<bool> hit(counts_[d], false);
      for (std::ptrdiff_t j = r.lo; j <= r.hi; ++j) hit[static_cast<std::size_t>(((j % n) + n) % n)] = true;
      for (std::size_t i = 0; i < counts_[d]; ++i) {
        if (hit[i]) axis.push_back(i);
      }
    } else {
      for (std::ptrdiff_t j = r.lo; j <= r.hi; ++j) axis.push_back(static_cast<std::size_t>(j));
    }
    if (axis.empty()) return result;
  }

  // cartesian product, last dimension slowest, which keeps ids ascending
  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.size();
  result.cells.reserve(total);
  std::vector<std::size_t> pos(dim(), 0);
  std::vector<std::size_t> multi(dim());
  for (std::size_t k = 0; k < total; ++k) {
    for (std::size_t d = 0; d < dim(); ++d) multi[d] = axes[d][pos[d]];
    result.cells.push_back(cell_id(multi));
    for (std::size_t d = 0; d < dim(); ++d) {
      if (++pos[d] < axes[d].size()) break;
      pos[d] = 0;
    }
  }
  return result;
}

std::vector<CellId> CubicalGrid::neighbours(CellId cell) const {
  const auto idx = multi_index(cell);
  std::size_t combos = 1;
  for (std::size_t d = 0; d < dim(); ++d) combos *= 3;
  std::vector<CellId> out;
  std::vector<std::size_t> multi(dim());
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t code = c;
    bool valid = true;
    for (std::size_t d = 0; d < dim(); ++d) {
      const auto off = static_cast<std::ptrdiff_t>(code % 3) - 1;
      code /= 3;
      auto j = static_cast<std::ptrdiff_t>(idx[d]) + off;
      const auto n = static_cast<std::ptrdiff_t>(counts_[d]);
      if (periodic_[d]) {
        j = ((j % n) + n) % n;
      } else if (j < 0 || j >= n) {
        valid = false;
        break;
      }
      multi[d] = static_cast<std::size_t>(j);
    }
    if (!valid) continue;
    const CellId id = cell_id(multi);
    if (id != cell) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool CubicalGrid::operator==(const CubicalGrid& other) const {
  return bounds_.lower == other.bounds_.lower && bounds_.upper == other.bounds_.upper &&
         counts_ == other.counts_ && periodic_ == other.periodic_;
}

}  // namespace gpmorse
