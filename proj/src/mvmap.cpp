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

#include "gpmorse/mvmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>

namespace gpmorse {

MultivaluedMap::MultivaluedMap(CubicalGrid grid, const std::vector<std::vector<CellId>>& successors,
                               std::vector<bool> escaped, MapMode mode, std::vector<double> padding,
                               double delta)
    : grid_(std::move(grid)),
      escaped_(std::move(escaped)),
      mode_(mode),
      padding_(std::move(padding)),
      delta_(delta) {
  const std::size_t n = grid_.cell_count();
  if (successors.size() != n) throw std::invalid_argument("one successor list per cell required");
  if (escaped_.empty()) escaped_.assign(n, false);
  if (escaped_.size() != n) throw std::invalid_argument("escaped flags must cover every cell");
  offsets_.reserve(n + 1);
  offsets_.push_back(0);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<CellId> s = successors[c];
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (!s.empty() && s.back() >= n) throw std::out_of_range("successor outside the grid");
    targets_.insert(targets_.end(), s.begin(), s.end());
    offsets_.push_back(targets_.size());
  }
}

bool MultivaluedMap::has_edge(CellId from, CellId to) const {
  const auto s = successors(from);
  return std::binary_search(s.begin(), s.end(), to);
}

std::vector<CellId> MultivaluedMap::escaped_cells() const {
  std::vector<CellId> out;
  for (CellId c = 0; c < escaped_.size(); ++c) {
    if (escaped_[c]) out.push_back(c);
  }
  return out;
}

bool MultivaluedMap::same_edges(const MultivaluedMap& other) const {
  return grid_ == other.grid_ && offsets_ == other.offsets_ && targets_ == other.targets_ &&
         escaped_ == other.escaped_;
}

std::vector<State> lift_corner_images(const CubicalGrid& grid, CellId cell,
                                      const std::vector<State>& vertex_images) {
  const auto corners = grid.corners(cell);
  const auto vids = grid.corner_vertices(cell);
  std::vector<State> out(corners.size());
  for (std::size_t k = 0; k < corners.size(); ++k) {
    out[k] = vertex_images[vids[k]];
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      if (!grid.periodic(d)) continue;
      const double shift = corners[k][d] - grid.vertex_point(vids[k])[d];
      out[k][d] += std::round(shift / grid.period(d)) * grid.period(d);
    }
  }
  return out;
}

StateBox bounding_box(const std::vector<State>& points) {
  if (points.empty()) throw std::invalid_argument("bounding box of no points");
  State lo = points.front();
  State hi = points.front();
  for (const auto& p : points) {
    for (std::size_t d = 0; d < lo.size(); ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  return StateBox(std::move(lo), std::move(hi), true);
}

namespace {

bool all_finite(const State& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> checked_padding(const CubicalGrid& grid, const std::vector<double>& padding) {
  if (padding.empty()) return std::vector<double>(grid.dim(), 0.0);
  if (padding.size() != grid.dim()) throw DimensionError("padding needs one entry per dimension");
  for (double e : padding) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("padding must be finite and non-negative");
  }
  return padding;
}

// Evaluates the flow at every vertex; non-finite images come back empty.
std::vector<State> vertex_images(const CubicalGrid& grid, FlowMap& flow, bool parallel) {
  if (flow.dim() != grid.dim()) throw DimensionError("flow and grid dimensions differ");
  const std::size_t nv = grid.vertex_count();
  std::vector<State> images(nv);
  std::exception_ptr error;
  std::mutex error_mutex;
  const bool par = parallel && flow.thread_safe();
#pragma omp parallel for schedule(dynamic, 64) if (par)
  for (std::size_t v = 0; v < nv; ++v) {
    try {
      images[v] = flow.flow(grid.vertex_point(v));
    } catch (const NonFiniteStateError&) {
      images[v].clear();
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return images;
}

struct CellImage {
  std::vector<CellId> cells;
  bool escaped = false;
};

CellImage true_cell_image(const CubicalGrid& grid, CellId cell, const std::vector<State>& images,
                          const std::vector<double>& padding) {
  CellImage out;
  for (VertexId v : grid.corner_vertices(cell)) {
    if (images[v].empty()) {
      out.escaped = true;
      return out;
    }
  }
  StateBox box = bounding_box(lift_corner_images(grid, cell, images));
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    box.lower[d] -= padding[d];
    box.upper[d] += padding[d];
  }
  auto hit = grid.cells_intersecting(box);
  if (hit.clipped) {
    out.escaped = true;
    return out;
  }
  out.cells = std::move(hit.cells);
  return out;
}

CellImage gp_cell_image(const CubicalGrid& grid, CellId cell, const std::vector<State>& means,
                        const Prediction& center, double delta, const std::vector<double>& padding) {
  CellImage out;
  StateBox hull = bounding_box(lift_corner_images(grid, cell, means));
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    hull.lower[d] -= padding[d];
    hull.upper[d] += padding[d];
  }
  const StateBox cube = confidence_hypercube(center, delta);
  for (const auto& v : {hull.lower, hull.upper, cube.lower, cube.upper}) {
    if (!all_finite(v)) {
      out.escaped = true;
      return out;
    }
  }
  auto a = grid.cells_intersecting(hull);
  auto b = grid.cells_intersecting(cube);
  if (a.clipped || b.clipped) {
    out.escaped = true;
    return out;
  }
  out.cells.reserve(a.cells.size() + b.cells.size());
  std::set_union(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(out.cells));
  return out;
}

MultivaluedMap assemble(const CubicalGrid& grid, std::vector<CellImage>& images, MapMode mode,
                        std::vector<double> padding, double delta) {
  std::vector<std::vector<CellId>> succ(images.size());
  std::vector<bool> escaped(images.size(), false);
  for (std::size_t c = 0; c < images.size(); ++c) {
    succ[c] = std::move(images[c].cells);
    escaped[c] = images[c].escaped;
  }
  return MultivaluedMap(grid, succ, std::move(escaped), mode, std::move(padding), delta);
}

MultivaluedMap true_map_impl(const CubicalGrid& grid, FlowMap& flow, const std::vector<double>& padding_in,
                             bool parallel) {
  const auto padding = checked_padding(grid, padding_in);
  const auto images = vertex_images(grid, flow, parallel);
  const std::size_t n = grid.cell_count();
  std::vector<CellImage> cells(n);
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (std::size_t c = 0; c < n; ++c) cells[c] = true_cell_image(grid, c, images, padding);
  return assemble(grid, cells, MapMode::TrueDynamics, padding, 0.0);
}

void check_gp_inputs(const CubicalGrid& grid, const GpSurrogate& model, double delta) {
  if (model.dim() != grid.dim()) throw DimensionError("model and grid dimensions differ");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}

}  // namespace

MultivaluedMap build_true_map(const CubicalGrid& grid, FlowMap& flow, const std::vector<double>& padding) {
  return true_map_impl(grid, flow, padding, true);
}

MultivaluedMap build_gp_map(const CubicalGrid& grid, const GpSurrogate& model, double delta,
                            double* center_stddev, const std::vector<double>& padding_in) {
  check_gp_inputs(grid, model, delta);
  const auto padding = checked_padding(grid, padding_in);
  std::vector<State> vertices(grid.vertex_count());
  for (VertexId v = 0; v < vertices.size(); ++v) vertices[v] = grid.vertex_point(v);
  std::vector<State> centers(grid.cell_count());
  for (CellId c = 0; c < centers.size(); ++c) centers[c] = grid.center(c);

  const auto vpred = model.predict_batch(vertices, false);
  std::vector<State> means(vpred.size());
  for (std::size_t v = 0; v < vpred.size(); ++v) means[v] = vpred[v].mean;
  const auto cpred = model.predict_batch(centers, true);

  const std::size_t n = grid.cell_count();
  std::vector<CellImage> cells(n);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::size_t c = 0; c < n; ++c) cells[c] = gp_cell_image(grid, c, means, cpred[c], delta, padding);

  if (center_stddev) {
    double sum = 0.0;
    for (const auto& p : cpred) {
      for (double s : p.stddev) sum += s;
    }
    *center_stddev = sum / static_cast<double>(n * grid.dim());
  }
  return assemble(grid, cells, MapMode::GpConfidence, padding, delta);
}

namespace reference {

MultivaluedMap build_true_map(const CubicalGrid& grid, FlowMap& flow, const std::vector<double>& padding) {
  return true_map_impl(grid, flow, padding, false);
}

MultivaluedMap build_gp_map(const CubicalGrid& grid, const GpSurrogate& model, double delta,
                            const std::vector<double>& padding_in) {
  check_gp_inputs(grid, model, delta);
  const auto padding = checked_padding(grid, padding_in);
  std::vector<State> means(grid.vertex_count());
  for (VertexId v = 0; v < means.size(); ++v) means[v] = model.predict_mean(grid.vertex_point(v));
  std::vector<CellImage> cells(grid.cell_count());
  for (CellId c = 0; c < cells.size(); ++c) {
    cells[c] = gp_cell_image(grid, c, means, model.predict(grid.center(c)), delta, padding);
  }
  return assemble(grid, cells, MapMode::GpConfidence, padding, delta);
}

}  // namespace reference

void write_map(std::ostream& out, const MultivaluedMap& map) {
  const auto& g = map.grid();
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "# gpmorse-map 1\n# dim " << g.dim() << "\n# cells";
  for (auto n : g.counts()) out << ' ' << n;
  out << "\n# lower";
  for (double v : g.bounds().lower) out << ' ' << num(v);
  out << "\n# upper";
  for (double v : g.bounds().upper) out << ' ' << num(v);
  out << "\n# periodic";
  for (bool p : g.periodic_flags()) out << ' ' << (p ? 1 : 0);
  if (map.mode() == MapMode::TrueDynamics) {
    out << "\n# mode true";
  } else {
    out << "\n# mode gp\n# delta " << num(map.delta());
  }
  out << "\n# padding";
  for (double e : map.padding()) out << ' ' << num(e);
  const auto esc = map.escaped_cells();
  out << "\n# escaped " << esc.size();
  for (auto c : esc) out << ' ' << c;
  out << "\n# edges " << map.edge_count() << "\n";
  for (CellId c = 0; c < map.cell_count(); ++c) {
    for (CellId t : map.successors(c)) out << c << " -> " << t << "\n";
  }
}

}  // namespace gpmorse
