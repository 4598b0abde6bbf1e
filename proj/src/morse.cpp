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

#include "gpmorse/morse.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gpmorse/io.hpp"

namespace gpmorse {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

}  // namespace

// Iterative Tarjan; components come out sinks first.
Condensation condense(const MultivaluedMap& map) {
  const std::size_t n = map.cell_count();
  Condensation out;
  out.component.assign(n, kNone);
  std::vector<std::size_t> index(n, kNone);
  std::vector<std::size_t> low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<CellId> stack;
  struct Frame {
    CellId cell;
    std::size_t next;
  };
  std::vector<Frame> call;
  std::size_t counter = 0;

  for (CellId root = 0; root < n; ++root) {
    if (index[root] != kNone) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto succ = map.successors(f.cell);
      if (f.next < succ.size()) {
        const CellId w = succ[f.next++];
        if (index[w] == kNone) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.cell] = std::min(low[f.cell], index[w]);
        }
        continue;
      }
      const CellId v = f.cell;
      call.pop_back();
      if (!call.empty()) low[call.back().cell] = std::min(low[call.back().cell], low[v]);
      if (low[v] != index[v]) continue;
      const std::size_t id = out.members.size();
      std::vector<CellId> comp;
      CellId w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        out.component[w] = id;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.members.push_back(std::move(comp));
    }
  }

  const std::size_t k = out.members.size();
  out.successors.resize(k);
  out.recurrent.assign(k, false);
  out.escaped.assign(k, false);
  out.cell_escaped = map.escaped_flags();
  for (CellId c = 0; c < n; ++c) {
    const std::size_t a = out.component[c];
    if (map.escaped(c)) out.escaped[a] = true;
    for (CellId t : map.successors(c)) {
      const std::size_t b = out.component[t];
      if (a == b) {
        out.recurrent[a] = true;
      } else {
        out.successors[a].push_back(b);
      }
    }
  }
  for (auto& s : out.successors) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  out.order.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.order[i] = k - 1 - i;
  return out;
}

MorseGraphResult morse_graph(const Condensation& cg) {
  MorseGraphResult g;
  std::vector<std::size_t> comps;
  for (std::size_t c = 0; c < cg.size(); ++c) {
    if (cg.recurrent[c]) comps.push_back(c);
  }
  std::sort(comps.begin(), comps.end(),
            [&](std::size_t a, std::size_t b) { return cg.members[a].front() < cg.members[b].front(); });
  std::vector<std::size_t> node_of(cg.size(), kNone);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    node_of[comps[i]] = i;
    g.nodes.push_back(cg.members[comps[i]]);
  }
  g.node_component = comps;

  // breadth-first search from each node over the condensation
  std::vector<std::size_t> stamp(cg.size(), kNone);
  std::vector<std::size_t> queue;
  g.reachable.resize(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    queue.assign(1, comps[i]);
    stamp[comps[i]] = i;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      for (std::size_t s : cg.successors[queue[q]]) {
        if (stamp[s] == i) continue;
        stamp[s] = i;
        queue.push_back(s);
        if (node_of[s] != kNone) g.reachable[i].push_back(node_of[s]);
      }
    }
    std::sort(g.reachable[i].begin(), g.reachable[i].end());
  }

  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& ri = g.reachable[i];
    for (std::size_t j : ri) {
      const bool implied = std::any_of(ri.begin(), ri.end(), [&](std::size_t m) {
        return m != j && std::binary_search(g.reachable[m].begin(), g.reachable[m].end(), j);
      });
      if (!implied) g.edges.emplace_back(i, j);
    }
    if (ri.empty()) g.attractors.push_back(i);
  }
  return g;
}

std::vector<int> regions_of_attraction(const Condensation& cg, const MorseGraphResult& g) {
  // per component: attractor seen (kNone = none, kMany = several) and escape flag
  constexpr std::size_t kMany = kNone - 1;
  std::vector<std::size_t> seen(cg.size(), kNone);
  std::vector<bool> leaks(cg.size(), false);
  std::vector<std::size_t> attractor_of(cg.size(), kNone);
  for (std::size_t a : g.attractors) attractor_of[g.node_component[a]] = a;

  for (auto it = cg.order.rbegin(); it != cg.order.rend(); ++it) {
    const std::size_t c = *it;
    std::size_t s = attractor_of[c];
    bool leak = cg.escaped[c];
    for (std::size_t t : cg.successors[c]) {
      leak = leak || leaks[t];
      if (seen[t] == kNone || seen[t] == s) continue;
      s = s == kNone ? seen[t] : kMany;
    }
    seen[c] = s;
    leaks[c] = leak;
  }

  std::vector<int> roa(cg.component.size(), kUncertain);
  for (CellId cell = 0; cell < roa.size(); ++cell) {
    const std::size_t c = cg.component[cell];
    if (cg.cell_escaped[cell]) {
      roa[cell] = kEscaped;
    } else if (!leaks[c] && seen[c] != kNone && seen[c] != kMany) {
      roa[cell] = static_cast<int>(seen[c]);
    }
  }
  return roa;
}

MorseGraphResult analyze(const MultivaluedMap& map) {
  const Condensation cg = condense(map);
  MorseGraphResult g = morse_graph(cg);
  g.roa = regions_of_attraction(cg, g);
  return g;
}

GoalRegion roa_for_goal(const MorseGraphResult& g, const CubicalGrid& grid, const StateBox& goal) {
  if (goal.dim() != grid.dim()) throw DimensionError("goal and grid dimensions differ");
  const auto hit = grid.cells_intersecting(goal);
  if (hit.cells.empty()) throw std::invalid_argument("goal box lies outside the state space");
  if (g.roa.size() != grid.cell_count()) throw std::invalid_argument("regions of attraction not computed");
  GoalRegion out;
  for (std::size_t a : g.attractors) {
    const auto& cells = g.nodes[a];
    const bool meets = std::any_of(hit.cells.begin(), hit.cells.end(),
                                   [&](CellId c) { return std::binary_search(cells.begin(), cells.end(), c); });
    if (meets) out.attractors.push_back(a);
  }
  for (CellId c = 0; c < g.roa.size(); ++c) {
    const int label = g.roa[c];
    if (label >= 0 && std::binary_search(out.attractors.begin(), out.attractors.end(),
                                         static_cast<std::size_t>(label))) {
      out.cells.push_back(c);
    }
  }
  return out;
}

void write_dot(std::ostream& out, const MorseGraphResult& g) {
  out << "digraph morse {\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    out << "  n" << i << " [label=\"" << i << ": " << g.nodes[i].size() << " cells\", shape="
        << (g.is_attractor(i) ? "doublecircle" : "circle") << "];\n";
  }
  for (const auto& [a, b] : g.edges) out << "  n" << a << " -> n" << b << ";\n";
  out << "}\n";
}

void write_raster(std::ostream& out, const Raster& r) {
  const auto& g = r.grid;
  out << "gpmorse-raster 1\ndim " << g.dim() << "\ncells";
  for (auto n : g.counts()) out << ' ' << n;
  out << "\nlower";
  for (double v : g.bounds().lower) out << ' ' << format_number(v);
  out << "\nupper";
  for (double v : g.bounds().upper) out << ' ' << format_number(v);
  out << "\nperiodic";
  for (bool p : g.periodic_flags()) out << ' ' << (p ? 1 : 0);
  out << "\nlabels\n";
  const std::size_t row = g.cells_along(0);
  for (std::size_t c = 0; c < r.labels.size(); ++c) {
    out << r.labels[c] << ((c + 1) % row == 0 ? '\n' : ' ');
  }
}

Raster read_raster(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* key) {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, std::string("missing '") + key + "' line");
    ++lineno;
    std::istringstream is(line);
    std::string k;
    is >> k;
    if (k != key) throw ParseError(lineno, std::string("expected '") + key + "'");
    std::string rest;
    std::getline(is, rest);
    return std::istringstream(rest);
  };
  {
    auto is = next("gpmorse-raster");
    int version = 0;
    if (!(is >> version) || version != 1) throw ParseError(lineno, "unsupported raster version");
  }
  std::size_t dim = 0;
  if (!(next("dim") >> dim) || dim == 0) throw ParseError(lineno, "bad dimension");
  std::vector<std::size_t> counts(dim);
  State lo(dim), hi(dim);
  std::vector<bool> periodic(dim);
  {
    auto is = next("cells");
    for (auto& c : counts) {
      if (!(is >> c) || c == 0) throw ParseError(lineno, "bad cell count");
    }
  }
  {
    auto is = next("lower");
    for (auto& v : lo) {
      if (!(is >> v)) throw ParseError(lineno, "bad lower bound");
    }
  }
  {
    auto is = next("upper");
    for (auto& v : hi) {
      if (!(is >> v)) throw ParseError(lineno, "bad upper bound");
    }
  }
  {
    auto is = next("periodic");
    for (std::size_t d = 0; d < dim; ++d) {
      int p = 0;
      if (!(is >> p) || (p != 0 && p != 1)) throw ParseError(lineno, "bad periodic flag");
      periodic[d] = p == 1;
    }
  }
  next("labels");
  CubicalGrid grid = [&] {
    try {
      return CubicalGrid(StateBox(lo, hi), counts, periodic);
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }();
  Raster r{std::move(grid), {}};
  r.labels.reserve(r.grid.cell_count());
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    long v = 0;
    while (is >> v) r.labels.push_back(static_cast<int>(v));
    if (!is.eof()) throw ParseError(lineno, "non-integer label");
    if (r.labels.size() > r.grid.cell_count()) throw ParseError(lineno, "too many labels");
  }
  if (r.labels.size() != r.grid.cell_count()) {
    throw ParseError(lineno, "expected " + std::to_string(r.grid.cell_count()) + " labels, got " +
                                 std::to_string(r.labels.size()));
  }
  return r;
}

}  // namespace gpmorse
