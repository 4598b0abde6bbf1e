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

#include "gpmorse/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace gpmorse {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dataset(std::ostream& out, const TrajectoryDataset& data) {
  const std::string name = data.system.empty() ? "-" : data.system;
  out << "gpmorse-dataset 1 " << data.dim << ' ' << format_number(data.tau) << ' ' << name << ' '
      << data.propagation_count << "\n";
  for (const auto& s : data.pairs) {
    for (std::size_t d = 0; d < data.dim; ++d) out << (d ? " " : "") << format_number(s.x[d]);
    for (std::size_t d = 0; d < data.dim; ++d) out << ' ' << format_number(s.y[d]);
    out << "\n";
  }
}

TrajectoryDataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "empty dataset file");
  TrajectoryDataset data;
  {
    std::istringstream is(line);
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version >> data.dim >> data.tau >> data.system >> data.propagation_count) ||
        magic != "gpmorse-dataset" || version != 1) {
      throw ParseError(1, "expected 'gpmorse-dataset 1 <dim> <tau> <system> <propagations>'");
    }
    if (data.dim == 0) throw ParseError(1, "dimension must be positive");
    if (data.system == "-") data.system.clear();
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    Sample s;
    s.x.resize(data.dim);
    s.y.resize(data.dim);
    for (auto& v : s.x) {
      if (!(is >> v)) throw ParseError(lineno, "expected " + std::to_string(2 * data.dim) + " numbers");
    }
    for (auto& v : s.y) {
      if (!(is >> v)) throw ParseError(lineno, "expected " + std::to_string(2 * data.dim) + " numbers");
    }
    std::string extra;
    if (is >> extra) throw ParseError(lineno, "trailing token '" + extra + "'");
    for (std::size_t d = 0; d < data.dim; ++d) {
      if (!std::isfinite(s.x[d]) || !std::isfinite(s.y[d])) throw ParseError(lineno, "non-finite value");
    }
    data.pairs.push_back(std::move(s));
  }
  return data;
}

}  // namespace gpmorse
