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

#include "gpmorse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "gpmorse/io.hpp"

namespace gpmorse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool valid_delta(double d) { return d > 0.0 && d < 1.0; }

State uniform_in(const StateBox& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State x(box.dim());
  for (std::size_t d = 0; d < x.size(); ++d) x[d] = box.lower[d] + unit(rng) * box.width(d);
  return x;
}

FitOptions fit_options(const PipelineConfig& config, const CubicalGrid& grid) {
  FitOptions o;
  o.smoothness = config.smoothness;
  o.restarts = config.restarts;
  o.iterations = config.iterations;
  o.gradient_tol = config.gradient_tol;
  o.seed = config.seed;
  o.periods.assign(grid.dim(), 0.0);
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    if (grid.periodic(d)) o.periods[d] = grid.period(d);
  }
  return o;
}

}  // namespace

void PipelineConfig::validate() const {
  if (initial_count == 0) throw ConfigError("dataset.count must be positive");
  if (rounds > 0 && points_per_round == 0) throw ConfigError("refinement.points_per_round must be positive");
  if (!valid_delta(delta_initial) || !valid_delta(delta_final)) throw ConfigError("delta values must lie in (0, 1)");
  if (tau && !(*tau > 0.0)) throw ConfigError("system.tau must be positive");
  if (step && !(*step > 0.0)) throw ConfigError("system.step must be positive");
  if (tau && step && *step > *tau) throw ConfigError("system.step must not exceed system.tau");
  if (!(noise_std >= 0.0)) throw ConfigError("system.noise_std must be non-negative");
  if (cells.empty()) throw ConfigError("grid.cells (or grid.subdivisions) is required");
  for (auto c : cells) {
    if (c == 0) throw ConfigError("grid.cells entries must be positive");
  }
  if (dataset_mode == DatasetMode::Long && !(long_total_time > 0.0)) {
    throw ConfigError("dataset.long_total_time must be positive in long mode");
  }
  if (restarts == 0) throw ConfigError("kernel.restarts must be positive");
  if (!(gradient_tol > 0.0)) throw ConfigError("kernel.gradient_tol must be positive");
  if (truth_multiplier < 2) throw ConfigError("truth.resolution must be at least 2");
  if (!(truth_horizon >= 0.0)) throw ConfigError("truth.horizon must be non-negative");
  for (double e : padding) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("padding entries must be non-negative");
  }
}

Setup resolve(const PipelineConfig& config) {
  config.validate();
  SystemDescription sys;
  try {
    sys = make_system(config.system, config.parameters);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.tau) sys.tau = *config.tau;
  if (config.step) sys.step = *config.step;
  if (!sys.discrete && sys.step > sys.tau) throw ConfigError("system.step must not exceed system.tau");
  if (config.domain) {
    if (config.domain->dim() != sys.dim) throw ConfigError("grid bounds do not match the system dimension");
    sys.domain = *config.domain;
  }
  if (!config.periodic.empty()) {
    if (config.periodic.size() != sys.dim) throw ConfigError("grid.periodic does not match the system dimension");
    sys.periodic = config.periodic;
  }
  if (config.cells.size() != sys.dim) throw ConfigError("grid.cells does not match the system dimension");
  if (config.goal) {
    if (config.goal->dim() != sys.dim) throw ConfigError("goal does not match the system dimension");
    sys.goal = *config.goal;
  }
  if (!config.padding.empty() && config.padding.size() != sys.dim) {
    throw ConfigError("padding needs one entry per dimension");
  }
  CubicalGrid grid(sys.domain, config.cells, sys.periodic);
  if (grid.cells_intersecting(sys.goal).cells.empty()) throw ConfigError("goal lies outside the state space");
  StateBox goal = sys.goal;
  return Setup{std::move(sys), std::move(grid), std::move(goal)};
}

double delta_at(const PipelineConfig& config, std::size_t round) {
  if (config.rounds == 0) return config.delta_initial;
  const double t = static_cast<double>(std::min(round, config.rounds)) / static_cast<double>(config.rounds);
  return config.delta_initial + t * (config.delta_final - config.delta_initial);
}

std::uint64_t round_seed(std::uint64_t seed, std::size_t round) {
  return splitmix64(splitmix64(seed) ^ (0xd1b54a32d192ed03ULL * (round + 1)));
}

void normalize_periodic(TrajectoryDataset& data, const CubicalGrid& grid) {
  for (auto& s : data.pairs) {
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      if (!grid.periodic(d)) continue;
      const double p = grid.period(d);
      const double k = std::floor((s.x[d] - grid.bounds().lower[d]) / p);
      if (k == 0.0) continue;
      s.x[d] -= k * p;
      s.y[d] -= k * p;
    }
  }
}

CubicalGrid truth_grid(const PipelineConfig& config, const Setup& setup) {
  return setup.grid.refined(config.truth_multiplier);
}

namespace {

GroundTruth truth_impl(const SystemDescription& sys, const CubicalGrid& fine, const StateBox& goal, double horizon,
                       bool parallel) {
  if (fine.dim() != sys.dim || goal.dim() != sys.dim) throw DimensionError("ground truth dimensions differ");
  const std::size_t n = fine.cell_count();
  GroundTruth out{Raster{fine, std::vector<int>(n, 0)}, 0, 0};
  const std::size_t max_steps = sys.discrete
                                    ? static_cast<std::size_t>(std::floor(horizon + 1e-9))
                                    : static_cast<std::size_t>(std::ceil(horizon / sys.step - 1e-9));
  std::uint64_t steps = 0;
  std::size_t bad = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : steps, bad) if (parallel)
  for (std::size_t c = 0; c < n; ++c) {
    State x = fine.center(c);
    State next(x.size());
    const auto in_goal = [&] {
      for (std::size_t d = 0; d < x.size(); ++d) {
        double v = x[d];
        if (fine.periodic(d)) {
          const double lo = fine.bounds().lower[d];
          v = lo + (v - lo) - std::floor((v - lo) / fine.period(d)) * fine.period(d);
        }
        if (v < goal.lower[d] || v > goal.upper[d]) return false;
      }
      return true;
    };
    int label = in_goal() ? 1 : 0;
    for (std::size_t k = 0; k < max_steps && label == 0; ++k) {
      if (sys.discrete) {
        sys.map(x, next);
        x.swap(next);
      } else {
        rk4_step(sys.field, x, sys.step);
      }
      ++steps;
      if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
        ++bad;
        break;
      }
      if (in_goal()) label = 1;
    }
    out.raster.labels[c] = label;
  }
  out.steps = steps;
  out.non_finite = bad;
  return out;
}

void check_same_space(const CubicalGrid& a, const CubicalGrid& b) {
  if (a.dim() != b.dim() || a.bounds().lower != b.bounds().lower || a.bounds().upper != b.bounds().upper ||
      a.periodic_flags() != b.periodic_flags()) {
    throw std::invalid_argument("grid mismatch: the truth raster covers a different state space");
  }
}

}  // namespace

GroundTruth ground_truth_roa(const SystemDescription& sys, const CubicalGrid& fine, const StateBox& goal,
                             double horizon) {
  return truth_impl(sys, fine, goal, horizon, true);
}

namespace reference {

GroundTruth ground_truth_roa(const SystemDescription& sys, const CubicalGrid& fine, const StateBox& goal,
                             double horizon) {
  return truth_impl(sys, fine, goal, horizon, false);
}

}  // namespace reference

Score score(const CubicalGrid& grid, const std::vector<CellId>& estimate, const Raster& truth) {
  check_same_space(grid, truth.grid);
  if (truth.labels.size() != truth.grid.cell_count()) throw std::invalid_argument("truth raster is incomplete");
  std::vector<bool> in(grid.cell_count(), false);
  for (CellId c : estimate) in.at(c) = true;
  std::size_t true_count = 0;
  std::size_t hit = 0;
  std::size_t false_pos = 0;
  for (CellId f = 0; f < truth.labels.size(); ++f) {
    const auto c = grid.locate(truth.grid.center(f));
    const bool est = c && in[*c];
    const bool tru = truth.labels[f] == 1;
    true_count += tru;
    hit += est && tru;
    false_pos += est && !tru;
  }
  Score s;
  s.roa_ratio = true_count ? static_cast<double>(hit) / static_cast<double>(true_count) : (hit + false_pos == 0 ? 1.0 : 0.0);
  s.fp_fraction = static_cast<double>(false_pos) / static_cast<double>(truth.labels.size());
  return s;
}

namespace {

void record_round(PipelineState& st, double delta, double sigma, const Raster* truth, const CubicalGrid& grid) {
  RoundRecord r;
  r.round = st.rounds_done;
  r.delta = delta;
  r.samples = st.data.size();
  r.mean_stddev = sigma;
  r.morse_nodes = st.graph.nodes.size();
  r.attractors = st.graph.attractors.size();
  r.roa_cells = st.goal_region.cells.size();
  if (truth) r.score = score(grid, st.goal_region.cells, *truth);
  st.report.propagation_count = st.data.propagation_count;
  st.report.history.push_back(r);
}

double analyse_state(const PipelineConfig& config, const Setup& setup, PipelineState& st) {
  double sigma = 0.0;
  st.map.emplace(build_gp_map(setup.grid, st.model, delta_at(config, st.rounds_done), &sigma, config.padding));
  st.graph = analyze(*st.map);
  st.goal_region = roa_for_goal(st.graph, setup.grid, setup.goal);
  return sigma;
}

std::vector<State> draw_round_states(const PipelineConfig& config, const Setup& setup, const PipelineState& st,
                                     std::mt19937_64& rng) {
  const std::size_t n = config.points_per_round;
  std::vector<State> states;
  states.reserve(n);
  if (config.scope == SamplingScope::Global) {
    for (std::size_t i = 0; i < n; ++i) states.push_back(uniform_in(setup.system.domain, rng));
    return states;
  }
  const auto& roa = st.goal_region.cells;
  if (roa.empty()) {
    throw PipelineError("refinement round " + std::to_string(st.rounds_done + 1) +
                        ": the target region of attraction is empty, nothing to sample");
  }
  std::set<CellId> shell_set;
  for (CellId c : roa) {
    for (CellId nb : setup.grid.neighbours(c)) {
      if (!std::binary_search(roa.begin(), roa.end(), nb)) shell_set.insert(nb);
    }
  }
  const std::vector<CellId> shell(shell_set.begin(), shell_set.end());
  const std::size_t inside = shell.empty() ? n : (n + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = i < inside ? roa : shell;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    states.push_back(uniform_in(setup.grid.cell_box(pool[pick(rng)]), rng));
  }
  return states;
}

}  // namespace

TrajectoryDataset collect_initial(const PipelineConfig& config, const Setup& setup, FlowMap& flow) {
  const std::uint64_t seed0 = round_seed(config.seed, 0);
  TrajectoryDataset data;
  if (config.dataset_mode == DatasetMode::Short) {
    data = sample_short_trajectories(flow, setup.system.domain, config.initial_count, seed0, {config.noise_std});
  } else {
    std::mt19937_64 rng(seed0);
    data.dim = flow.dim();
    data.tau = flow.tau();
    for (std::size_t i = 0; i < config.initial_count; ++i) {
      const State x0 = uniform_in(setup.system.domain, rng);
      data.append(decompose_long_trajectory(flow, x0, config.long_total_time));
    }
    normalize_periodic(data, setup.grid);
  }
  data.system = setup.system.name;
  return data;
}

GpSurrogate fit_model(const PipelineConfig& config, const Setup& setup, const TrajectoryDataset& data,
                      FitDiagnostics* diagnostics) {
  return fit(data, fit_options(config, setup.grid), diagnostics);
}

PipelineState initialize(const PipelineConfig& config, const Setup& setup, FlowMap& flow, const Raster* truth) {
  TrajectoryDataset data = collect_initial(config, setup, flow);
  GpSurrogate model = fit_model(config, setup, data);
  return restore(config, setup, std::move(data), std::move(model), {}, truth);
}

PipelineState restore(const PipelineConfig& config, const Setup& setup, TrajectoryDataset data, GpSurrogate model,
                      EvaluationReport report, const Raster* truth) {
  if (data.dim != setup.grid.dim() || model.dim() != setup.grid.dim()) {
    throw DimensionError("saved artifacts do not match the configured system");
  }
  PipelineState st;
  st.data = std::move(data);
  st.model = std::move(model);
  st.report = std::move(report);
  st.report.system = setup.system.name;
  if (st.report.history.empty()) {
    const double sigma = analyse_state(config, setup, st);
    record_round(st, delta_at(config, 0), sigma, truth, setup.grid);
  } else {
    st.rounds_done = st.report.last().round;
    analyse_state(config, setup, st);
  }
  return st;
}

void refine(const PipelineConfig& config, const Setup& setup, FlowMap& flow, PipelineState& st, std::size_t rounds,
            const Raster* truth) {
  for (std::size_t k = 0; k < rounds; ++k) {
    const std::size_t r = st.rounds_done + 1;
    std::mt19937_64 rng(round_seed(config.seed, r));
    const auto states = draw_round_states(config, setup, st, rng);
    TrajectoryDataset added = sample_from_states(flow, states, round_seed(config.seed, r), {config.noise_std});
    st.data.append(added);
    if (config.refit_every > 0 && r % config.refit_every == 0) {
      FitOptions o = fit_options(config, setup.grid);
      o.restarts = 1;
      o.iterations = config.refit_iterations;
      for (const auto& om : st.model.outputs()) o.warm_start.push_back(om.log_params());
      st.model = fit(st.data, o);
    } else {
      st.model = condition(st.model, st.data);
    }
    st.rounds_done = r;
    const double sigma = analyse_state(config, setup, st);
    record_round(st, delta_at(config, r), sigma, truth, setup.grid);
  }
}

PipelineState run(const PipelineConfig& config, const Setup& setup, FlowMap& flow, const Raster* truth) {
  PipelineState st = initialize(config, setup, flow, truth);
  refine(config, setup, flow, st, config.rounds, truth);
  return st;
}

TrueModeResult run_true_mode(const PipelineConfig& config, const Setup& setup, FlowMap& flow, const Raster* truth) {
  TrueModeResult out;
  const std::uint64_t before = flow.propagation_count();
  out.map.emplace(build_true_map(setup.grid, flow, config.padding));
  out.propagation_count = flow.propagation_count() - before;
  out.graph = analyze(*out.map);
  out.goal_region = roa_for_goal(out.graph, setup.grid, setup.goal);
  if (truth) out.score = score(setup.grid, out.goal_region.cells, *truth);
  return out;
}

void write_report(std::ostream& out, const EvaluationReport& rep) {
  out << "gpmorse-report 1\n";
  out << "system " << (rep.system.empty() ? "-" : rep.system) << "\n";
  out << "propagations " << rep.propagation_count << "\n";
  if (!rep.history.empty()) {
    const auto& l = rep.last();
    out << "rounds " << l.round << "\nsamples " << l.samples << "\ndelta " << format_number(l.delta)
        << "\nmorse_nodes " << l.morse_nodes << "\nattractors " << l.attractors << "\nroa_cells " << l.roa_cells
        << "\nroa_ratio " << (l.score ? format_number(l.score->roa_ratio) : "n/a") << "\nfp_fraction "
        << (l.score ? format_number(l.score->fp_fraction) : "n/a") << "\n";
  }
  out << "history " << rep.history.size() << "\n";
  out << "# round delta samples mean_stddev morse_nodes attractors roa_cells roa_ratio fp_fraction\n";
  for (const auto& r : rep.history) {
    out << r.round << ' ' << format_number(r.delta) << ' ' << r.samples << ' ' << format_number(r.mean_stddev)
        << ' ' << r.morse_nodes << ' ' << r.attractors << ' ' << r.roa_cells << ' '
        << (r.score ? format_number(r.score->roa_ratio) : "n/a") << ' '
        << (r.score ? format_number(r.score->fp_fraction) : "n/a") << "\n";
  }
}

EvaluationReport read_report(std::istream& in) {
  EvaluationReport rep;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  bool in_history = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    if (lineno == 1) {
      if (line != "gpmorse-report 1") throw ParseError(lineno, "expected 'gpmorse-report 1'");
      continue;
    }
    if (!in_history) {
      std::string key;
      is >> key;
      if (key == "system") {
        is >> rep.system;
        if (rep.system == "-") rep.system.clear();
      } else if (key == "propagations") {
        if (!(is >> rep.propagation_count)) throw ParseError(lineno, "bad propagation count");
      } else if (key == "history") {
        if (!(is >> expected)) throw ParseError(lineno, "bad history length");
        in_history = true;
      }
      continue;
    }
    RoundRecord r;
    std::string ratio, fp;
    if (!(is >> r.round >> r.delta >> r.samples >> r.mean_stddev >> r.morse_nodes >> r.attractors >> r.roa_cells >>
          ratio >> fp)) {
      throw ParseError(lineno, "bad history row");
    }
    if (ratio != "n/a") {
      try {
        r.score = Score{std::stod(ratio), std::stod(fp)};
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad score values");
      }
    }
    rep.history.push_back(r);
  }
  if (lineno == 0) throw ParseError(1, "empty report");
  if (rep.history.size() != expected) throw ParseError(lineno, "history has the wrong number of rows");
  return rep;
}

}  // namespace gpmorse
