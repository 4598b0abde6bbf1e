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
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpmorse/dynamics.hpp"
#include "gpmorse/gp.hpp"
#include "gpmorse/grid.hpp"
#include "gpmorse/morse.hpp"
#include "gpmorse/mvmap.hpp"

namespace gpmorse {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a refinement round cannot proceed (e.g. the target region vanished).
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetMode { Short, Long };
enum class SamplingScope { Global, TargetRoa };

struct PipelineConfig {
  // system
  std::string system = "pendulum-lqr";
  Parameters parameters;
  std::optional<double> tau;   // seconds; system default when unset
  std::optional<double> step;  // integrator step
  double noise_std = 0.0;

  // grid; unset bounds and periodic flags come from the system
  std::optional<StateBox> domain;
  std::vector<std::size_t> cells;  // per dimension
  std::vector<bool> periodic;

  // initial data
  DatasetMode dataset_mode = DatasetMode::Short;
  std::size_t initial_count = 300;  // trajectories
  double long_total_time = 0.0;     // per long trajectory, seconds

  // kernel and optimiser
  Smoothness smoothness = Smoothness::Matern52;
  std::size_t restarts = 8;
  std::size_t iterations = 200;
  double gradient_tol = 1e-6;
  std::size_t refit_every = 10;      // 0: never refit during refinement
  std::size_t refit_iterations = 25;

  double delta_initial = 0.875;
  double delta_final = 0.875;

  std::size_t points_per_round = 10;
  std::size_t rounds = 0;
  SamplingScope scope = SamplingScope::Global;

  std::optional<StateBox> goal;  // system default when unset

  std::size_t truth_multiplier = 4;
  double truth_horizon = 30.0;  // seconds (map steps for discrete systems)

  std::vector<double> padding;  // per-dimension image inflation, both modes
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// Everything derived from a config before any propagation.
struct Setup {
  SystemDescription system;  // domain, goal, tau and step resolved
  CubicalGrid grid;
  StateBox goal;
};

Setup resolve(const PipelineConfig& config);

/// Delta used after `round` refinement rounds.
double delta_at(const PipelineConfig& config, std::size_t round);

/// Seed for a refinement round; independent of how the run was split up.
std::uint64_t round_seed(std::uint64_t seed, std::size_t round);

struct Score {
  double roa_ratio = 0.0;    // |estimate ∩ truth| / |truth|
  double fp_fraction = 0.0;  // |estimate \ truth| / |X|
};

struct RoundRecord {
  std::size_t round = 0;
  double delta = 0.0;
  std::size_t samples = 0;
  double mean_stddev = 0.0;  // over cell centers and outputs
  std::size_t morse_nodes = 0;
  std::size_t attractors = 0;
  std::size_t roa_cells = 0;
  std::optional<Score> score;
};

struct EvaluationReport {
  std::string system;
  std::uint64_t propagation_count = 0;  // method budget only
  std::vector<RoundRecord> history;     // round 0 is the initial phase

  const RoundRecord& last() const { return history.back(); }
};

void write_report(std::ostream& out, const EvaluationReport& report);
EvaluationReport read_report(std::istream& in);

struct GroundTruth {
  Raster raster;             // 1 inside, 0 outside
  std::uint64_t steps = 0;   // integrator steps (or map applications)
  std::size_t non_finite = 0;
};

/// Rolls out the true dynamics from every fine-cell center until the goal is
/// entered or the horizon expires.
GroundTruth ground_truth_roa(const SystemDescription& system, const CubicalGrid& fine, const StateBox& goal,
                             double horizon);

/// Grid of the ground-truth raster for a config.
CubicalGrid truth_grid(const PipelineConfig& config, const Setup& setup);

/// Labels fine cells by the coarse cell containing their center.
Score score(const CubicalGrid& grid, const std::vector<CellId>& estimate, const Raster& truth);

struct PipelineState {
  TrajectoryDataset data;
  GpSurrogate model;
  MorseGraphResult graph;
  GoalRegion goal_region;
  std::optional<MultivaluedMap> map;
  std::size_t rounds_done = 0;
  EvaluationReport report;
};

/// Initial data set (short or long trajectories) drawn from the round-0 seed.
TrajectoryDataset collect_initial(const PipelineConfig& config, const Setup& setup, FlowMap& flow);

/// Full multi-start hyperparameter fit with the configured kernel settings.
GpSurrogate fit_model(const PipelineConfig& config, const Setup& setup, const TrajectoryDataset& data,
                      FitDiagnostics* diagnostics = nullptr);

/// Collect data, fit, build the confidence map and analyse it.
PipelineState initialize(const PipelineConfig& config, const Setup& setup, FlowMap& flow,
                         const Raster* truth = nullptr);

/// Rebuilds a state from saved artifacts. With an empty report the initial
/// phase is analysed and recorded, as initialize() would.
PipelineState restore(const PipelineConfig& config, const Setup& setup, TrajectoryDataset data, GpSurrogate model,
                      EvaluationReport report, const Raster* truth = nullptr);

/// Runs `rounds` more refinement rounds.
void refine(const PipelineConfig& config, const Setup& setup, FlowMap& flow, PipelineState& state,
            std::size_t rounds, const Raster* truth = nullptr);

PipelineState run(const PipelineConfig& config, const Setup& setup, FlowMap& flow,
                  const Raster* truth = nullptr);

/// The corner-image baseline: one propagation per grid vertex.
struct TrueModeResult {
  std::optional<MultivaluedMap> map;
  MorseGraphResult graph;
  GoalRegion goal_region;
  std::uint64_t propagation_count = 0;
  std::optional<Score> score;
};

TrueModeResult run_true_mode(const PipelineConfig& config, const Setup& setup, FlowMap& flow,
                             const Raster* truth = nullptr);

/// Shifts periodic coordinates of each pair by whole periods so inputs lie in the grid.
void normalize_periodic(TrajectoryDataset& data, const CubicalGrid& grid);

namespace reference {

GroundTruth ground_truth_roa(const SystemDescription& system, const CubicalGrid& fine, const StateBox& goal,
                             double horizon);

}  // namespace reference

}  // namespace gpmorse
