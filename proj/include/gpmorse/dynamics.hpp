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

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpmorse/grid.hpp"

namespace gpmorse {

/// Raised when a propagation produces NaN or infinity.
class NonFiniteStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Right-hand side dx = f(x) of an autonomous closed-loop ODE.
using VectorField = std::function<void(std::span<const double> x, std::span<double> dx)>;
/// One application of a discrete-time map.
using DiscreteMap = std::function<void(std::span<const double> x, std::span<double> y)>;

/// Fixed-step classical 4th-order Runge-Kutta step of size h, in place.
void rk4_step(const VectorField& f, std::span<double> x, double h);

/// Integrates for `duration` with steps no larger than h (the last step
/// absorbs the remainder so the total is exact).
void rk4_integrate(const VectorField& f, std::span<double> x, double duration, double h);

/// The time-tau map phi_tau. Every call to flow() counts as one true-dynamics
/// propagation; evaluate() is the uncounted primitive.
class FlowMap {
 public:
  virtual ~FlowMap() = default;

  virtual std::size_t dim() const = 0;
  virtual double tau() const = 0;
  /// False for maps that must be driven from a single thread (oracles).
  virtual bool thread_safe() const { return true; }

  /// Counted propagation. Throws NonFiniteStateError on a non-finite result.
  State flow(std::span<const double> x);

  std::uint64_t propagation_count() const { return count_.load(std::memory_order_relaxed); }
  void reset_count(std::uint64_t value = 0) { count_.store(value, std::memory_order_relaxed); }

 protected:
  virtual State evaluate(std::span<const double> x) const = 0;

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// A built-in benchmark system together with its default analysis setup.
struct SystemDescription {
  std::string name;
  std::size_t dim = 0;
  bool discrete = false;
  VectorField field;        // continuous systems
  DiscreteMap map;          // discrete systems
  StateBox domain;
  std::vector<bool> periodic;
  StateBox goal;
  double tau = 1.0;         // seconds; one map step for discrete systems
  double step = 0.01;       // integrator step h
  std::map<std::string, double> parameters;
};

using Parameters = std::map<std::string, double>;

/// Names accepted by make_system().
std::vector<std::string> builtin_system_names();

/// Builds a built-in system; `overrides` replace default parameters and
/// unknown parameter names are rejected.
SystemDescription make_system(const std::string& name, const Parameters& overrides = {});

/// LQR gain shipped with pendulum-lqr (Q = I, R = 1 about the upright).
inline constexpr double kPendulumGainAngle = 1.97725234;
inline constexpr double kPendulumGainRate = 0.97624064;

/// phi_tau for a built-in system: RK4 with step h for ODEs, a single map
/// application for discrete systems.
class SystemFlowMap final : public FlowMap {
 public:
  SystemFlowMap(SystemDescription system, double tau, double step);
  explicit SystemFlowMap(SystemDescription system)
      : SystemFlowMap(system, system.tau, system.step) {}

  std::size_t dim() const override { return system_.dim; }
  double tau() const override { return tau_; }
  double step() const { return step_; }
  const SystemDescription& system() const { return system_; }

 protected:
  State evaluate(std::span<const double> x) const override;

 private:
  SystemDescription system_;
  double tau_;
  double step_;
};

/// Wraps an arbitrary callable as a flow map (tests, identity dynamics).
class FunctionFlowMap final : public FlowMap {
 public:
  FunctionFlowMap(std::size_t dim, double tau, std::function<State(std::span<const double>)> fn)
      : dim_(dim), tau_(tau), fn_(std::move(fn)) {}
  std::size_t dim() const override { return dim_; }
  double tau() const override { return tau_; }

 protected:
  State evaluate(std::span<const double> x) const override { return fn_(x); }

 private:
  std::size_t dim_;
  double tau_;
  std::function<State(std::span<const double>)> fn_;
};

struct Sample {
  State x;
  State y;
};

/// Training pairs (x, phi_tau(x)) and the propagation budget spent on them.
struct TrajectoryDataset {
  std::size_t dim = 0;
  double tau = 0.0;
  std::string system;
  std::vector<Sample> pairs;
  std::uint64_t propagation_count = 0;

  std::size_t size() const { return pairs.size(); }
  void append(const TrajectoryDataset& other);
};

struct SamplingOptions {
  double noise_std = 0.0;  // additive Gaussian noise on y
};

/// `count` pairs from initial states uniform over `region`. Deterministic in seed.
TrajectoryDataset sample_short_trajectories(FlowMap& flow, const StateBox& region, std::size_t count,
                                            std::uint64_t seed, const SamplingOptions& options = {});

/// Pairs from explicit initial states (refinement rounds).
TrajectoryDataset sample_from_states(FlowMap& flow, const std::vector<State>& states,
                                     std::uint64_t seed, const SamplingOptions& options = {});

/// One rollout of `total_time` split into floor(total_time / tau) consecutive
/// pairs. A non-finite state ends the dataset at the last finite sample.
TrajectoryDataset decompose_long_trajectory(FlowMap& flow, std::span<const double> x0,
                                            double total_time);

}  // namespace gpmorse
