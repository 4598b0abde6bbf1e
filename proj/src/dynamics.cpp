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

#include "gpmorse/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace gpmorse {

void rk4_step(const VectorField& f, std::span<double> x, double h) {
  const std::size_t n = x.size();
  constexpr std::size_t kInline = 16;
  double inline_buf[5 * kInline];
  std::vector<double> heap_buf;
  double* buf = inline_buf;
  if (n > kInline) {
    heap_buf.resize(5 * n);
    buf = heap_buf.data();
  }
  std::span<double> k1(buf, n), k2(buf + n, n), k3(buf + 2 * n, n), k4(buf + 3 * n, n), tmp(buf + 4 * n, n);
  f(x, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  f(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  f(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  f(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void rk4_integrate(const VectorField& f, std::span<double> x, double duration, double h) {
  if (!(duration > 0.0) || !(h > 0.0)) throw std::invalid_argument("duration and step must be positive");
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(duration / h - 1e-9)));
  const double dt = duration / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) rk4_step(f, x, dt);
}

State FlowMap::flow(std::span<const double> x) {
  if (x.size() != dim()) throw DimensionError("flow input has wrong dimension");
  count_.fetch_add(1, std::memory_order_relaxed);
  State y = evaluate(x);
  for (double v : y) {
    if (!std::isfinite(v)) throw NonFiniteStateError("propagation produced a non-finite state");
  }
  return y;
}

namespace {

constexpr double kPi = std::numbers::pi;

double param(const Parameters& p, const char* key) { return p.at(key); }

Parameters merge(Parameters defaults, const Parameters& overrides, const std::string& system) {
  for (const auto& [key, value] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end()) {
      throw std::invalid_argument("unknown parameter '" + key + "' for system " + system);
    }
    it->second = value;
  }
  return defaults;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

SystemDescription arctan_system(const Parameters& overrides) {
  SystemDescription s;
  s.name = "arctan-1d";
  s.dim = 1;
  s.discrete = true;
  s.parameters = merge({}, overrides, s.name);
  s.map = [](std::span<const double> x, std::span<double> y) { y[0] = std::atan(x[0]); };
  s.domain = StateBox({-3.0}, {3.0});
  s.periodic = {false};
  s.goal = StateBox({-0.1}, {0.1});
  s.tau = 1.0;
  s.step = 1.0;
  return s;
}

// m l^2 theta'' = m G l sin(theta) - beta theta' + u, theta = 0 upright.
// The LQR law acts on (sin theta, theta'), which has the same linearisation
// as u = -k x at the upright but is continuous on the circle.
SystemDescription pendulum_system(const Parameters& overrides) {
  SystemDescription s;
  s.name = "pendulum-lqr";
  s.dim = 2;
  s.parameters = merge({{"mass", 0.15},
                        {"length", 0.5},
                        {"gravity", 9.81},
                        {"friction", 0.1},
                        {"gain_angle", kPendulumGainAngle},
                        {"gain_rate", kPendulumGainRate},
                        {"max_torque", 0.15 * 9.81 * 0.5 * std::sin(kPi / 3.0)}},
                       overrides, s.name);
  const double m = param(s.parameters, "mass");
  const double l = param(s.parameters, "length");
  const double g = param(s.parameters, "gravity");
  const double beta = param(s.parameters, "friction");
  const double k1 = param(s.parameters, "gain_angle");
  const double k2 = param(s.parameters, "gain_rate");
  const double umax = param(s.parameters, "max_torque");
  const double inertia = m * l * l;
  s.field = [=](std::span<const double> x, std::span<double> dx) {
    const double st = std::sin(x[0]);
    const double u = std::clamp(-k1 * st - k2 * x[1], -umax, umax);
    dx[0] = x[1];
    dx[1] = (m * g * l * st - beta * x[1] + u) / inertia;
  };
  s.domain = StateBox({-kPi, -2.0 * kPi}, {kPi, 2.0 * kPi});
  s.periodic = {true, false};
  s.goal = StateBox({-0.1, -0.1}, {0.1, 0.1});
  s.tau = 1.0;
  s.step = 0.01;
  return s;
}

// Kinematic car driven to a pose by the polar-coordinate controller
// (forward only, saturated steering and speed).
SystemDescription ackermann_system(const Parameters& overrides) {
  SystemDescription s;
  s.name = "ackermann-corke";
  s.dim = 3;
  s.parameters = merge({{"wheelbase", 1.0},
                        {"k_rho", 3.0},
                        {"k_alpha", 8.0},
                        {"k_beta", -1.5},
                        {"max_steer", kPi / 3.0},
                        {"max_speed", 30.0},
                        {"goal_x", 0.0},
                        {"goal_y", 0.0},
                        {"goal_heading", kPi / 2.0}},
                       overrides, s.name);
  const double wheelbase = param(s.parameters, "wheelbase");
  const double k_rho = param(s.parameters, "k_rho");
  const double k_alpha = param(s.parameters, "k_alpha");
  const double k_beta = param(s.parameters, "k_beta");
  const double max_steer = param(s.parameters, "max_steer");
  const double max_speed = param(s.parameters, "max_speed");
  const double gx = param(s.parameters, "goal_x");
  const double gy = param(s.parameters, "goal_y");
  const double gh = param(s.parameters, "goal_heading");
  s.field = [=](std::span<const double> x, std::span<double> dx) {
    const double ex = gx - x[0];
    const double ey = gy - x[1];
    const double rho = std::hypot(ex, ey);
    const double alpha = wrap_angle(std::atan2(ey, ex) - x[2]);
    const double beta = wrap_angle(gh - x[2] - alpha);
    const double v = std::min(k_rho * rho, max_speed);
    const double omega = k_alpha * alpha + k_beta * beta;
    double steer = v > 1e-9 ? std::atan(omega * wheelbase / v) : 0.0;
    steer = std::clamp(steer, -max_steer, max_steer);
    dx[0] = v * std::cos(x[2]);
    dx[1] = v * std::sin(x[2]);
    dx[2] = v / wheelbase * std::tan(steer);
  };
  s.domain = StateBox({-10.0, -10.0, -kPi}, {10.0, 10.0, kPi});
  s.periodic = {false, false, true};
  s.goal = StateBox({gx - 0.5, gy - 0.5, gh - 0.2}, {gx + 0.5, gy + 0.5, gh + 0.2});
  s.tau = 1.0;
  s.step = 0.01;
  return s;
}

// h'' = -k m'/m - g with m' = -u, u in {0, u_max}: free fall, then full
// thrust once the braking distance reaches the altitude. At rest after touchdown.
SystemDescription lander_system(const Parameters& overrides) {
  SystemDescription s;
  s.name = "lander-toc";
  s.dim = 3;
  s.parameters = merge({{"exhaust_velocity", 2500.0},
                        {"gravity", 1.62},
                        {"max_flow", 9.765625},
                        {"dry_mass", 2134.0}},
                       overrides, s.name);
  const double k = param(s.parameters, "exhaust_velocity");
  const double g = param(s.parameters, "gravity");
  const double umax = param(s.parameters, "max_flow");
  const double dry = param(s.parameters, "dry_mass");
  s.field = [=](std::span<const double> x, std::span<double> dx) {
    const double h = x[0];
    const double v = x[1];
    const double m = x[2];
    if (h <= 0.0 && v <= 0.0) {
      dx[0] = dx[1] = dx[2] = 0.0;
      return;
    }
    bool thrust = false;
    if (v < 0.0 && m > dry) {
      const double brake = k * umax / m - g;
      thrust = brake <= 0.0 || h <= v * v / (2.0 * brake);
    }
    const double flow = thrust ? umax : 0.0;
    dx[0] = v;
    dx[1] = k * flow / m - g;
    dx[2] = -flow;
  };
  s.domain = StateBox({-1.0, -10.0, 2134.0}, {10.0, 10.0, 10334.0});
  s.periodic = {false, false, false};
  s.goal = StateBox({-1.0, -0.5, 2134.0}, {0.1, 0.5, 10334.0});
  s.tau = 1.0;
  s.step = 0.01;
  return s;
}

// x'' = -c x' + x - x^3: wells at (+-1, 0), saddle at the origin.
SystemDescription duffing_system(const Parameters& overrides) {
  SystemDescription s;
  s.name = "duffing-2well";
  s.dim = 2;
  s.parameters = merge({{"damping", 2.0}}, overrides, s.name);
  const double c = param(s.parameters, "damping");
  s.field = [=](std::span<const double> x, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -c * x[1] + x[0] - x[0] * x[0] * x[0];
  };
  s.domain = StateBox({-2.0, -2.0}, {2.0, 2.0});
  s.periodic = {false, false};
  s.goal = StateBox({0.9, -0.1}, {1.1, 0.1});
  s.tau = 1.0;
  s.step = 0.01;
  return s;
}

}  // namespace

std::vector<std::string> builtin_system_names() {
  return {"arctan-1d", "pendulum-lqr", "ackermann-corke", "lander-toc", "duffing-2well"};
}

SystemDescription make_system(const std::string& name, const Parameters& overrides) {
  if (name == "arctan-1d") return arctan_system(overrides);
  if (name == "pendulum-lqr") return pendulum_system(overrides);
  if (name == "ackermann-corke") return ackermann_system(overrides);
  if (name == "lander-toc") return lander_system(overrides);
  if (name == "duffing-2well") return duffing_system(overrides);
  throw std::invalid_argument("unknown system '" + name + "'");
}

SystemFlowMap::SystemFlowMap(SystemDescription system, double tau, double step)
    : system_(std::move(system)), tau_(tau), step_(step) {
  if (!(tau_ > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!system_.discrete && !(step_ > 0.0 && step_ <= tau_)) {
    throw std::invalid_argument("integrator step must satisfy 0 < h <= tau");
  }
}

State SystemFlowMap::evaluate(std::span<const double> x) const {
  State y(x.begin(), x.end());
  if (system_.discrete) {
    // tau counts map applications for discrete systems
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(tau_)));
    State next(y.size());
    for (std::size_t s = 0; s < steps; ++s) {
      system_.map(y, next);
      y.swap(next);
    }
    return y;
  }
  rk4_integrate(system_.field, y, tau_, step_);
  return y;
}

void TrajectoryDataset::append(const TrajectoryDataset& other) {
  if (!pairs.empty() && other.dim != dim) throw DimensionError("datasets have different dimensions");
  if (pairs.empty()) {
    dim = other.dim;
    tau = other.tau;
    if (system.empty()) system = other.system;
  }
  pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
  propagation_count += other.propagation_count;
}

TrajectoryDataset sample_from_states(FlowMap& flow, const std::vector<State>& states,
                                     std::uint64_t seed, const SamplingOptions& options) {
  TrajectoryDataset out;
  out.dim = flow.dim();
  out.tau = flow.tau();
  const std::uint64_t before = flow.propagation_count();
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  out.pairs.reserve(states.size());
  for (const auto& x : states) {
    State y = flow.flow(x);
    if (options.noise_std > 0.0) {
      for (double& v : y) v += options.noise_std * noise(noise_rng);
    }
    out.pairs.push_back({x, std::move(y)});
  }
  out.propagation_count = flow.propagation_count() - before;
  return out;
}

TrajectoryDataset sample_short_trajectories(FlowMap& flow, const StateBox& region, std::size_t count,
                                            std::uint64_t seed, const SamplingOptions& options) {
  if (count == 0) throw std::invalid_argument("sample count must be at least 1");
  if (region.dim() != flow.dim()) throw DimensionError("sampling region does not match system");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<State> states(count, State(region.dim()));
  for (auto& x : states) {
    for (std::size_t d = 0; d < x.size(); ++d) {
      x[d] = region.lower[d] + unit(rng) * region.width(d);
    }
  }
  return sample_from_states(flow, states, seed, options);
}

TrajectoryDataset decompose_long_trajectory(FlowMap& flow, std::span<const double> x0,
                                            double total_time) {
  const double tau = flow.tau();
  if (!(total_time >= tau * (1.0 - 1e-12))) {
    throw std::invalid_argument("total time must be at least tau");
  }
  const auto segments = static_cast<std::size_t>(std::floor(total_time / tau + 1e-9));
  TrajectoryDataset out;
  out.dim = flow.dim();
  out.tau = tau;
  const std::uint64_t before = flow.propagation_count();
  State x(x0.begin(), x0.end());
  for (std::size_t i = 0; i < segments; ++i) {
    State y;
    try {
      y = flow.flow(x);
    } catch (const NonFiniteStateError&) {
      break;
    }
    out.pairs.push_back({x, y});
    x = std::move(y);
  }
  out.propagation_count = flow.propagation_count() - before;
  return out;
}

}  // namespace gpmorse
