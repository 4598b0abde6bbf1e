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

// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Arguments select a subset of criteria (e.g. `acceptance 1 4 6`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gp_oracle.hpp"
#include "gpmorse/pipeline.hpp"
#include "morse_oracle.hpp"

using namespace gpmorse;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> half_cell(const CubicalGrid& g) {
  std::vector<double> e;
  for (std::size_t d = 0; d < g.dim(); ++d) e.push_back(0.5 * g.cell_width(d));
  return e;
}

std::vector<double> periods_of(const SystemDescription& sys) {
  std::vector<double> p;
  for (std::size_t d = 0; d < sys.dim; ++d) p.push_back(sys.periodic[d] ? sys.domain.width(d) : 0.0);
  return p;
}

// 1. Five-cell arctan example.
Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  SystemFlowMap flow(make_system("arctan-1d"));
  const CubicalGrid grid(StateBox({-3.0}, {3.0}), {5});
  const auto map = build_true_map(grid, flow);
  const auto g = analyze(map);
  const double t = seconds_since(t0);
  // cells a..e are 0..4; nodes are ordered by their smallest cell
  const bool nodes_ok = g.nodes == std::vector<std::vector<CellId>>{{1}, {2}, {3}};
  const bool edges_ok = g.edges == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {2, 1}};
  const bool roa_ok = g.roa == std::vector<int>(5, 1) && g.attractors == std::vector<std::size_t>{1};
  std::ostringstream os;
  os << "nodes {b},{c},{d} " << (nodes_ok ? "yes" : "no") << ", edges b->c d->c " << (edges_ok ? "yes" : "no")
     << ", RoA(c) covers 5/5 " << (roa_ok ? "yes" : "no") << ", " << fmt("%.4f", t) << " s";
  return {nodes_ok && edges_ok && roa_ok && t < 1.0, os.str()};
}

PipelineConfig pendulum_config() {
  PipelineConfig c;
  c.system = "pendulum-lqr";
  return c;
}

// 2. Pendulum accuracy after refinement, five seeds.
Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineConfig c = pendulum_config();
  c.cells = {64, 64};
  c.initial_count = 300;
  c.delta_initial = 0.875;
  c.delta_final = 0.05;
  c.points_per_round = 10;
  c.rounds = 90;
  c.scope = SamplingScope::TargetRoa;
  c.refit_every = 30;
  c.refit_iterations = 15;
  const Setup setup = resolve(c);
  const auto truth = ground_truth_roa(setup.system, truth_grid(c, setup), setup.goal, c.truth_horizon);
  std::cerr << "  [2] ground truth " << fmt("%.1f", seconds_since(t0)) << " s\n";
  double ratio = 0.0, fp = 0.0, worst_initial_fp = 0.0;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  for (auto seed : seeds) {
    const auto ts = std::chrono::steady_clock::now();
    c.seed = seed;
    SystemFlowMap flow(setup.system);
    const auto st = run(c, setup, flow, &truth.raster);
    const Score& first = *st.report.history.front().score;
    const Score& last = *st.report.last().score;
    ratio += last.roa_ratio;
    fp += last.fp_fraction;
    worst_initial_fp = std::max(worst_initial_fp, first.fp_fraction);
    std::cerr << "  [2] seed " << seed << ": initial ratio " << fmt("%.4f", first.roa_ratio) << " fp "
              << fmt("%.5f", first.fp_fraction) << ", final ratio " << fmt("%.4f", last.roa_ratio) << " fp "
              << fmt("%.5f", last.fp_fraction) << ", " << st.report.propagation_count << " propagations, "
              << fmt("%.1f", seconds_since(ts)) << " s\n";
  }
  ratio /= static_cast<double>(seeds.size());
  fp /= static_cast<double>(seeds.size());
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << "mean final ratio " << fmt("%.4f", ratio) << " (>= 0.85), mean final FP " << fmt("%.3f", 100.0 * fp)
     << "% (<= 0.5%), worst initial FP " << fmt("%.3f", 100.0 * worst_initial_fp) << "% (<= 3%), "
     << fmt("%.0f", t) << " s for 5 seeds";
  return {ratio >= 0.85 && fp <= 0.005 && worst_initial_fp <= 0.03, os.str()};
}

// 3. Propagation budget of the GP method against corner images of the true flow.
Outcome criterion3() {
  PipelineConfig c = pendulum_config();
  c.cells = {128, 128};
  c.initial_count = 1200;
  c.delta_initial = c.delta_final = 0.05;
  c.restarts = 2;
  c.truth_multiplier = 2;
  c.seed = 1;
  const Setup setup = resolve(c);
  const auto truth = ground_truth_roa(setup.system, truth_grid(c, setup), setup.goal, c.truth_horizon);
  SystemFlowMap flow(setup.system);
  const auto st = run(c, setup, flow, &truth.raster);
  SystemFlowMap true_flow(setup.system);
  const auto tm = run_true_mode(c, setup, true_flow, &truth.raster);
  const double gp_ratio = st.report.last().score->roa_ratio;
  const double tm_ratio = tm.score->roa_ratio;
  const double gain = static_cast<double>(tm.propagation_count) / static_cast<double>(st.report.propagation_count);
  std::ostringstream os;
  os << "128x128 grid: gp ratio " << fmt("%.4f", gp_ratio) << " with " << st.report.propagation_count
     << " propagations, true-dynamics ratio " << fmt("%.4f", tm_ratio) << " with " << tm.propagation_count
     << " propagations, " << fmt("%.1f", gain) << "x fewer (>= 10x)";
  return {gp_ratio >= 0.85 && tm_ratio >= 0.85 && gain >= 10.0, os.str()};
}

// 4. Morse graph and RoA against the transitive-closure oracle.
Outcome criterion4() {
  std::mt19937_64 rng(2026);
  std::size_t mismatches = 0;
  std::string first;
  for (int i = 0; i < 200; ++i) {
    const auto map = oracle::random_map(rng, i % 2 == 0);
    const std::string diff = oracle::compare_with_oracle(map);
    if (!diff.empty()) {
      ++mismatches;
      if (first.empty()) first = "map " + std::to_string(i) + ": " + diff;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches on 200 random maps" +
                               (first.empty() ? "" : " (" + first + ")")};
}

// 5. GP numerics against dense-solve oracles.
Outcome criterion5() {
  using namespace oracle;
  // (a) posterior mean vs a direct solve
  const auto xs = random_states(60, {-kPi, -2.0}, {kPi, 2.0}, 21);
  FitOptions o;
  o.restarts = 3;
  o.periods = {2.0 * kPi, 0.0};
  o.seed = 17;
  const GpSurrogate model = fit(make_dataset(2, xs, smooth_2d), o);
  double worst_mean = 0.0;
  for (const auto& q : random_states(100, {-kPi, -2.0}, {kPi, 2.0}, 22)) {
    const Prediction p = model.predict(q);
    for (std::size_t d = 0; d < 2; ++d) worst_mean = std::max(worst_mean, std::abs(p.mean[d] - naive_mean(model, d, q)));
  }

  // (b) interpolation of noise-free data
  FitOptions oi;
  oi.restarts = 3;
  oi.seed = 17;
  oi.noise_floor = 1e-10;
  const auto data = make_dataset(2, random_states(40, {-2.0, -2.0}, {2.0, 2.0}, 41), wavy_2d);
  const GpSurrogate interp = fit(data, oi);
  double worst_interp = 0.0;
  for (const auto& s : data.pairs) {
    const Prediction p = interp.predict(s.x);
    for (std::size_t d = 0; d < 2; ++d) worst_interp = std::max(worst_interp, std::abs(p.mean[d] - s.y[d]));
  }

  // (c) analytic gradient vs central differences at random hyperparameters
  const auto gx = random_states(25, {-2.0, -2.0}, {2.0, 2.0}, 9);
  Eigen::MatrixXd inputs(25, 2);
  Eigen::VectorXd targets(25);
  for (Eigen::Index i = 0; i < 25; ++i) {
    const auto& x = gx[static_cast<std::size_t>(i)];
    inputs(i, 0) = x[0];
    inputs(i, 1) = x[1];
    targets(i) = wavy_2d(x)[0];
  }
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> log_l(std::log(0.3), std::log(3.0));
  std::uniform_real_distribution<double> log_g(std::log(1e-5), std::log(1e-1));
  double worst_grad = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto s = k % 2 ? Smoothness::Matern32 : Smoothness::Matern52;
    const std::vector<double> periods = k % 4 < 2 ? std::vector<double>{0.0, 0.0} : std::vector<double>{4.0, 0.0};
    const DistanceCache cache(inputs, periods);
    const std::vector<double> p{log_l(rng), log_l(rng), log_g(rng)};
    const auto v = log_likelihood(cache, targets, s, p, true);
    if (!v.ok) return {false, "likelihood evaluation failed at a random hyperparameter point"};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-5;
      auto pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (log_likelihood(cache, targets, s, pp, false).value -
                         log_likelihood(cache, targets, s, pm, false).value) / (2.0 * h);
      worst_grad = std::max(worst_grad, std::abs(v.gradient[i] - fd) / std::max(std::abs(fd), 1.0));
    }
  }
  std::ostringstream os;
  os << "(a) max |mean - direct solve| " << fmt("%.2e", worst_mean) << " (<= 1e-8), (b) max interpolation error "
     << fmt("%.2e", worst_interp) << " (<= 1e-6), (c) max relative gradient error " << fmt("%.2e", worst_grad)
     << " (<= 1e-4)";
  return {worst_mean <= 1e-8 && worst_interp <= 1e-6 && worst_grad <= 1e-4, os.str()};
}

// 6. Critical values and nesting of confidence hypercubes.
Outcome criterion6() {
  double worst_z = 0.0;
  for (std::size_t m : {1u, 2u, 3u, 4u}) {
    for (double delta : {0.05, 0.125, 0.5, 0.875}) {
      const double alpha = 1.0 - std::pow(1.0 - delta, 1.0 / static_cast<double>(m));
      worst_z = std::max(worst_z, std::abs(per_output_alpha(m, delta) - alpha));
      worst_z = std::max(worst_z, std::abs(critical_value(m, delta) - oracle::bisect_quantile(1.0 - alpha / 2.0)));
    }
  }
  // Five surrogates of different dimension and data, 200 query points each.
  std::size_t pairs = 0, violations = 0;
  const std::vector<double> deltas{0.99, 0.875, 0.5, 0.125, 0.05, 0.01};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t m = 1 + s % 3;
    const State lo(m, -2.0), hi(m, 2.0);
    const auto fn = [m](const State& x) {
      State y(m);
      for (std::size_t d = 0; d < m; ++d) y[d] = std::sin(1.3 * x[d] + static_cast<double>(d)) + 0.2 * x[(d + 1) % m];
      return y;
    };
    FitOptions o;
    o.restarts = 2;
    o.seed = s;
    const GpSurrogate model = fit(oracle::make_dataset(m, oracle::random_states(30, lo, hi, 100 + s), fn), o);
    for (const auto& x : oracle::random_states(200, State(m, -3.0), State(m, 3.0), 200 + s)) {
      ++pairs;
      const Prediction p = model.predict(x);
      bool nested = true;
      for (std::size_t k = 1; k < deltas.size(); ++k) {
        const StateBox inner = confidence_hypercube(p, deltas[k - 1]);
        const StateBox outer = confidence_hypercube(p, deltas[k]);
        for (std::size_t d = 0; d < m; ++d) {
          nested = nested && outer.lower[d] <= inner.lower[d] && inner.upper[d] <= outer.upper[d] &&
                   inner.lower[d] <= p.mean[d] && p.mean[d] <= inner.upper[d];
        }
      }
      violations += !nested;
    }
  }
  std::ostringstream os;
  os << "max |alpha, z - oracle| " << fmt("%.2e", worst_z) << " (<= 1e-6) over 16 (M, delta) pairs, " << violations
     << " nesting violations on " << pairs << " (model, x) pairs";
  return {worst_z <= 1e-6 && violations == 0 && pairs == 1000, os.str()};
}

// Dense samples of each cell with their images under `image`.
struct CellSamples {
  std::vector<std::vector<State>> images;  // per cell
};

template <typename Image>
CellSamples dense_images(const CubicalGrid& g, std::size_t per_cell, std::uint64_t seed, Image&& image) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CellSamples out;
  out.images.resize(g.cell_count());
  for (CellId c = 0; c < g.cell_count(); ++c) {
    const StateBox box = g.cell_box(c);
    std::vector<State> xs(per_cell, State(g.dim()));
    for (auto& x : xs) {
      for (std::size_t d = 0; d < g.dim(); ++d) x[d] = box.lower[d] + u(rng) * box.width(d);
    }
    out.images[c] = image(xs);
  }
  return out;
}

// Sampled images outside the successor union. Escaped cells cover everything.
std::size_t violations(const MultivaluedMap& map, const CellSamples& s) {
  const CubicalGrid& g = map.grid();
  std::size_t bad = 0;
  for (CellId c = 0; c < g.cell_count(); ++c) {
    if (map.escaped(c)) continue;
    for (const State& y : s.images[c]) {
      const auto cell = g.locate(g.wrap(y));
      if (!cell || !map.has_edge(c, *cell)) ++bad;
    }
  }
  return bad;
}

// 7. Outer approximation of dense-sampling images, both map modes.
Outcome criterion7() {
  constexpr std::size_t kPerCell = 1000;
  bool pass = true;
  std::ostringstream os;
  os << "violations with half-cell padding (without padding):";
  for (const std::string name : {"arctan-1d", "pendulum-lqr", "duffing-2well"}) {
    const auto sys = make_system(name);
    const std::size_t k = sys.dim == 1 ? 64 : 32;
    const CubicalGrid g(sys.domain, std::vector<std::size_t>(sys.dim, k), sys.periodic);
    SystemFlowMap flow(sys);

    const auto true_images = dense_images(g, kPerCell, 7, [&](const std::vector<State>& xs) {
      std::vector<State> ys;
      ys.reserve(xs.size());
      for (const auto& x : xs) ys.push_back(flow.flow(x));
      return ys;
    });
    const std::size_t true_padded = violations(build_true_map(g, flow, half_cell(g)), true_images);
    const std::size_t true_bare = violations(build_true_map(g, flow), true_images);

    const auto data = sample_short_trajectories(flow, sys.domain, 300, 8);
    FitOptions o;
    o.restarts = 2;
    o.periods = periods_of(sys);
    o.seed = 8;
    const GpSurrogate model = fit(data, o);
    const auto gp_images = dense_images(g, kPerCell, 9, [&](const std::vector<State>& xs) {
      std::vector<State> ys;
      ys.reserve(xs.size());
      for (const auto& p : model.predict_batch(xs, false)) ys.push_back(p.mean);
      return ys;
    });
    const double delta = 0.875;
    const std::size_t gp_padded = violations(build_gp_map(g, model, delta, nullptr, half_cell(g)), gp_images);
    const std::size_t gp_bare = violations(build_gp_map(g, model, delta), gp_images);

    pass = pass && true_padded == 0 && gp_padded == 0;
    os << " " << name << " true " << true_padded << " (" << true_bare << "), gp " << gp_padded << " (" << gp_bare
       << ");";
    std::cerr << "  [7] " << name << " done\n";
  }
  os << " " << kPerCell << " samples per cell, gp maps at delta 0.875";
  return {pass, os.str()};
}

// Sign of the limit of the Duffing flow, integrated independently of the library.
int duffing_limit_sign(State x) {
  const auto f = [](double p, double v, double& dp, double& dv) {
    dp = v;
    dv = -2.0 * v + p - p * p * p;
  };
  const double h = 0.01;
  for (int step = 0; step < 6000; ++step) {
    double k1p, k1v, k2p, k2v, k3p, k3v, k4p, k4v;
    f(x[0], x[1], k1p, k1v);
    f(x[0] + 0.5 * h * k1p, x[1] + 0.5 * h * k1v, k2p, k2v);
    f(x[0] + 0.5 * h * k2p, x[1] + 0.5 * h * k2v, k3p, k3v);
    f(x[0] + h * k3p, x[1] + h * k3v, k4p, k4v);
    x[0] += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    x[1] += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  return x[0] > 0.0 ? 1 : -1;
}

struct Agreement {
  std::size_t match = 0, uncertain = 0, wrong = 0;
  bool two_wells = false;
};

Agreement agreement(const CubicalGrid& g, const MorseGraphResult& res, const std::vector<int>& truth) {
  Agreement a;
  // Which well each attractor sits in.
  std::vector<int> well(res.nodes.size(), 0);
  std::set<int> wells;
  for (auto n : res.attractors) {
    const State c = g.center(res.nodes[n].front());
    well[n] = c[0] > 0.0 ? 1 : -1;
    wells.insert(well[n]);
  }
  a.two_wells = res.attractors.size() == 2 && wells.size() == 2;
  for (CellId c = 0; c < g.cell_count(); ++c) {
    const int label = res.roa[c];
    if (label == kUncertain) {
      ++a.uncertain;
    } else if (label >= 0 && well[static_cast<std::size_t>(label)] == truth[c]) {
      ++a.match;
    } else {
      ++a.wrong;
    }
  }
  return a;
}

// 8. Two Duffing wells and their basins.
Outcome criterion8() {
  const auto sys = make_system("duffing-2well");
  const CubicalGrid g(sys.domain, {128, 128});
  std::vector<int> truth(g.cell_count());
  for (CellId c = 0; c < g.cell_count(); ++c) truth[c] = duffing_limit_sign(g.center(c));

  SystemFlowMap flow(sys);
  FitOptions o;
  o.restarts = 2;
  o.periods = {0.0, 0.0};
  o.seed = 1;
  const GpSurrogate model = fit(sample_short_trajectories(flow, sys.domain, 300, 1), o);
  const auto gp = agreement(g, analyze(build_gp_map(g, model, 0.05)), truth);
  const auto tm = agreement(g, analyze(build_true_map(g, flow)), truth);

  const double n = static_cast<double>(g.cell_count());
  const auto ok = [&](const Agreement& a) { return a.two_wells && a.wrong == 0 && a.match >= 0.97 * n; };
  std::ostringstream os;
  os << "128x128 grid, gp map (300 samples, delta 0.05): two wells " << (gp.two_wells ? "yes" : "no") << ", "
     << fmt("%.2f", 100.0 * gp.match / n) << "% match, " << gp.uncertain << " uncertain, " << gp.wrong
     << " wrong; true-dynamics map: " << fmt("%.2f", 100.0 * tm.match / n) << "% match, " << tm.wrong << " wrong";
  return {ok(gp) && ok(tm), os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [criterion number 1-8]...\n";
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(k));
  }
  if (selected.empty()) {
    selected.resize(criteria.size());
    std::iota(selected.begin(), selected.end(), 1);
  }
  std::size_t failed = 0;
  for (auto k : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "criterion " << k << " ...\n";
    Outcome r;
    try {
      r = criteria[k - 1]();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << "CRITERION " << k << ": " << (r.pass ? "PASS" : "FAIL") << " - " << r.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
