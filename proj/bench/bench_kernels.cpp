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

// Serial reference against the OpenMP builders. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "gpmorse/pipeline.hpp"

using namespace gpmorse;

namespace {

const SystemDescription& pendulum() {
  static const SystemDescription sys = make_system("pendulum-lqr");
  return sys;
}

CubicalGrid pendulum_grid(std::size_t k) {
  const auto& sys = pendulum();
  return CubicalGrid(sys.domain, {k, k}, sys.periodic);
}

const GpSurrogate& pendulum_model() {
  static const GpSurrogate model = [] {
    SystemFlowMap flow(pendulum());
    FitOptions o;
    o.restarts = 1;
    o.periods = {pendulum().domain.width(0), 0.0};
    return fit(sample_short_trajectories(flow, pendulum().domain, 300, 1), o);
  }();
  return model;
}

void BM_TrueMap(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  SystemFlowMap flow(pendulum());
  for (auto _ : state) benchmark::DoNotOptimize(build_true_map(g, flow).edge_count());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.vertex_count()));
}

void BM_TrueMapReference(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  SystemFlowMap flow(pendulum());
  for (auto _ : state) benchmark::DoNotOptimize(reference::build_true_map(g, flow).edge_count());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.vertex_count()));
}

void BM_GpMap(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  const auto& model = pendulum_model();
  for (auto _ : state) benchmark::DoNotOptimize(build_gp_map(g, model, 0.5).edge_count());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}

void BM_GpMapReference(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  const auto& model = pendulum_model();
  for (auto _ : state) benchmark::DoNotOptimize(reference::build_gp_map(g, model, 0.5).edge_count());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}

void BM_GroundTruth(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ground_truth_roa(pendulum(), g, pendulum().goal, 10.0).steps);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}

void BM_GroundTruthReference(benchmark::State& state) {
  const auto g = pendulum_grid(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::ground_truth_roa(pendulum(), g, pendulum().goal, 10.0).steps);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}

}  // namespace

BENCHMARK(BM_TrueMap)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TrueMapReference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GpMap)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GpMapReference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GroundTruth)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GroundTruthReference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
