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

// gpmorse command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "gpmorse/config.hpp"
#include "gpmorse/io.hpp"
#include "gpmorse/oracle.hpp"
#include "gpmorse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gpmorse;

namespace {

// Documented in the README; keep the two in sync.
enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kParse = 5, kNumerical = 6, kOracle = 7 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  int threads = 0;
  std::string oracle;
  std::string mode = "gp";
  std::optional<double> delta;
  std::optional<std::size_t> rounds;
  // oracle-serve
  std::string system;
  std::vector<std::string> params;
  std::optional<double> tau;
  std::optional<double> step;
};

struct Context {
  PipelineConfig config;
  Setup setup;
  fs::path dir;
};

Context open_run(const Options& o) {
  PipelineConfig config = load_config(o.config_path);
  if (o.seed) config.seed = *o.seed;
  Setup setup = resolve(config);
  const fs::path dir = fs::path(o.out) / config_hash(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory '" + dir.string() + "': " + ec.message());
  return {std::move(config), std::move(setup), dir};
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    writer(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::ifstream open_artifact(const fs::path& path, const std::string& producer) {
  std::ifstream in(path);
  if (!in) throw IoError("missing artifact '" + path.string() + "' (run 'gpmorse " + producer + "' first)");
  return in;
}

std::unique_ptr<FlowMap> make_flow(const Options& o, const Setup& setup) {
  if (!o.oracle.empty()) return std::make_unique<ExternalFlowMap>(o.oracle, setup.system.dim, setup.system.tau);
  return std::make_unique<SystemFlowMap>(setup.system);
}

TrajectoryDataset load_dataset(const fs::path& dir) {
  auto in = open_artifact(dir / "dataset.txt", "sample");
  return read_dataset(in);
}

GpSurrogate load_model(const fs::path& dir) {
  auto in = open_artifact(dir / "model.txt", "fit");
  return read_model(in);
}

std::optional<Raster> load_truth(const fs::path& dir) {
  std::ifstream in(dir / "truth.txt");
  if (!in) return std::nullopt;
  return read_raster(in);
}

std::optional<EvaluationReport> load_report(const fs::path& dir) {
  std::ifstream in(dir / "report.txt");
  if (!in) return std::nullopt;
  return read_report(in);
}

Raster goal_raster(const CubicalGrid& grid, const GoalRegion& region) {
  Raster r{grid, std::vector<int>(grid.cell_count(), 0)};
  for (CellId c : region.cells) r.labels[c] = 1;
  return r;
}

void export_analysis(const fs::path& dir, const std::string& tag, const CubicalGrid& grid,
                     const MultivaluedMap& map, const MorseGraphResult& graph, const GoalRegion& region) {
  write_file(dir / ("map-" + tag + ".txt"), [&](std::ostream& out) { write_map(out, map); });
  write_file(dir / ("morse-" + tag + ".dot"), [&](std::ostream& out) { write_dot(out, graph); });
  write_file(dir / ("roa-" + tag + ".txt"), [&](std::ostream& out) { write_raster(out, Raster{grid, graph.roa}); });
  write_file(dir / ("goal-" + tag + ".txt"), [&](std::ostream& out) { write_raster(out, goal_raster(grid, region)); });
}

void print_analysis(const MorseGraphResult& graph, const GoalRegion& region, std::size_t escaped) {
  std::cout << "morse nodes " << graph.nodes.size() << ", edges " << graph.edges.size() << ", attractors "
            << graph.attractors.size() << ", escaped cells " << escaped << "\n";
  if (region.attractors.empty()) {
    std::cout << "no attractor intersects the goal\n";
  } else {
    std::cout << "goal attractor(s)";
    for (auto a : region.attractors) std::cout << ' ' << a;
    std::cout << ", region of attraction " << region.cells.size() << " cells\n";
  }
}

void print_score(const std::optional<Score>& s) {
  if (!s) {
    std::cout << "no ground truth in the run directory (run 'gpmorse ground-truth' to score)\n";
    return;
  }
  std::cout << "roa_ratio " << format_number(s->roa_ratio) << "\nfp_fraction " << format_number(s->fp_fraction)
            << "\n";
}

int cmd_sample(const Options& o) {
  auto ctx = open_run(o);
  write_file(ctx.dir / "config.json", [&](std::ostream& out) { out << canonical_config(ctx.config); });
  auto flow = make_flow(o, ctx.setup);
  const TrajectoryDataset data = collect_initial(ctx.config, ctx.setup, *flow);
  write_file(ctx.dir / "dataset.txt", [&](std::ostream& out) { write_dataset(out, data); });
  std::cout << (ctx.dir / "dataset.txt").string() << ": " << data.size() << " pairs, " << data.propagation_count
            << " propagations\n";
  return kOk;
}

void write_fit_log(std::ostream& out, const GpSurrogate& model, const FitDiagnostics& diag) {
  for (std::size_t d = 0; d < model.dim(); ++d) {
    const auto& om = model.outputs()[d];
    out << "output " << d << " log_likelihood " << format_number(om.log_likelihood) << " signal_variance "
        << format_number(om.signal_variance) << " noise_variance " << format_number(om.noise_variance())
        << " lengthscales";
    for (double l : om.kernel.lengthscales) out << ' ' << format_number(l);
    out << "\n";
    if (d >= diag.starts.size()) continue;
    for (std::size_t s = 0; s < diag.starts[d].size(); ++s) {
      const auto& r = diag.starts[d][s];
      out << "  start " << s << (s == diag.best[d] ? " *" : "") << " iterations " << r.iterations << " from "
          << format_number(r.start_value) << " to " << format_number(r.end_value) << "\n";
    }
  }
}

int cmd_fit(const Options& o) {
  auto ctx = open_run(o);
  const TrajectoryDataset data = load_dataset(ctx.dir);
  if (data.dim != ctx.setup.system.dim) throw DimensionError("dataset dimension does not match the system");
  FitDiagnostics diag;
  const GpSurrogate model = fit_model(ctx.config, ctx.setup, data, &diag);
  write_file(ctx.dir / "model.txt", [&](std::ostream& out) { write_model(out, model); });
  write_file(ctx.dir / "fit.txt", [&](std::ostream& out) { write_fit_log(out, model, diag); });
  write_fit_log(std::cout, model, FitDiagnostics{});
  return kOk;
}

int cmd_analyze(const Options& o) {
  auto ctx = open_run(o);
  const auto truth = load_truth(ctx.dir);
  if (o.mode == "true") {
    auto flow = make_flow(o, ctx.setup);
    const TrueModeResult res = run_true_mode(ctx.config, ctx.setup, *flow, truth ? &*truth : nullptr);
    export_analysis(ctx.dir, "true", ctx.setup.grid, *res.map, res.graph, res.goal_region);
    std::cout << "true-dynamics map: " << res.propagation_count << " propagations\n";
    print_analysis(res.graph, res.goal_region, res.map->escaped_cells().size());
    return kOk;
  }
  const GpSurrogate model = load_model(ctx.dir);
  const auto report = load_report(ctx.dir);
  const std::size_t done = report && !report->history.empty() ? report->last().round : 0;
  const double delta = o.delta ? *o.delta : delta_at(ctx.config, done);
  double sigma = 0.0;
  const MultivaluedMap map = build_gp_map(ctx.setup.grid, model, delta, &sigma, ctx.config.padding);
  const MorseGraphResult graph = analyze(map);
  const GoalRegion region = roa_for_goal(graph, ctx.setup.grid, ctx.setup.goal);
  export_analysis(ctx.dir, "gp", ctx.setup.grid, map, graph, region);
  std::cout << "confidence map at delta " << format_number(delta) << ", mean predictive std "
            << format_number(sigma) << "\n";
  print_analysis(graph, region, map.escaped_cells().size());
  return kOk;
}

int cmd_ground_truth(const Options& o) {
  auto ctx = open_run(o);
  const CubicalGrid fine = truth_grid(ctx.config, ctx.setup);
  const GroundTruth gt = ground_truth_roa(ctx.setup.system, fine, ctx.setup.goal, ctx.config.truth_horizon);
  write_file(ctx.dir / "truth.txt", [&](std::ostream& out) { write_raster(out, gt.raster); });
  std::size_t inside = 0;
  for (int l : gt.raster.labels) inside += l == 1;
  std::cout << (ctx.dir / "truth.txt").string() << ": " << inside << " of " << gt.raster.labels.size()
            << " fine cells reach the goal, " << gt.steps << " integration steps";
  if (gt.non_finite) std::cout << ", " << gt.non_finite << " non-finite rollouts labelled outside";
  std::cout << "\n";
  return kOk;
}

int cmd_score(const Options& o) {
  auto ctx = open_run(o);
  auto tin = open_artifact(ctx.dir / "truth.txt", "ground-truth");
  const Raster truth = read_raster(tin);
  const std::string tag = o.mode == "true" ? "true" : "gp";
  auto gin = open_artifact(ctx.dir / ("goal-" + tag + ".txt"), "analyze --mode " + tag);
  const Raster goal = read_raster(gin);
  if (!(goal.grid == ctx.setup.grid)) throw ConfigError("saved analysis was made on a different grid");
  std::vector<CellId> cells;
  for (CellId c = 0; c < goal.labels.size(); ++c) {
    if (goal.labels[c] == 1) cells.push_back(c);
  }
  print_score(score(ctx.setup.grid, cells, truth));
  return kOk;
}

const Raster& ensure_truth(const Context& ctx, std::optional<Raster>& truth) {
  if (!truth) {
    const CubicalGrid fine = truth_grid(ctx.config, ctx.setup);
    truth = ground_truth_roa(ctx.setup.system, fine, ctx.setup.goal, ctx.config.truth_horizon).raster;
    write_file(ctx.dir / "truth.txt", [&](std::ostream& out) { write_raster(out, *truth); });
  }
  return *truth;
}

void save_state(const Context& ctx, const PipelineState& st) {
  write_file(ctx.dir / "dataset.txt", [&](std::ostream& out) { write_dataset(out, st.data); });
  write_file(ctx.dir / "model.txt", [&](std::ostream& out) { write_model(out, st.model); });
  write_file(ctx.dir / "report.txt", [&](std::ostream& out) { write_report(out, st.report); });
  export_analysis(ctx.dir, "gp", ctx.setup.grid, *st.map, st.graph, st.goal_region);
}

void print_report_summary(const PipelineState& st) {
  const auto& l = st.report.last();
  std::cout << "round " << l.round << ", delta " << format_number(l.delta) << ", " << l.samples << " samples, "
            << st.report.propagation_count << " propagations\n";
  print_analysis(st.graph, st.goal_region, st.map->escaped_cells().size());
  print_score(l.score);
}

int cmd_refine(const Options& o) {
  auto ctx = open_run(o);
  TrajectoryDataset data = load_dataset(ctx.dir);
  GpSurrogate model = load_model(ctx.dir);
  auto report = load_report(ctx.dir);
  const auto truth = load_truth(ctx.dir);
  const Raster* tp = truth ? &*truth : nullptr;
  PipelineState st = restore(ctx.config, ctx.setup, std::move(data), std::move(model),
                             report ? std::move(*report) : EvaluationReport{}, tp);
  std::size_t todo = ctx.config.rounds > st.rounds_done ? ctx.config.rounds - st.rounds_done : 0;
  if (o.rounds) todo = std::min(todo, *o.rounds);
  auto flow = make_flow(o, ctx.setup);
  refine(ctx.config, ctx.setup, *flow, st, todo, tp);
  save_state(ctx, st);
  print_report_summary(st);
  return kOk;
}

int cmd_run(const Options& o) {
  auto ctx = open_run(o);
  write_file(ctx.dir / "config.json", [&](std::ostream& out) { out << canonical_config(ctx.config); });
  std::optional<Raster> truth = load_truth(ctx.dir);
  const Raster& t = ensure_truth(ctx, truth);
  auto flow = make_flow(o, ctx.setup);
  if (o.mode == "true") {
    const TrueModeResult res = run_true_mode(ctx.config, ctx.setup, *flow, &t);
    export_analysis(ctx.dir, "true", ctx.setup.grid, *res.map, res.graph, res.goal_region);
    std::cout << "true-dynamics map: " << res.propagation_count << " propagations\n";
    print_analysis(res.graph, res.goal_region, res.map->escaped_cells().size());
    print_score(res.score);
    return kOk;
  }
  const PipelineState st = run(ctx.config, ctx.setup, *flow, &t);
  save_state(ctx, st);
  print_report_summary(st);
  return kOk;
}

int cmd_oracle_serve(const Options& o) {
  Parameters params;
  for (const auto& kv : o.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + kv + "'");
    try {
      params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("--param value is not a number: '" + kv + "'");
    }
  }
  SystemDescription sys;
  try {
    sys = make_system(o.system, params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  SystemFlowMap flow(sys, o.tau.value_or(sys.tau), o.step.value_or(sys.step));
  serve_oracle(std::cin, std::cout, flow);
  return kOk;
}

void set_threads(const Options& o) {
  int n = o.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("GPMORSE_THREADS")) n = std::atoi(env);
  }
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regions of attraction from Gaussian-process surrogates and Morse graphs"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool with_oracle) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the configuration seed");
    sub->add_option("--out", o.out, "parent directory of run directories")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads (default: GPMORSE_THREADS or all cores)");
    if (with_oracle) sub->add_option("--oracle", o.oracle, "shell command speaking the oracle protocol on stdio");
  };
  auto mode_option = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "gp (confidence map) or true (corner images of the true dynamics)")
        ->check(CLI::IsMember({"gp", "true"}))
        ->capture_default_str();
  };

  auto* sample = app.add_subcommand("sample", "collect the initial trajectory data set");
  add_common(sample, true);
  auto* fitc = app.add_subcommand("fit", "fit the GP surrogate to the data set");
  add_common(fitc, false);
  auto* analyzec = app.add_subcommand("analyze", "build the multivalued map, Morse graph and regions of attraction");
  add_common(analyzec, true);
  mode_option(analyzec);
  analyzec->add_option("--delta", o.delta, "confidence parameter for gp mode (default: schedule value)")
      ->check(CLI::Range(0.0, 1.0));
  auto* refinec = app.add_subcommand("refine", "run the remaining refinement rounds");
  add_common(refinec, true);
  refinec->add_option("--rounds", o.rounds, "run at most this many rounds");
  auto* truthc = app.add_subcommand("ground-truth", "label a fine raster by simulating to the goal");
  add_common(truthc, false);
  auto* scorec = app.add_subcommand("score", "compare the saved goal region with the ground truth");
  add_common(scorec, false);
  mode_option(scorec);
  auto* runc = app.add_subcommand("run", "ground truth, sampling, fitting, analysis and refinement in one go");
  add_common(runc, true);
  mode_option(runc);
  auto* serve = app.add_subcommand("oracle-serve", "serve a built-in system over the oracle protocol on stdio");
  serve->add_option("--system", o.system, "built-in system name")->required();
  serve->add_option("--param", o.params, "parameter override name=value (repeatable)");
  serve->add_option("--tau", o.tau, "flow time in seconds");
  serve->add_option("--step", o.step, "integrator step in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_threads(o);
    if (sample->parsed()) return cmd_sample(o);
    if (fitc->parsed()) return cmd_fit(o);
    if (analyzec->parsed()) return cmd_analyze(o);
    if (refinec->parsed()) return cmd_refine(o);
    if (truthc->parsed()) return cmd_ground_truth(o);
    if (scorec->parsed()) return cmd_score(o);
    if (runc->parsed()) return cmd_run(o);
    if (serve->parsed()) return cmd_oracle_serve(o);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const OracleError& e) {
    std::cerr << "oracle error: " << e.what() << "\n";
    return kOracle;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const NonFiniteStateError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const PipelineError& e) {
    std::cerr << "refinement failed: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
