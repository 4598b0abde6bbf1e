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

#include "gpmorse/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gpmorse/io.hpp"

namespace gpmorse {

namespace {

using json = nlohmann::json;

// Typed access to one JSON object; remembers which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Section section(const std::string& key) { return Section(raw(key), where(key)); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }

  void number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <typename T>
  void count(const std::string& key, T& out) {
    if (!has(key)) return;
    out = static_cast<T>(as_count(raw(key), where(key)));
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of non-negative integers");
    std::vector<std::uint64_t> out;
    for (const auto& e : v) out.push_back(as_count(e, where(key)));
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  static std::uint64_t as_count(const json& v, const std::string& at) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(at + " must be a non-negative integer");
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

StateBox box_from(Section s) {
  State lo = s.numbers("lower");
  State hi = s.numbers("upper");
  s.finish();
  if (lo.size() != hi.size()) throw ConfigError(s.where("lower") + " and upper differ in length");
  try {
    return StateBox(std::move(lo), std::move(hi), true);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  Section top(root, "");
  if (!top.has("schema_version")) throw ConfigError("schema_version is required");
  {
    int version = 0;
    top.count("schema_version", version);
    if (version != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kConfigSchemaVersion) + ")");
    }
  }
  if (top.has("system")) {
    Section s = top.section("system");
    s.text("name", c.system);
    if (s.has("parameters")) {
      const json& p = s.raw("parameters");
      if (!p.is_object()) throw ConfigError("system.parameters must be an object");
      for (const auto& [k, v] : p.items()) {
        if (!v.is_number()) throw ConfigError("system.parameters." + k + " must be a number");
        c.parameters[k] = v.get<double>();
      }
    }
    s.number("tau", c.tau);
    s.number("step", c.step);
    s.number("noise_std", c.noise_std);
    s.finish();
  }
  if (!top.has("grid")) throw ConfigError("grid section is required");
  {
    Section g = top.section("grid");
    const bool has_lower = g.has("lower");
    if (has_lower != g.has("upper")) throw ConfigError("grid.lower and grid.upper must be given together");
    if (has_lower) {
      State lo = g.numbers("lower");
      State hi = g.numbers("upper");
      if (lo.size() != hi.size()) throw ConfigError("grid.lower and grid.upper differ in length");
      try {
        c.domain = StateBox(std::move(lo), std::move(hi));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("grid bounds: ") + e.what());
      }
    }
    if (g.has("subdivisions") == g.has("cells")) {
      throw ConfigError("grid needs exactly one of 'subdivisions' or 'cells'");
    }
    if (g.has("subdivisions")) {
      for (auto k : g.counts("subdivisions")) {
        if (k > 24) throw ConfigError("grid.subdivisions entries must be at most 24");
        c.cells.push_back(std::size_t{1} << k);
      }
    } else {
      for (auto n : g.counts("cells")) c.cells.push_back(static_cast<std::size_t>(n));
    }
    if (g.has("periodic")) {
      const json& p = g.raw("periodic");
      if (!p.is_array()) throw ConfigError("grid.periodic must be an array of booleans");
      for (const auto& e : p) {
        if (!e.is_boolean()) throw ConfigError("grid.periodic must be an array of booleans");
        c.periodic.push_back(e.get<bool>());
      }
    }
    g.finish();
  }
  if (top.has("dataset")) {
    Section d = top.section("dataset");
    std::string mode = "short";
    d.text("mode", mode);
    if (mode == "short") {
      c.dataset_mode = DatasetMode::Short;
    } else if (mode == "long") {
      c.dataset_mode = DatasetMode::Long;
    } else {
      throw ConfigError("dataset.mode must be 'short' or 'long'");
    }
    d.count("count", c.initial_count);
    d.number("long_total_time", c.long_total_time);
    d.finish();
  }
  if (top.has("kernel")) {
    Section k = top.section("kernel");
    if (k.has("nu")) {
      const json& v = k.raw("nu");
      try {
        if (v.is_string()) {
          c.smoothness = parse_smoothness(v.get<std::string>());
        } else if (v.is_number()) {
          std::ostringstream os;
          os << v.get<double>();
          c.smoothness = parse_smoothness(os.str());
        } else {
          throw std::invalid_argument("kernel.nu must be \"3/2\" or \"5/2\"");
        }
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    k.count("restarts", c.restarts);
    k.count("iterations", c.iterations);
    k.number("gradient_tol", c.gradient_tol);
    k.count("refit_every", c.refit_every);
    k.count("refit_iterations", c.refit_iterations);
    k.finish();
  }
  if (top.has("delta")) {
    Section d = top.section("delta");
    d.number("initial", c.delta_initial);
    c.delta_final = c.delta_initial;
    d.number("final", c.delta_final);
    d.finish();
  }
  if (top.has("refinement")) {
    Section r = top.section("refinement");
    r.count("points_per_round", c.points_per_round);
    r.count("rounds", c.rounds);
    std::string scope = "global";
    r.text("scope", scope);
    if (scope == "global") {
      c.scope = SamplingScope::Global;
    } else if (scope == "target_roa") {
      c.scope = SamplingScope::TargetRoa;
    } else {
      throw ConfigError("refinement.scope must be 'global' or 'target_roa'");
    }
    r.finish();
  }
  if (top.has("goal")) c.goal = box_from(top.section("goal"));
  if (top.has("truth")) {
    Section t = top.section("truth");
    t.count("resolution", c.truth_multiplier);
    t.number("horizon", c.truth_horizon);
    t.finish();
  }
  if (top.has("padding")) c.padding = top.numbers("padding");
  top.count("seed", c.seed);
  top.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("cannot read configuration '" + path + "'");
  return parse_config(text.str());
}

std::string canonical_config(const PipelineConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  json sys;
  sys["name"] = c.system;
  sys["parameters"] = json::object();
  for (const auto& [k, v] : c.parameters) sys["parameters"][k] = v;
  if (c.tau) sys["tau"] = *c.tau;
  if (c.step) sys["step"] = *c.step;
  sys["noise_std"] = c.noise_std;
  j["system"] = sys;
  json grid;
  grid["cells"] = c.cells;
  if (c.domain) {
    grid["lower"] = c.domain->lower;
    grid["upper"] = c.domain->upper;
  }
  if (!c.periodic.empty()) grid["periodic"] = c.periodic;
  j["grid"] = grid;
  j["dataset"] = {{"mode", c.dataset_mode == DatasetMode::Short ? "short" : "long"},
                  {"count", c.initial_count},
                  {"long_total_time", c.long_total_time}};
  j["kernel"] = {{"nu", to_string(c.smoothness)},
                 {"restarts", c.restarts},
                 {"iterations", c.iterations},
                 {"gradient_tol", c.gradient_tol},
                 {"refit_every", c.refit_every},
                 {"refit_iterations", c.refit_iterations}};
  j["delta"] = {{"initial", c.delta_initial}, {"final", c.delta_final}};
  j["refinement"] = {{"points_per_round", c.points_per_round},
                     {"rounds", c.rounds},
                     {"scope", c.scope == SamplingScope::Global ? "global" : "target_roa"}};
  if (c.goal) j["goal"] = {{"lower", c.goal->lower}, {"upper", c.goal->upper}};
  j["truth"] = {{"resolution", c.truth_multiplier}, {"horizon", c.truth_horizon}};
  j["padding"] = c.padding;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& c) {
  const std::string text = canonical_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gpmorse
