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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gpmorse/dynamics.hpp"
#include "gpmorse/grid.hpp"

namespace gpmorse {

/// Cholesky failure after jitter escalation, or a degenerate dataset.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Smoothness { Matern32, Matern52 };

std::string to_string(Smoothness s);
/// Accepts "3/2", "5/2", "1.5", "2.5".
Smoothness parse_smoothness(const std::string& text);

/// Matern correlation at scaled distance r >= 0; equals 1 at r = 0.
double matern(Smoothness s, double r);

/// Stationary ARD Matern correlation k(x, x'; theta).
///
/// Dimensions with a positive period use the chordal distance
/// (P / pi) * sin(pi * |dx| / P): it agrees with the wrapped difference to
/// second order and keeps every Gram matrix positive semidefinite.
struct KernelSpec {
  Smoothness smoothness = Smoothness::Matern52;
  std::vector<double> lengthscales;
  std::vector<double> periods;  // 0 for non-periodic dimensions

  double component_distance(std::size_t i, double a, double b) const;
  double scaled_distance(std::span<const double> a, std::span<const double> b) const;
  double correlation(std::span<const double> a, std::span<const double> b) const;
};

/// Standard normal quantile.
double normal_quantile(double p);
/// Per-output level alpha = 1 - (1 - delta)^(1/M).
double per_output_alpha(std::size_t dim, double delta);
/// Critical value z_{alpha/2} for joint confidence 1 - delta over M outputs.
double critical_value(std::size_t dim, double delta);

struct Prediction {
  State mean;
  State stddev;
};

/// Hypercube prod_n [mu_n - z sigma_n, mu_n + z sigma_n] with z = critical_value(M, delta).
StateBox confidence_hypercube(const Prediction& p, double delta);

/// Profiled log marginal likelihood of a zero-mean GP with correlation
/// R(theta) + g I, the signal variance maximised in closed form.
/// Parameters: [log l_1, ..., log l_M, log g].
struct LikelihoodValue {
  double value = 0.0;
  std::vector<double> gradient;  // empty unless requested
  double signal_variance = 0.0;
  double jitter = 0.0;            // nugget actually used (>= g)
  bool ok = false;
};

/// Pairwise squared per-dimension distances of the training inputs, reused
/// across likelihood evaluations.
class DistanceCache {
 public:
  DistanceCache(const Eigen::MatrixXd& inputs, const std::vector<double>& periods);
  std::size_t size() const { return n_; }
  std::size_t dim() const { return squared_.size(); }
  const Eigen::MatrixXd& squared(std::size_t d) const { return squared_[d]; }

 private:
  std::size_t n_;
  std::vector<Eigen::MatrixXd> squared_;
};

/// Scratch matrices reused across evaluations on one dataset.
struct LikelihoodWorkspace {
  Eigen::MatrixXd scaled, r, e, corr, cmat, cinv, phi;
  Eigen::LLT<Eigen::MatrixXd> llt;
};

/// Profiled log marginal likelihood in log_params = [log l_1..log l_M, log g],
/// with g the noise-to-signal ratio.
LikelihoodValue log_likelihood(const DistanceCache& distances, const Eigen::VectorXd& targets,
                               Smoothness smoothness, std::span<const double> log_params,
                               bool with_gradient, double max_jitter = 1e-4,
                               LikelihoodWorkspace* workspace = nullptr);

struct FitOptions {
  Smoothness smoothness = Smoothness::Matern52;
  std::size_t restarts = 8;
  std::size_t iterations = 200;
  double gradient_tol = 1e-6;
  double noise_floor = 1e-8;   // lower bound on eta^2 / sigma^2
  double max_jitter = 1e-4;
  std::vector<double> periods;  // per input dimension, 0 = not periodic
  std::uint64_t seed = 0;
  /// Optional start per output ([log l..., log g]); replaces random restarts.
  std::vector<std::vector<double>> warm_start;
  /// Two inputs closer than this with outputs further apart than
  /// duplicate_tolerance are reported as a degenerate dataset.
  double duplicate_tolerance = 1e-9;
};

struct StartRecord {
  std::vector<double> start;
  double start_value = 0.0;
  std::vector<double> end;
  double end_value = 0.0;
  std::size_t iterations = 0;
};

struct FitDiagnostics {
  std::vector<std::vector<StartRecord>> starts;  // per output dimension
  std::vector<std::size_t> best;                 // chosen start per output
};

/// One independent GP per output dimension.
struct OutputModel {
  KernelSpec kernel;
  double signal_variance = 1.0;  // sigma^2
  double noise_ratio = 1e-8;     // eta^2 / sigma^2
  double jitter = 1e-8;          // nugget in the factorised matrix
  double log_likelihood = 0.0;
  bool displacement = false;     // periodic output: models y - x
  Eigen::VectorXd targets;
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd weights;       // (R + jitter I)^{-1} targets

  double noise_variance() const { return noise_ratio * signal_variance; }
  std::vector<double> log_params() const;
};

class GpSurrogate {
 public:
  GpSurrogate() = default;

  std::size_t dim() const { return outputs_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
  const std::vector<OutputModel>& outputs() const { return outputs_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& raw_outputs() const { return raw_outputs_; }
  const std::vector<double>& periods() const { return periods_; }

  Prediction predict(std::span<const double> x) const;
  State predict_mean(std::span<const double> x) const;

  /// Batched prediction over many states; parallel over query blocks.
  std::vector<Prediction> predict_batch(const std::vector<State>& xs, bool with_stddev = true) const;

  friend GpSurrogate fit(const TrajectoryDataset&, const FitOptions&, FitDiagnostics*);
  friend GpSurrogate condition(const GpSurrogate&, const TrajectoryDataset&);
  friend void write_model(std::ostream&, const GpSurrogate&);
  friend GpSurrogate read_model(std::istream&);

 private:
  void factorise(std::size_t output, double max_jitter);
  Eigen::RowVectorXd cross_correlation(std::size_t output, std::span<const double> x) const;

  Eigen::MatrixXd inputs_;       // N x M
  Eigen::MatrixXd raw_outputs_;  // N x M
  std::vector<double> periods_;
  std::vector<OutputModel> outputs_;
};

/// Maximum-likelihood fit, one model per output dimension.
GpSurrogate fit(const TrajectoryDataset& data, const FitOptions& options,
                FitDiagnostics* diagnostics = nullptr);

/// Posterior on a new dataset with the hyperparameters of `model`
/// (signal variance re-profiled in closed form).
GpSurrogate condition(const GpSurrogate& model, const TrajectoryDataset& data);

/// Flat text format: header, per-output hyperparameters, inputs and outputs.
/// read_model throws ParseError naming the offending line.
void write_model(std::ostream& out, const GpSurrogate& model);
GpSurrogate read_model(std::istream& in);

}  // namespace gpmorse
