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

#include "gpmorse/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "gpmorse/io.hpp"

namespace gpmorse {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997896;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Smoothness s) { return s == Smoothness::Matern32 ? "3/2" : "5/2"; }

Smoothness parse_smoothness(const std::string& text) {
  if (text == "3/2" || text == "1.5") return Smoothness::Matern32;
  if (text == "5/2" || text == "2.5") return Smoothness::Matern52;
  throw std::invalid_argument("unsupported Matern smoothness '" + text + "' (use 3/2 or 5/2)");
}

double matern(Smoothness s, double r) {
  if (s == Smoothness::Matern32) return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
  return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

double KernelSpec::component_distance(std::size_t i, double a, double b) const {
  const double d = a - b;
  const double p = i < periods.size() ? periods[i] : 0.0;
  if (p > 0.0) return p / std::numbers::pi * std::abs(std::sin(std::numbers::pi * d / p));
  return std::abs(d);
}

double KernelSpec::scaled_distance(std::span<const double> a, std::span<const double> b) const {
  double r2 = 0.0;
  for (std::size_t i = 0; i < lengthscales.size(); ++i) {
    const double d = component_distance(i, a[i], b[i]) / lengthscales[i];
    r2 += d * d;
  }
  return std::sqrt(r2);
}

double KernelSpec::correlation(std::span<const double> a, std::span<const double> b) const {
  return matern(smoothness, scaled_distance(a, b));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double per_output_alpha(std::size_t dim, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (dim == 0) throw std::invalid_argument("dimension must be positive");
  // 1 - (1 - delta)^(1/M) without cancellation for small delta
  return -std::expm1(std::log1p(-delta) / static_cast<double>(dim));
}

double critical_value(std::size_t dim, double delta) {
  return normal_quantile(1.0 - per_output_alpha(dim, delta) / 2.0);
}

StateBox confidence_hypercube(const Prediction& p, double delta) {
  const double z = critical_value(p.mean.size(), delta);
  State lo(p.mean.size()), hi(p.mean.size());
  for (std::size_t i = 0; i < p.mean.size(); ++i) {
    lo[i] = p.mean[i] - z * p.stddev[i];
    hi[i] = p.mean[i] + z * p.stddev[i];
  }
  return StateBox(std::move(lo), std::move(hi), true);
}

DistanceCache::DistanceCache(const Eigen::MatrixXd& inputs, const std::vector<double>& periods)
    : n_(static_cast<std::size_t>(inputs.rows())) {
  const auto m = static_cast<std::size_t>(inputs.cols());
  KernelSpec k;
  k.periods = periods;
  squared_.assign(m, Eigen::MatrixXd(n_, n_));
  for (std::size_t d = 0; d < m; ++d) {
    auto& s = squared_[d];
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t i = j; i < n_; ++i) {
        const double v = k.component_distance(d, inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)),
                                               inputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)));
        s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v * v;
        s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v * v;
      }
    }
  }
}

LikelihoodValue log_likelihood(const DistanceCache& distances, const Eigen::VectorXd& targets,
                               Smoothness smoothness, std::span<const double> log_params,
                               bool with_gradient, double max_jitter, LikelihoodWorkspace* workspace) {
  const std::size_t m = distances.dim();
  const auto n = static_cast<Eigen::Index>(distances.size());
  if (log_params.size() != m + 1) throw std::invalid_argument("expected M + 1 log-parameters");
  LikelihoodWorkspace local;
  LikelihoodWorkspace& ws = workspace ? *workspace : local;
  LikelihoodValue out;
  out.value = -std::numeric_limits<double>::infinity();

  std::vector<double> inv_l2(m);
  for (std::size_t d = 0; d < m; ++d) inv_l2[d] = std::exp(-2.0 * log_params[d]);
  const double g = std::exp(log_params[m]);

  ws.scaled.setZero(n, n);
  for (std::size_t d = 0; d < m; ++d) ws.scaled.noalias() += inv_l2[d] * distances.squared(d);
  ws.r = ws.scaled.cwiseSqrt();
  const double c = smoothness == Smoothness::Matern32 ? kSqrt3 : kSqrt5;
  ws.e = (-c * ws.r.array()).exp().matrix();
  if (smoothness == Smoothness::Matern32) {
    ws.corr = ((1.0 + kSqrt3 * ws.r.array()) * ws.e.array()).matrix();
  } else {
    ws.corr = ((1.0 + kSqrt5 * ws.r.array() + 5.0 / 3.0 * ws.scaled.array()) * ws.e.array()).matrix();
  }

  double jitter = g;
  for (;;) {
    ws.cmat = ws.corr;
    ws.cmat.diagonal().array() += jitter;
    ws.llt.compute(ws.cmat);
    if (ws.llt.info() == Eigen::Success) break;
    jitter = std::max(jitter * 10.0, 1e-8);
    if (jitter > max_jitter * (1.0 + 1e-12)) return out;
  }

  const Eigen::VectorXd alpha = ws.llt.solve(targets);
  const double quad = targets.dot(alpha);
  const double nd = static_cast<double>(n);
  const double sigma2 = std::max(quad / nd, 1e-300);
  const auto& lmat = ws.llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(lmat(i, i));

  out.value = -0.5 * nd * std::log(sigma2) - 0.5 * logdet -
              0.5 * nd * (1.0 + std::log(2.0 * std::numbers::pi));
  out.signal_variance = sigma2;
  out.jitter = jitter;
  out.ok = std::isfinite(out.value);
  if (!with_gradient || !out.ok) return out;

  // dL/dp = 1/2 sum_ij (a a^T / s2 - C^-1)_ij dC_ij/dp
  ws.cinv.setIdentity(n, n);
  ws.llt.solveInPlace(ws.cinv);
  if (smoothness == Smoothness::Matern32) {
    ws.phi = (3.0 * ws.e.array()).matrix();
  } else {
    ws.phi = ((5.0 / 3.0) * (1.0 + kSqrt5 * ws.r.array()) * ws.e.array()).matrix();
  }
  ws.cinv.noalias() -= (alpha / sigma2) * alpha.transpose();  // now -(W)
  ws.phi.array() *= -ws.cinv.array();
  out.gradient.assign(m + 1, 0.0);
  for (std::size_t d = 0; d < m; ++d) {
    out.gradient[d] = 0.5 * inv_l2[d] * (ws.phi.array() * distances.squared(d).array()).sum();
  }
  if (jitter == g) out.gradient[m] = -0.5 * g * ws.cinv.trace();
  return out;
}

std::vector<double> OutputModel::log_params() const {
  std::vector<double> p;
  for (double l : kernel.lengthscales) p.push_back(std::log(l));
  p.push_back(std::log(noise_ratio));
  return p;
}

namespace {

struct Ascent {
  const DistanceCache& distances;
  const Eigen::VectorXd& targets;
  const FitOptions& options;
  std::vector<double> lower;
  std::vector<double> upper;
  mutable LikelihoodWorkspace workspace;

  std::vector<double> clip(std::vector<double> p) const {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
    return p;
  }

  LikelihoodValue eval(const std::vector<double>& p, bool grad) const {
    return log_likelihood(distances, targets, options.smoothness, p, grad, options.max_jitter, &workspace);
  }

  // Projected ascent along a BFGS direction with Armijo backtracking.
  StartRecord run(const std::vector<double>& start) const {
    const std::size_t k = lower.size();
    StartRecord rec;
    rec.start = clip(start);
    std::vector<double> p = rec.start;
    LikelihoodValue cur = eval(p, options.iterations > 0);
    rec.start_value = cur.value;
    rec.end = p;
    rec.end_value = cur.value;
    if (!cur.ok) return rec;

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    auto blocked = [&](std::size_t i, double dir) {
      return (p[i] <= lower[i] && dir < 0.0) || (p[i] >= upper[i] && dir > 0.0);
    };
    for (std::size_t it = 0; it < options.iterations; ++it) {
      Eigen::VectorXd g(k);
      for (std::size_t i = 0; i < k; ++i) g(i) = blocked(i, cur.gradient[i]) ? 0.0 : cur.gradient[i];
      if (g.norm() < options.gradient_tol) break;

      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        Eigen::VectorXd dir = h * g;
        for (std::size_t i = 0; i < k; ++i) {
          if (blocked(i, dir(i))) dir(i) = 0.0;
        }
        if (dir.dot(g) <= 0.0) {
          h.setIdentity();
          dir = g;
        }
        double t = std::min(1.0, 2.0 / std::max(dir.norm(), 1e-300));
        while (t * dir.norm() > 1e-10) {
          std::vector<double> q(k);
          for (std::size_t i = 0; i < k; ++i) q[i] = p[i] + t * dir(i);
          q = clip(std::move(q));
          double predicted = 0.0;
          for (std::size_t i = 0; i < k; ++i) predicted += g(i) * (q[i] - p[i]);
          LikelihoodValue trial = eval(q, true);
          if (trial.ok && trial.value >= cur.value + 1e-4 * predicted && trial.value > cur.value) {
            Eigen::VectorXd s(k), y(k);
            for (std::size_t i = 0; i < k; ++i) {
              s(i) = q[i] - p[i];
              y(i) = cur.gradient[i] - trial.gradient[i];
            }
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
              const Eigen::VectorXd hy = h * y;
              const double yhy = y.dot(hy);
              h += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) - (hy * s.transpose() + s * hy.transpose()) / sy;
            }
            p = std::move(q);
            cur = std::move(trial);
            accepted = true;
            break;
          }
          t *= 0.5;
        }
        if (!accepted) h.setIdentity();
      }
      ++rec.iterations;
      if (!accepted) break;
    }
    rec.end = p;
    rec.end_value = cur.value;
    return rec;
  }
};

Eigen::VectorXd output_targets(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                               std::size_t d, bool displacement) {
  Eigen::VectorXd t = outputs.col(static_cast<Eigen::Index>(d));
  if (displacement) t -= inputs.col(static_cast<Eigen::Index>(d));
  return t;
}

void check_dataset(const TrajectoryDataset& data, const FitOptions& options) {
  if (data.size() < 2) throw std::invalid_argument("GP fit needs at least two samples");
  for (const auto& s : data.pairs) {
    if (s.x.size() != data.dim || s.y.size() != data.dim) throw DimensionError("sample has wrong dimension");
    for (std::size_t d = 0; d < data.dim; ++d) {
      if (!std::isfinite(s.x[d]) || !std::isfinite(s.y[d])) {
        throw std::invalid_argument("GP fit requires finite samples");
      }
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      const auto& a = data.pairs[i];
      const auto& b = data.pairs[j];
      double dx = 0.0;
      double dy = 0.0;
      for (std::size_t d = 0; d < data.dim; ++d) {
        dx = std::max(dx, std::abs(a.x[d] - b.x[d]));
        dy = std::max(dy, std::abs(a.y[d] - b.y[d]) / (1.0 + std::abs(a.y[d])));
      }
      if (dx <= options.duplicate_tolerance && dy > options.duplicate_tolerance) {
        throw NumericalError("degenerate dataset: samples " + std::to_string(i) + " and " +
                             std::to_string(j) + " share an input but disagree on the output");
      }
    }
  }
}

}  // namespace

void GpSurrogate::factorise(std::size_t output, double max_jitter) {
  auto& om = outputs_[output];
  const auto n = inputs_.rows();
  Eigen::MatrixXd corr(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const Eigen::VectorXd a = inputs_.row(i).transpose();
      const Eigen::VectorXd b = inputs_.row(j).transpose();
      const double v = om.kernel.correlation({a.data(), static_cast<std::size_t>(a.size())},
                                             {b.data(), static_cast<std::size_t>(b.size())});
      corr(i, j) = v;
      corr(j, i) = v;
    }
  }
  double jitter = std::max(om.jitter, om.noise_ratio);
  for (;;) {
    Eigen::MatrixXd cmat = corr;
    cmat.diagonal().array() += jitter;
    om.chol.compute(cmat);
    if (om.chol.info() == Eigen::Success) break;
    jitter = std::max(jitter * 10.0, 1e-8);
    if (jitter > max_jitter * (1.0 + 1e-12)) {
      throw NumericalError("Cholesky factorisation failed for output " + std::to_string(output) +
                           " even with jitter " + fmt(max_jitter));
    }
  }
  om.jitter = jitter;
  om.weights = om.chol.solve(om.targets);
}

GpSurrogate fit(const TrajectoryDataset& data, const FitOptions& options, FitDiagnostics* diagnostics) {
  check_dataset(data, options);
  const std::size_t m = data.dim;
  const auto n = static_cast<Eigen::Index>(data.size());
  GpSurrogate model;
  model.inputs_.resize(n, static_cast<Eigen::Index>(m));
  model.raw_outputs_.resize(n, static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < m; ++d) {
      model.inputs_(i, static_cast<Eigen::Index>(d)) = data.pairs[static_cast<std::size_t>(i)].x[d];
      model.raw_outputs_(i, static_cast<Eigen::Index>(d)) = data.pairs[static_cast<std::size_t>(i)].y[d];
    }
  }
  model.periods_ = options.periods;
  model.periods_.resize(m, 0.0);

  const DistanceCache distances(model.inputs_, model.periods_);
  std::vector<double> spans(m);
  for (std::size_t d = 0; d < m; ++d) {
    const auto col = model.inputs_.col(static_cast<Eigen::Index>(d));
    double s = model.periods_[d] > 0.0 ? model.periods_[d] : col.maxCoeff() - col.minCoeff();
    spans[d] = s > 0.0 ? s : 1.0;
  }

  model.outputs_.resize(m);
  std::vector<std::vector<StartRecord>> records(m);
  std::vector<std::size_t> best(m, 0);

  // outputs are independent models
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t d = 0; d < m; ++d) {
    auto& om = model.outputs_[d];
    om.displacement = model.periods_[d] > 0.0;
    om.targets = output_targets(model.inputs_, model.raw_outputs_, d, om.displacement);

    Ascent ascent{distances, om.targets, options, {}, {}, {}};
    for (std::size_t i = 0; i < m; ++i) {
      ascent.lower.push_back(std::log(1e-3 * spans[i]));
      ascent.upper.push_back(std::log(1e2 * spans[i]));
    }
    ascent.lower.push_back(std::log(options.noise_floor));
    ascent.upper.push_back(0.0);

    std::vector<std::vector<double>> starts;
    if (d < options.warm_start.size() && !options.warm_start[d].empty()) {
      starts.push_back(options.warm_start[d]);
    } else {
      std::mt19937_64 rng(options.seed * 0x9e3779b97f4a7c15ULL + d + 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t s = 0; s < std::max<std::size_t>(1, options.restarts); ++s) {
        std::vector<double> p(m + 1);
        for (std::size_t i = 0; i < m; ++i) {
          p[i] = s == 0 ? std::log(0.3 * spans[i])
                        : std::log(0.05 * spans[i]) + unit(rng) * std::log(40.0);
        }
        p[m] = s == 0 ? std::log(std::max(1e-6, options.noise_floor))
                      : std::log(options.noise_floor) + unit(rng) * (std::log(1e-2) - std::log(options.noise_floor));
        starts.push_back(std::move(p));
      }
    }

    for (const auto& s : starts) records[d].push_back(ascent.run(s));
    for (std::size_t s = 1; s < records[d].size(); ++s) {
      if (records[d][s].end_value > records[d][best[d]].end_value) best[d] = s;
    }
    const auto& chosen = records[d][best[d]];
    if (!std::isfinite(chosen.end_value)) continue;  // reported below
    om.kernel.smoothness = options.smoothness;
    om.kernel.periods = model.periods_;
    om.kernel.lengthscales.resize(m);
    for (std::size_t i = 0; i < m; ++i) om.kernel.lengthscales[i] = std::exp(chosen.end[i]);
    om.noise_ratio = std::exp(chosen.end[m]);
    const LikelihoodValue v = ascent.eval(chosen.end, false);
    om.signal_variance = v.signal_variance;
    om.jitter = v.jitter;
    om.log_likelihood = v.value;
  }

  for (std::size_t d = 0; d < m; ++d) {
    if (!std::isfinite(records[d][best[d]].end_value)) {
      throw NumericalError("no admissible hyperparameters for output " + std::to_string(d) +
                           ": Cholesky failed at every start");
    }
    model.factorise(d, options.max_jitter);
  }
  if (diagnostics) {
    diagnostics->starts = std::move(records);
    diagnostics->best = std::move(best);
  }
  return model;
}

GpSurrogate condition(const GpSurrogate& prior, const TrajectoryDataset& data) {
  FitOptions options;
  options.iterations = 0;
  options.periods = prior.periods_;
  options.restarts = 1;
  options.smoothness = prior.outputs_.empty() ? Smoothness::Matern52 : prior.outputs_[0].kernel.smoothness;
  for (const auto& om : prior.outputs_) options.warm_start.push_back(om.log_params());
  return fit(data, options);
}

Eigen::RowVectorXd GpSurrogate::cross_correlation(std::size_t output, std::span<const double> x) const {
  const auto& kernel = outputs_[output].kernel;
  const auto n = inputs_.rows();
  const std::size_t m = dim();
  Eigen::RowVectorXd k(n);
  std::vector<double> inv_l(m);
  for (std::size_t d = 0; d < m; ++d) inv_l[d] = 1.0 / kernel.lengthscales[d];
  for (Eigen::Index i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      const double c = kernel.component_distance(d, x[d], inputs_(i, static_cast<Eigen::Index>(d))) * inv_l[d];
      r2 += c * c;
    }
    k(i) = matern(kernel.smoothness, std::sqrt(r2));
  }
  return k;
}

Prediction GpSurrogate::predict(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("prediction input has wrong dimension");
  Prediction p;
  p.mean.resize(dim());
  p.stddev.resize(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    const auto& om = outputs_[d];
    const Eigen::RowVectorXd k = cross_correlation(d, x);
    p.mean[d] = k.dot(om.weights) + (om.displacement ? x[d] : 0.0);
    const Eigen::VectorXd v = om.chol.matrixL().solve(k.transpose());
    p.stddev[d] = std::sqrt(om.signal_variance * std::max(0.0, 1.0 - v.squaredNorm()));
  }
  return p;
}

State GpSurrogate::predict_mean(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("prediction input has wrong dimension");
  State mean(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    const auto& om = outputs_[d];
    mean[d] = cross_correlation(d, x).dot(om.weights) + (om.displacement ? x[d] : 0.0);
  }
  return mean;
}

std::vector<Prediction> GpSurrogate::predict_batch(const std::vector<State>& xs, bool with_stddev) const {
  constexpr std::size_t kBlock = 256;
  const std::size_t count = xs.size();
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  const auto n = inputs_.rows();
  std::vector<Prediction> out(count);
  for (const auto& x : xs) {
    if (x.size() != dim()) throw DimensionError("prediction input has wrong dimension");
  }

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = b * kBlock;
    const std::size_t end = std::min(count, begin + kBlock);
    const auto rows = static_cast<Eigen::Index>(end - begin);
    for (std::size_t q = begin; q < end; ++q) {
      out[q].mean.resize(dim());
      out[q].stddev.assign(dim(), 0.0);
    }
    for (std::size_t d = 0; d < dim(); ++d) {
      const auto& om = outputs_[d];
      Eigen::MatrixXd kstar(n, rows);
      for (std::size_t q = begin; q < end; ++q) {
        kstar.col(static_cast<Eigen::Index>(q - begin)) = cross_correlation(d, xs[q]).transpose();
      }
      const Eigen::VectorXd mean = kstar.transpose() * om.weights;
      for (std::size_t q = begin; q < end; ++q) {
        out[q].mean[d] = mean(static_cast<Eigen::Index>(q - begin)) + (om.displacement ? xs[q][d] : 0.0);
      }
      if (!with_stddev) continue;
      om.chol.matrixL().solveInPlace(kstar);
      const Eigen::RowVectorXd reduction = kstar.colwise().squaredNorm();
      for (std::size_t q = begin; q < end; ++q) {
        const double v = 1.0 - reduction(static_cast<Eigen::Index>(q - begin));
        out[q].stddev[d] = std::sqrt(om.signal_variance * std::max(0.0, v));
      }
    }
  }
  return out;
}

void write_model(std::ostream& out, const GpSurrogate& model) {
  const std::size_t m = model.dim();
  const std::size_t n = model.size();
  out << "gpmorse-gp 1\n";
  out << "dim " << m << " samples " << n << " smoothness "
      << (m ? to_string(model.outputs_[0].kernel.smoothness) : std::string("5/2")) << "\n";
  out << "periods";
  for (double p : model.periods_) out << ' ' << fmt(p);
  out << "\n";
  for (std::size_t d = 0; d < m; ++d) {
    const auto& om = model.outputs_[d];
    out << "output " << d << " displacement " << (om.displacement ? 1 : 0) << " signal_variance "
        << fmt(om.signal_variance) << " noise_ratio " << fmt(om.noise_ratio) << " noise_variance "
        << fmt(om.noise_variance()) << " jitter " << fmt(om.jitter) << " log_likelihood "
        << fmt(om.log_likelihood) << " lengthscales";
    for (double l : om.kernel.lengthscales) out << ' ' << fmt(l);
    out << "\n";
  }
  out << "data\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < m; ++d) {
      out << (d ? " " : "") << fmt(model.inputs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    for (std::size_t d = 0; d < m; ++d) {
      out << ' ' << fmt(model.raw_outputs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    out << "\n";
  }
}

GpSurrogate read_model(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&] {
    ++lineno;
    return static_cast<bool>(std::getline(in, line));
  };
  auto fail = [&](const std::string& what) -> GpSurrogate { throw ParseError(lineno, "model file: " + what); };
  if (!next() || line != "gpmorse-gp 1") return fail("expected 'gpmorse-gp 1'");
  std::string key;
  std::size_t m = 0;
  std::size_t n = 0;
  std::string smooth;
  {
    next();
    std::istringstream is(line);
    std::string k1, k2, k3;
    if (!(is >> k1 >> m >> k2 >> n >> k3 >> smooth) || k1 != "dim" || k2 != "samples" || k3 != "smoothness") {
      return fail("bad dimension line");
    }
  }
  GpSurrogate model;
  {
    next();
    std::istringstream is(line);
    if (!(is >> key) || key != "periods") return fail("missing periods");
    model.periods_.resize(m);
    for (auto& p : model.periods_) {
      if (!(is >> p)) return fail("bad periods");
    }
  }
  Smoothness smoothness{};
  try {
    smoothness = parse_smoothness(smooth);
  } catch (const std::invalid_argument&) {
    lineno = 2;
    return fail("unknown smoothness '" + smooth + "'");
  }
  model.outputs_.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    next();
    std::istringstream is(line);
    auto& om = model.outputs_[d];
    std::size_t index = 0;
    int disp = 0;
    double noise_variance = 0.0;
    std::string k[8];
    if (!(is >> k[0] >> index >> k[1] >> disp >> k[2] >> om.signal_variance >> k[3] >> om.noise_ratio >> k[4] >>
          noise_variance >> k[5] >> om.jitter >> k[6] >> om.log_likelihood >> k[7]) ||
        k[0] != "output" || index != d || k[7] != "lengthscales") {
      return fail("bad output line " + std::to_string(d));
    }
    om.displacement = disp != 0;
    om.kernel.smoothness = smoothness;
    om.kernel.periods = model.periods_;
    om.kernel.lengthscales.resize(m);
    for (auto& l : om.kernel.lengthscales) {
      if (!(is >> l) || !(l > 0.0)) return fail("bad lengthscale");
    }
  }
  if (!next() || line != "data") return fail("missing data section");
  model.inputs_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  model.raw_outputs_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    if (!next()) return fail("truncated data");
    std::istringstream is(line);
    for (std::size_t d = 0; d < m; ++d) {
      if (!(is >> model.inputs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)))) return fail("bad data row");
    }
    for (std::size_t d = 0; d < m; ++d) {
      if (!(is >> model.raw_outputs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)))) return fail("bad data row");
    }
  }
  for (std::size_t d = 0; d < m; ++d) {
    auto& om = model.outputs_[d];
    om.targets = output_targets(model.inputs_, model.raw_outputs_, d, om.displacement);
    model.factorise(d, std::max(1e-4, om.jitter));
  }
  return model;
}

}  // namespace gpmorse
