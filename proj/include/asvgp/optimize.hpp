#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "asvgp/design.hpp"
#include "asvgp/error.hpp"
#include "asvgp/model.hpp"

namespace asvgp {

struct LbfgsOptions {
  std::size_t max_iters = 1000;
  double grad_tol = 1e-6;
  // Stop once this many consecutive accepted steps each reduce the objective by at
  // most f_tol * max(1, |f|); the objective has reached its evaluation noise floor.
  double f_tol = 1e-12;
  int stall_iters = 3;
  std::size_t memory = 10;
  double armijo = 1e-4;
  double max_step = 2.0;  // largest change of any coordinate per iteration
  int max_backtracks = 50;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> gradient;
  std::size_t iterations = 0;
  bool converged = false;
  std::string termination;
  std::vector<double> trace;  // objective at the start point and after every accepted step
};

/// Objective returning value and filling the gradient; may return a
/// non-finite value to signal an infeasible point.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

namespace detail {

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Limited-memory BFGS minimizer with Armijo backtracking. Every accepted step
/// satisfies sufficient decrease, so the trace is non-increasing.
inline LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double> x0, const LbfgsOptions& opt = {}) {
  using detail::dot;
  LbfgsResult r;
  r.x = std::move(x0);
  const std::size_t n = r.x.size();
  r.gradient.assign(n, 0.0);
  r.value = objective(r.x, r.gradient);
  if (!std::isfinite(r.value) || detail::inf_norm(r.gradient) != detail::inf_norm(r.gradient)) {
    throw Error("optimizer: non-finite objective at the initial point");
  }
  r.trace.push_back(r.value);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> d(n), x_new(n), g_new(n);
  int stalled = 0;

  while (r.iterations < opt.max_iters) {
    if (detail::inf_norm(r.gradient) < opt.grad_tol) {
      r.converged = true;
      r.termination = "gradient tolerance reached";
      return r;
    }
    // Two-loop recursion for d = -H g.
    std::vector<double> q = r.gradient;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      alpha[i] = memory[i].rho * dot(memory[i].s, q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * memory[i].y[j];
    }
    double gamma = 1.0;
    if (!memory.empty()) gamma = dot(memory.back().s, memory.back().y) / dot(memory.back().y, memory.back().y);
    for (std::size_t j = 0; j < n; ++j) q[j] *= gamma;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const double beta = memory[i].rho * dot(memory[i].y, q);
      for (std::size_t j = 0; j < n; ++j) q[j] += (alpha[i] - beta) * memory[i].s[j];
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = -q[j];
    double slope = dot(d, r.gradient);
    if (!(slope < 0.0)) {
      memory.clear();
      for (std::size_t j = 0; j < n; ++j) d[j] = -r.gradient[j];
      slope = dot(d, r.gradient);
    }

    double t = 1.0;
    const double dmax = detail::inf_norm(d);
    if (memory.empty()) t = std::min(1.0, 1.0 / std::max(dmax, 1e-300));
    if (t * dmax > opt.max_step) t = opt.max_step / dmax;

    bool accepted = false;
    double f_new = 0.0;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      for (std::size_t j = 0; j < n; ++j) x_new[j] = r.x[j] + t * d[j];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= r.value + opt.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      r.termination = "line search could not decrease the objective";
      r.converged = detail::inf_norm(r.gradient) < std::sqrt(opt.grad_tol);
      return r;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      p.s[j] = x_new[j] - r.x[j];
      p.y[j] = g_new[j] - r.gradient[j];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (memory.size() > opt.memory) memory.pop_front();
    }
    const double decrease = r.value - f_new;
    stalled = decrease <= opt.f_tol * std::max({1.0, std::abs(r.value), std::abs(f_new)}) ? stalled + 1 : 0;
    r.x = x_new;
    r.gradient = g_new;
    r.value = f_new;
    r.trace.push_back(f_new);
    ++r.iterations;
    if (stalled >= opt.stall_iters) {
      r.converged = true;
      r.termination = "objective change below tolerance";
      return r;
    }
  }
  r.converged = detail::inf_norm(r.gradient) < opt.grad_tol;
  r.termination = r.converged ? "gradient tolerance reached" : "iteration limit reached";
  return r;
}

struct FitConfig {
  std::vector<std::size_t> num_basis{50};  // one entry, or one per input dimension
  Family family = Family::matern32;
  Structure structure = Structure::one_d;
  std::optional<MaternHyper> init;
  std::size_t max_iters = 1000;
  double grad_tol = 1e-6;
  double f_tol = 1e-12;
  std::uint64_t seed = 0;
  std::size_t num_shards = 1;
};

struct FitReport {
  double initial_elbo = 0.0;
  double final_elbo = 0.0;
  std::vector<double> elbo_trace;
  std::vector<double> final_gradient;
  std::size_t iterations = 0;
  bool converged = false;
  std::string termination;
  double precompute_seconds = 0.0;
  double optimize_seconds = 0.0;
  std::size_t data_passes = 0;
  double jitter = 0.0;
};

struct FitOutcome {
  FitResult result;
  FitReport report;
};

/// Range and moments gathered by the scan pass.
struct DataSummary {
  std::vector<double> min, max;
  double mean_y = 0.0;
  double var_y = 0.0;
};

inline DataSummary summarize(const DataView& data) {
  DataSummary s;
  s.min.assign(data.dims, std::numeric_limits<double>::infinity());
  s.max.assign(data.dims, -std::numeric_limits<double>::infinity());
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    detail::check_finite_row(data, n);
    for (std::size_t d = 0; d < data.dims; ++d) {
      s.min[d] = std::min(s.min[d], data.input(n, d));
      s.max[d] = std::max(s.max[d], data.input(n, d));
    }
    sum += data.y[n];
    sum2 += data.y[n] * data.y[n];
  }
  const double count = static_cast<double>(data.size());
  s.mean_y = sum / count;
  s.var_y = std::max(0.0, sum2 / count - s.mean_y * s.mean_y);
  return s;
}

/// Default starting point: lengthscale 10% of the normalized width, amplitude
/// var(y) (split evenly across additive components), noise 10% of var(y).
inline MaternHyper default_init(const FitConfig& cfg, const std::vector<std::size_t>& m, double var_y) {
  const double v = var_y > 0.0 ? var_y : 1.0;
  MaternHyper h;
  h.family = cfg.family;
  h.log_lengthscale.clear();
  for (std::size_t d = 0; d < m.size(); ++d) h.log_lengthscale.push_back(std::log(0.1 * static_cast<double>(m[d])));
  const std::size_t nv = cfg.structure == Structure::additive ? m.size() : 1;
  h.log_variance.assign(nv, std::log(v / static_cast<double>(nv)));
  h.log_noise = std::log(0.1 * v);
  return h;
}

/// Maximizes the collapsed bound over log-hyperparameters for fixed statistics.
/// The minimized objective is -ELBO / max(N, 1).
inline LbfgsResult optimize_hyper(const Features& f, const Stats& stats, const MaternHyper& init,
                                  const LbfgsOptions& opt) {
  const double scale = 1.0 / std::max<double>(1.0, static_cast<double>(stats.n));
  Objective obj = [&](const std::vector<double>& theta, std::vector<double>& grad) {
    const MaternHyper h = init.unpacked(theta);
    try {
      const double value = -collapsed_elbo(f, stats, h) * scale;
      if (!std::isfinite(value)) return std::numeric_limits<double>::infinity();
      const auto g = elbo_gradient(f, stats, h);
      grad.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) grad[i] = -g[i] * scale;
      return value;
    } catch (const NotPositiveDefinite&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  return minimize_lbfgs(obj, init.pack(), opt);
}

/// Full training pipeline: scan, normalize onto [0, M_d], build bases and
/// Gram components, one statistics pass, optimize, finalize.
inline FitOutcome fit(const DataView& data, const FitConfig& cfg) {
  using clock = std::chrono::steady_clock;
  if (data.size() == 0) throw InvalidData("no training data");
  if (data.x.size() != data.size() * data.dims) throw DimensionMismatch("inputs and targets differ in length");
  if (cfg.max_iters < 1) throw InvalidConfiguration("max_iters must be at least 1");
  if (!(cfg.grad_tol > 0.0)) throw InvalidConfiguration("grad_tol must be positive");
  if (!(cfg.f_tol >= 0.0)) throw InvalidConfiguration("f_tol must be non-negative");
  const std::size_t dims = data.dims;
  if (cfg.structure == Structure::one_d && dims != 1) throw InvalidConfiguration("1d structure needs one input column");
  if (cfg.structure == Structure::separable_2d && dims != 2) {
    throw InvalidConfiguration("separable structure needs exactly two input columns");
  }
  std::vector<std::size_t> m = cfg.num_basis;
  if (m.size() == 1) m.assign(dims, m.front());
  if (m.size() != dims) throw InvalidConfiguration("num_basis needs one entry or one per input dimension");
  const int k = spline_order(cfg.family);
  for (std::size_t md : m) {
    if (md <= static_cast<std::size_t>(k)) throw InvalidConfiguration("num_basis must exceed the spline order");
  }

  FitReport report;
  const auto t0 = clock::now();
  const DataSummary summary = summarize(data);
  ++report.data_passes;

  InputTransform transform;
  std::vector<SplineBasis> bases;
  for (std::size_t d = 0; d < dims; ++d) {
    const double width = summary.max[d] - summary.min[d];
    if (!(width > 0.0)) throw InvalidData("input column " + std::to_string(d) + " has zero range");
    const double upper = static_cast<double>(m[d]);
    transform.offset.push_back(summary.min[d]);
    transform.scale.push_back(upper / width);
    transform.upper.push_back(upper);
    bases.push_back(make_uniform_basis(0.0, upper, m[d], k));
  }
  Features features(FeatureSpace(cfg.structure, std::move(bases)), cfg.family);
  Stats stats = precompute(features.space, data, &transform, cfg.num_shards);
  ++report.data_passes;
  const auto t1 = clock::now();

  MaternHyper init = cfg.init ? *cfg.init : default_init(cfg, m, summary.var_y);
  init.family = cfg.family;
  check_hyper(features, init);
  LbfgsOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.grad_tol = cfg.grad_tol;
  opt.f_tol = cfg.f_tol;
  const LbfgsResult res = optimize_hyper(features, stats, init, opt);
  const MaternHyper best = init.unpacked(res.x);
  FitResult result = finalize(features, stats, best, transform);
  const auto t2 = clock::now();

  const double n = static_cast<double>(stats.n);
  for (double v : res.trace) report.elbo_trace.push_back(-v * n);
  report.initial_elbo = report.elbo_trace.front();
  report.final_elbo = report.elbo_trace.back();
  for (double g : res.gradient) report.final_gradient.push_back(-g * n);
  report.iterations = res.iterations;
  report.converged = res.converged;
  report.termination = res.termination;
  report.precompute_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.optimize_seconds = std::chrono::duration<double>(t2 - t1).count();
  report.jitter = result.jitter;
  return {std::move(result), std::move(report)};
}

struct GradientReport {
  std::vector<double> coarse;  // step 1e-4
  std::vector<double> fine;    // step 1e-5
  double worst_relative_error = 0.0;
  double max_abs_gradient = 0.0;
  bool all_finite = true;
};

/// Compares the default gradient against central differences at a finer
/// step. Relative errors use max(|g1|, |g2|, 1e-6 max(1, |ELBO|)) as scale.
inline GradientReport gradient_check(const Features& f, const Stats& stats, const MaternHyper& h) {
  GradientReport r;
  r.coarse = elbo_gradient(f, stats, h, 1e-4);
  r.fine = elbo_gradient(f, stats, h, 1e-5);
  const double floor = 1e-6 * std::max(1.0, std::abs(collapsed_elbo(f, stats, h)));
  for (std::size_t i = 0; i < r.coarse.size(); ++i) {
    const double a = r.coarse[i];
    const double b = r.fine[i];
    if (!std::isfinite(a) || !std::isfinite(b)) {
      r.all_finite = false;
      r.worst_relative_error = std::numeric_limits<double>::infinity();
      continue;
    }
    r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(a));
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    r.worst_relative_error = std::max(r.worst_relative_error, std::abs(a - b) / denom);
  }
  return r;
}

}  // namespace asvgp
