#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "asvgp/model.hpp"
#include "asvgp/synth.hpp"

namespace asvgp::bench {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Median seconds per call of `fn`, batching calls until each sample lasts
/// at least `min_sample` seconds.
template <class Fn>
double time_per_call(Fn&& fn, int samples = 5, double min_sample = 0.02) {
  using clock = std::chrono::steady_clock;
  std::size_t batch = 1;
  while (true) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < batch; ++i) fn();
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    if (dt >= min_sample || batch > (1u << 24)) break;
    batch *= 2;
  }
  std::vector<double> s;
  for (int r = 0; r < samples; ++r) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < batch; ++i) fn();
    s.push_back(std::chrono::duration<double>(clock::now() - t0).count() / static_cast<double>(batch));
  }
  std::sort(s.begin(), s.end());
  return s[s.size() / 2];
}

/// 1D problem on the benchmark function: inputs in [0, 1] mapped onto [0, M].
struct Problem {
  synth::Dataset data;
  Features features;
  InputTransform transform;
};

inline Problem make_problem(std::size_t n, std::size_t m, Family family, std::uint64_t seed, double noise_std = 0.2) {
  synth::Dataset d = synth::test_function_data(n, noise_std, seed);
  const double upper = static_cast<double>(m);
  InputTransform t{{0.0}, {upper}, {upper}};
  Features f(FeatureSpace::one_d(make_uniform_basis(0.0, upper, m, spline_order(family))), family);
  return {std::move(d), std::move(f), std::move(t)};
}

inline Stats precompute_problem(const Problem& p, std::size_t shards = 1) {
  return precompute(p.features.space, DataView{p.data.x, 1, p.data.y}, &p.transform, shards);
}

/// A hyperparameter point representative of a fitted model (lengthscale a few knots).
inline MaternHyper bench_hyper(Family family) {
  MaternHyper h;
  h.family = family;
  h.log_lengthscale = {std::log(3.0)};
  h.log_variance = {0.0};
  h.log_noise = std::log(0.04);
  return h;
}

struct Row {
  std::string kind;  // "precompute" or "elbo"
  std::size_t n = 0;
  std::size_t m = 0;
  double seconds = 0.0;
};

inline double precompute_seconds(const Problem& p, int samples = 3) {
  return time_per_call([&] { (void)precompute_problem(p); }, samples, 0.0);
}

/// One bound evaluation (the per-iteration cost before gradient differencing).
inline double elbo_seconds(const Features& f, const Stats& s, const MaternHyper& h, int samples = 5) {
  volatile double sink = 0.0;
  return time_per_call([&] { sink = sink + collapsed_elbo(f, s, h); }, samples);
}

/// Precompute time over `ns` at fixed `m_for_n`, then ELBO time over `ms` at
/// fixed `n_for_m`.
inline std::vector<Row> sweep(const std::vector<std::size_t>& ns, std::size_t m_for_n, const std::vector<std::size_t>& ms,
                              std::size_t n_for_m, std::uint64_t seed, Family family = Family::matern32) {
  std::vector<Row> rows;
  for (std::size_t n : ns) {
    const Problem p = make_problem(n, m_for_n, family, seed);
    rows.push_back({"precompute", n, m_for_n, precompute_seconds(p)});
  }
  for (std::size_t m : ms) {
    const Problem p = make_problem(n_for_m, m, family, seed);
    const Stats s = precompute_problem(p);
    rows.push_back({"elbo", n_for_m, m, elbo_seconds(p.features, s, bench_hyper(family))});
  }
  return rows;
}

inline void write_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << "kind,n,m,seconds\n";
  for (const auto& r : rows) out << r.kind << ',' << r.n << ',' << r.m << ',' << r.seconds << '\n';
}

}  // namespace asvgp::bench
