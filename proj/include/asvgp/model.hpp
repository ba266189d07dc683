#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "asvgp/banded.hpp"
#include "asvgp/design.hpp"
#include "asvgp/error.hpp"
#include "asvgp/rkhs_gram.hpp"

namespace asvgp {

inline constexpr double kNoiseFloor = 1e-8;

/// Matern hyperparameters in log space.
///
/// 1D and separable models carry one amplitude (separable factors beyond the
/// first are pinned to unit amplitude); additive models carry one per
/// dimension. Lengthscales are per input dimension.
struct MaternHyper {
  Family family = Family::matern32;
  std::vector<double> log_lengthscale{0.0};
  std::vector<double> log_variance{0.0};
  double log_noise = 0.0;

  static MaternHyper one_d(Family family, double lengthscale, double variance, double noise) {
    return {family, {std::log(lengthscale)}, {std::log(variance)}, std::log(noise)};
  }

  double lengthscale(std::size_t d = 0) const { return std::exp(log_lengthscale.at(d)); }
  double variance(std::size_t d = 0) const { return std::exp(log_variance.at(d)); }
  double noise() const { return std::max(std::exp(log_noise), kNoiseFloor); }

  /// k(x, x) for the structure these hyperparameters belong to.
  double prior_variance() const {
    double s = 0.0;
    for (double lv : log_variance) s += std::exp(lv);
    return s;
  }

  std::size_t num_params() const noexcept { return log_lengthscale.size() + log_variance.size() + 1; }

  /// Free parameters as one vector: lengthscales, amplitudes, noise.
  std::vector<double> pack() const {
    std::vector<double> theta(log_lengthscale);
    theta.insert(theta.end(), log_variance.begin(), log_variance.end());
    theta.push_back(log_noise);
    return theta;
  }

  MaternHyper unpacked(std::span<const double> theta) const {
    if (theta.size() != num_params()) throw DimensionMismatch("parameter vector has the wrong length");
    MaternHyper h = *this;
    const std::size_t nl = log_lengthscale.size();
    const std::size_t nv = log_variance.size();
    std::copy(theta.begin(), theta.begin() + nl, h.log_lengthscale.begin());
    std::copy(theta.begin() + nl, theta.begin() + nl + nv, h.log_variance.begin());
    h.log_noise = theta[nl + nv];
    return h;
  }

  bool operator==(const MaternHyper&) const = default;
};

/// Feature space plus the hyperparameter-free Gram components of each basis.
struct Features {
  FeatureSpace space;
  Family family;
  std::vector<GramComponents> grams;

  Features(FeatureSpace s, Family f) : space(std::move(s)), family(f) {
    for (const auto& b : space.bases()) grams.push_back(gram_components(b, family));
  }
};

inline void check_hyper(const Features& f, const MaternHyper& h) {
  if (h.family != f.family) throw InvalidConfiguration("hyperparameters belong to a different kernel family");
  const std::size_t d = f.space.input_dims();
  const std::size_t nv = f.space.structure() == Structure::additive ? d : 1;
  if (h.log_lengthscale.size() != d || h.log_variance.size() != nv) {
    throw InvalidConfiguration("hyperparameter shape does not match the feature structure");
  }
}

/// K_uu over the full feature space.
inline SymBand assemble_kuu(const Features& f, const MaternHyper& h) {
  check_hyper(f, h);
  const auto& space = f.space;
  switch (space.structure()) {
    case Structure::one_d:
      return assemble_kuu(f.grams[0], h.lengthscale(0), h.variance(0));
    case Structure::separable_2d: {
      const SymBand k1 = assemble_kuu(f.grams[0], h.lengthscale(0), h.variance(0));
      const SymBand k2 = assemble_kuu(f.grams[1], h.lengthscale(1), 1.0);
      const std::size_t m1 = k1.dim();
      const std::size_t m2 = k2.dim();
      const std::size_t k = static_cast<std::size_t>(space.order());
      SymBand out(m1 * m2, space.kuu_width());
      for (std::size_t i1 = 0; i1 < m1; ++i1) {
        for (std::size_t j1 = i1 >= k ? i1 - k : 0; j1 <= std::min(m1 - 1, i1 + k); ++j1) {
          const double a = k1.get(i1, j1);
          for (std::size_t i2 = 0; i2 < m2; ++i2) {
            for (std::size_t j2 = i2 >= k ? i2 - k : 0; j2 <= std::min(m2 - 1, i2 + k); ++j2) {
              const std::size_t r = i1 * m2 + i2;
              const std::size_t c = j1 * m2 + j2;
              if (c <= r) out.at(r, c) = a * k2.get(i2, j2);
            }
          }
        }
      }
      return out;
    }
    case Structure::additive: {
      SymBand out(space.num_features(), space.kuu_width());
      for (std::size_t d = 0; d < space.input_dims(); ++d) {
        const SymBand kd = assemble_kuu(f.grams[d], h.lengthscale(d), h.variance(d));
        const std::size_t off = space.block_offset(d);
        for (std::size_t i = 0; i < kd.dim(); ++i) {
          for (std::size_t j = kd.first_col(i); j <= i; ++j) out.at(off + i, off + j) = kd(i, j);
        }
      }
      return out;
    }
  }
  throw InvalidConfiguration("unknown structure");
}

/// Cholesky factors of K_uu + jitter I and M_b = K_uu + jitter I + A / noise.
struct Factorization {
  SymBand kuu;  // without jitter
  LowerBand chol_kuu;
  LowerBand chol_mb;
  double jitter = 0.0;
};

/// Jitter ladder: 0, then 1e-10 * mean(diag K_uu), x10 per retry, up to 1e-4 * mean(diag).
inline Factorization factorize(const Features& f, const Stats& stats, const MaternHyper& h) {
  if (stats.fingerprint != f.space.fingerprint()) throw DimensionMismatch("statistics built from a different basis");
  Factorization out;
  out.kuu = assemble_kuu(f, h);
  const double inv_noise = 1.0 / h.noise();
  const double scale = out.kuu.mean_diagonal();
  double jitter = 0.0;
  std::size_t last_pivot = 0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    if (attempt > 0) jitter = 1e-10 * scale * std::pow(10.0, attempt - 1);
    try {
      SymBand k = out.kuu;
      if (jitter > 0.0) {
        for (std::size_t i = 0; i < k.dim(); ++i) k.at(i, i) += jitter;
      }
      LowerBand lk = chol(k);
      LowerBand lm = chol(band_axpby(1.0, k, inv_noise, stats.a));
      out.chol_kuu = std::move(lk);
      out.chol_mb = std::move(lm);
      out.jitter = jitter;
      return out;
    } catch (const NotPositiveDefinite& e) {
      last_pivot = e.pivot();
    }
  }
  throw NotPositiveDefinite("K_uu or M_b not positive definite after the jitter ladder", last_pivot);
}

/// Collapsed bound, evaluated through banded operations in O(M w^2):
///   L = -1/2 [N log 2pi + N log s2 + log|M_b| - log|K_uu| + c/s2 - b^T M_b^{-1} b / s2^2]
///       - (N kappa - tr(K_uu^{-1} A)) / (2 s2).
inline double collapsed_elbo(const Features& f, const Stats& stats, const MaternHyper& h) {
  const Factorization fac = factorize(f, stats, h);
  const double s2 = h.noise();
  const double n = static_cast<double>(stats.n);
  const auto v = chol_solve(fac.chol_mb, stats.b);
  double quad = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) quad += stats.b[i] * v[i];
  const double trace = band_trace_product(inverse_band_subset(fac.chol_kuu), stats.a);
  const double fit = n * std::log(2.0 * std::numbers::pi) + n * std::log(s2) + logdet_from_chol(fac.chol_mb) -
                     logdet_from_chol(fac.chol_kuu) + stats.c / s2 - quad / (s2 * s2);
  return -0.5 * fit - (n * h.prior_variance() - trace) / (2.0 * s2);
}

/// Central-difference gradient of collapsed_elbo over MaternHyper::pack().
inline std::vector<double> elbo_gradient(const Features& f, const Stats& stats, const MaternHyper& h,
                                         double step = 1e-4) {
  auto theta = h.pack();
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double t0 = theta[i];
    theta[i] = t0 + step;
    const double up = collapsed_elbo(f, stats, h.unpacked(theta));
    theta[i] = t0 - step;
    const double down = collapsed_elbo(f, stats, h.unpacked(theta));
    theta[i] = t0;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// A finalized model: factors, optimal q(u) in vhat form, and cached in-band
/// inverses for prediction.
struct FitResult {
  Features features;
  Stats stats;
  MaternHyper hyper;
  InputTransform transform;
  SymBand kuu;
  LowerBand chol_kuu;
  LowerBand chol_mb;
  std::vector<double> vhat;  // M_b^{-1} b
  SymBand kuu_inverse;       // in-band entries of (K_uu + jitter I)^{-1}
  SymBand mb_inverse;        // in-band entries of M_b^{-1}
  double jitter = 0.0;

  /// Optimal variational mean m = K_uu M_b^{-1} b / noise.
  std::vector<double> optimal_mean() const {
    std::vector<double> m(vhat.size(), 0.0);
    const double inv = 1.0 / hyper.noise();
    for (std::size_t i = 0; i < kuu.dim(); ++i) {
      for (std::size_t j = kuu.first_col(i); j <= i; ++j) {
        const double kij = kuu(i, j) + (i == j ? jitter : 0.0);
        m[i] += kij * vhat[j] * inv;
        if (i != j) m[j] += kij * vhat[i] * inv;
      }
    }
    return m;
  }
};

inline FitResult finalize(const Features& f, const Stats& stats, const MaternHyper& h,
                          InputTransform transform = {}) {
  check_hyper(f, h);
  if (transform.dims() == 0) transform = InputTransform::identity(f.space.input_dims());
  Factorization fac = factorize(f, stats, h);
  auto vhat = chol_solve(fac.chol_mb, stats.b);
  auto kinv = inverse_band_subset(fac.chol_kuu);
  auto minv = inverse_band_subset(fac.chol_mb);
  return FitResult{f,
                   stats,
                   h,
                   std::move(transform),
                   std::move(fac.kuu),
                   std::move(fac.chol_kuu),
                   std::move(fac.chol_mb),
                   std::move(vhat),
                   std::move(kinv),
                   std::move(minv),
                   fac.jitter};
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline double band_quadratic(const SymBand& s, const FeatureRow& row) {
  double q = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    q += row.value[a] * row.value[a] * s(row.index[a], row.index[a]);
    for (std::size_t b = 0; b < a; ++b) q += 2.0 * row.value[a] * row.value[b] * s(row.index[a], row.index[b]);
  }
  return q;
}

}  // namespace detail

/// Marginal prediction at one input already mapped to the feature coordinates.
///
/// mean = phi^T M_b^{-1} b / noise, var = kappa - phi^T K_uu^{-1} phi + phi^T M_b^{-1} phi.
/// The quadratic forms only touch index pairs inside the band, where the cached
/// inverse entries are exact.
inline Prediction predict_normalized(const FitResult& fit, const double* x, FeatureRow& scratch) {
  feature_row(fit.features.space, x, scratch);
  Prediction p;
  double m = 0.0;
  for (std::size_t a = 0; a < scratch.size(); ++a) m += scratch.value[a] * fit.vhat[scratch.index[a]];
  p.mean = m / fit.hyper.noise();
  p.variance = fit.hyper.prior_variance() - detail::band_quadratic(fit.kuu_inverse, scratch) +
               detail::band_quadratic(fit.mb_inverse, scratch);
  return p;
}

/// Prediction at a raw input (dims values), applying the stored transform.
inline Prediction predict_point(const FitResult& fit, std::span<const double> x) {
  const std::size_t d = fit.features.space.input_dims();
  if (x.size() != d) throw DimensionMismatch("query has the wrong number of columns");
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(x[i])) throw InvalidData("non-finite query value");
    z[i] = fit.transform.apply(i, x[i]);
  }
  FeatureRow scratch;
  return predict_normalized(fit, z.data(), scratch);
}

struct Predictions {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Row-major raw queries, dims columns.
inline Predictions predict(const FitResult& fit, std::span<const double> x) {
  const std::size_t d = fit.features.space.input_dims();
  if (x.size() % d != 0) throw DimensionMismatch("query buffer is not a whole number of rows");
  const std::size_t n = x.size() / d;
  Predictions out;
  out.mean.resize(n);
  out.variance.resize(n);
  FeatureRow scratch;
  std::vector<double> z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double v = x[r * d + i];
      if (!std::isfinite(v)) throw InvalidData("non-finite query value", r);
      z[i] = fit.transform.apply(i, v);
    }
    const auto p = predict_normalized(fit, z.data(), scratch);
    out.mean[r] = p.mean;
    out.variance[r] = p.variance;
  }
  return out;
}

struct Metrics {
  double mse = 0.0;
  double nlpd = 0.0;
};

/// MSE and Gaussian NLPD with predictive density N(y | mean, var + noise).
inline Metrics metrics(std::span<const double> y, std::span<const double> mean, std::span<const double> variance,
                       double noise) {
  if (y.size() != mean.size() || y.size() != variance.size()) throw DimensionMismatch("metric inputs differ in length");
  Metrics m;
  if (y.empty()) return m;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - mean[i];
    const double s = std::max(variance[i], 1e-12) + noise;
    m.mse += r * r;
    m.nlpd += 0.5 * (std::log(2.0 * std::numbers::pi * s) + r * r / s);
  }
  m.mse /= static_cast<double>(y.size());
  m.nlpd /= static_cast<double>(y.size());
  return m;
}

struct InvariantReport {
  double reconstruction_error = 0.0;  // max |L L^T - M_b| / max |M_b|
  double residual = 0.0;              // ||M_b vhat - b|| / ||b||
};

/// Checks that chol_mb reproduces K_uu + jitter I + A / noise and that vhat solves it.
inline InvariantReport check_invariants(const FitResult& fit) {
  SymBand kj = fit.kuu;
  for (std::size_t i = 0; i < kj.dim(); ++i) kj.at(i, i) += fit.jitter;
  const SymBand mb = band_axpby(1.0, kj, 1.0 / fit.hyper.noise(), fit.stats.a);
  const SymBand rec = reconstruct(fit.chol_mb);
  InvariantReport r;
  double scale = 0.0;
  for (std::size_t i = 0; i < mb.dim(); ++i) {
    for (std::size_t j = mb.first_col(i); j <= i; ++j) {
      scale = std::max(scale, std::abs(mb(i, j)));
      r.reconstruction_error = std::max(r.reconstruction_error, std::abs(mb(i, j) - rec(i, j)));
    }
  }
  if (scale > 0.0) r.reconstruction_error /= scale;
  double res2 = 0.0;
  double b2 = 0.0;
  for (std::size_t i = 0; i < mb.dim(); ++i) {
    double acc = 0.0;
    for (std::size_t j = mb.first_col(i); j < std::min(mb.dim(), i + mb.width()); ++j) acc += mb.get(i, j) * fit.vhat[j];
    res2 += (acc - fit.stats.b[i]) * (acc - fit.stats.b[i]);
    b2 += fit.stats.b[i] * fit.stats.b[i];
  }
  r.residual = b2 > 0.0 ? std::sqrt(res2 / b2) : std::sqrt(res2);
  return r;
}

}  // namespace asvgp
