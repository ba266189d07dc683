#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "asvgp/banded.hpp"
#include "asvgp/error.hpp"
#include "asvgp/splines.hpp"

namespace asvgp {

enum class Family { matern12, matern32 };

/// Spline order whose span lies in the RKHS of the family with minimal bandwidth.
constexpr int spline_order(Family f) noexcept { return f == Family::matern12 ? 1 : 2; }

inline std::string to_string(Family f) { return f == Family::matern12 ? "matern12" : "matern32"; }

inline Family family_from_string(const std::string& s) {
  if (s == "matern12") return Family::matern12;
  if (s == "matern32") return Family::matern32;
  throw InvalidConfiguration("unknown kernel family '" + s + "'");
}

/// Hyperparameter-free pieces of the Matern RKHS Gram matrix of a spline basis.
///
/// Integrals run over the basis domain [a, b]; boundary pieces use the values
/// at a and b. `mixed_boundary` holds (f g' + f' g)(b) - (f g' + f' g)(a).
struct GramComponents {
  Family family = Family::matern12;
  SymBand p0;              // int f g
  SymBand p1;              // int f' g'
  SymBand p2;              // int f'' g''       (matern32)
  SymBand boundary0;       // f g at a and b
  SymBand boundary1;       // f' g' at a and b  (matern32)
  SymBand mixed_boundary;  //                   (matern32)

  std::size_t dim() const noexcept { return p0.dim(); }
  std::size_t width() const noexcept { return p0.width(); }
};

namespace detail {

struct GaussRule {
  std::array<double, 5> nodes{};
  std::array<double, 5> weights{};
  int size = 0;
};

/// Gauss-Legendre nodes on [-1, 1]; exact for polynomials of degree 2n-1.
inline GaussRule gauss_legendre(int n) {
  GaussRule g;
  g.size = n;
  switch (n) {
    case 1:
      g.nodes = {0.0};
      g.weights = {2.0};
      break;
    case 2: {
      const double x = 1.0 / std::sqrt(3.0);
      g.nodes = {-x, x};
      g.weights = {1.0, 1.0};
      break;
    }
    case 3: {
      const double x = std::sqrt(3.0 / 5.0);
      g.nodes = {-x, 0.0, x};
      g.weights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      g.nodes = {-b, -a, a, b};
      g.weights = {wb, wa, wa, wb};
      break;
    }
    case 5: {
      const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      g.nodes = {-b, -a, 0.0, a, b};
      g.weights = {wb, wa, 128.0 / 225.0, wa, wb};
      break;
    }
    default:
      throw InvalidConfiguration("Gauss-Legendre rule supports 1..5 nodes");
  }
  return g;
}

/// One term c * l^power * component of the Gram linear combination.
struct GramTerm {
  double coef;
  int power;
  const SymBand* component;
};

inline std::vector<GramTerm> gram_terms(const GramComponents& c) {
  if (c.family == Family::matern12) {
    return {{0.5, 1, &c.p1}, {0.5, -1, &c.p0}, {0.5, 0, &c.boundary0}};
  }
  const double r3 = std::sqrt(3.0);
  return {{1.0 / (12.0 * r3), 3, &c.p2},     {1.0 / (2.0 * r3), 1, &c.p1},
          {r3 / 4.0, -1, &c.p0},             {0.5, 0, &c.boundary0},
          {1.0 / 6.0, 2, &c.boundary1},      {1.0 / (4.0 * r3), 1, &c.mixed_boundary}};
}

}  // namespace detail

/// Builds the Gram components of `basis` for `family` by per-interval
/// Gauss-Legendre quadrature with k+2 nodes (exact for these integrands).
inline GramComponents gram_components(const SplineBasis& basis, Family family) {
  const int k = basis.order();
  if (k != spline_order(family)) {
    throw InvalidConfiguration("spline order " + std::to_string(k) + " does not match " + to_string(family));
  }
  const std::size_t m = basis.num_basis();
  const std::size_t w = static_cast<std::size_t>(k) + 1;
  const int max_r = family == Family::matern12 ? 1 : 2;

  GramComponents g;
  g.family = family;
  std::array<SymBand*, 3> integrals = {&g.p0, &g.p1, &g.p2};
  for (int r = 0; r <= 2; ++r) *integrals[r] = SymBand(m, r <= max_r ? w : 1);
  g.boundary0 = SymBand(m, w);
  g.boundary1 = SymBand(m, family == Family::matern32 ? w : 1);
  g.mixed_boundary = SymBand(m, family == Family::matern32 ? w : 1);

  const auto rule = detail::gauss_legendre(k + 2);
  for (long j = k; j < static_cast<long>(m); ++j) {
    const double lo = basis.knot(j);
    const double hi = basis.knot(j + 1);
    const double mid = 0.5 * (lo + hi);
    const double scale = 0.5 * (hi - lo);
    const std::size_t first = static_cast<std::size_t>(j - k);
    for (int q = 0; q < rule.size; ++q) {
      const double x = mid + scale * rule.nodes[q];
      const double wq = scale * rule.weights[q];
      for (int r = 0; r <= max_r; ++r) {
        const auto d = basis.local_derivatives(j, x, r);
        SymBand& target = *integrals[r];
        for (int s = 0; s <= k; ++s) {
          for (int t = 0; t <= s; ++t) target.at(first + s, first + t) += wq * d[s] * d[t];
        }
      }
    }
  }

  const auto add_outer = [](SymBand& target, const ActiveSet& u, const ActiveSet& v, double sign) {
    for (std::size_t s = 0; s < u.count; ++s) {
      for (std::size_t t = 0; t <= s; ++t) {
        target.at(u.first + s, u.first + t) += sign * (u.values[s] * v.values[t] + u.values[t] * v.values[s]) * 0.5;
      }
    }
  };
  for (double x : {basis.lower(), basis.upper()}) {
    const auto f = basis.active_at(x);
    add_outer(g.boundary0, f, f, 1.0);
    if (family == Family::matern32) {
      const auto df = basis.active_derivatives_at(x, 1);
      add_outer(g.boundary1, df, df, 1.0);
      // (f g' + f' g) summed over the pair = 2 * symmetrised f g'.
      add_outer(g.mixed_boundary, f, df, x == basis.upper() ? 2.0 : -2.0);
    }
  }
  return g;
}

/// K_uu = (1/variance) * sum_t c_t l^{p_t} component_t, width k+1.
inline SymBand assemble_kuu(const GramComponents& comp, double lengthscale, double variance) {
  SymBand k(comp.dim(), comp.width());
  for (const auto& term : detail::gram_terms(comp)) {
    const double c = term.coef * std::pow(lengthscale, term.power) / variance;
    const SymBand& src = *term.component;
    for (std::size_t i = 0; i < k.dim(); ++i) {
      for (std::size_t j = src.first_col(i); j <= i; ++j) k.at(i, j) += c * src(i, j);
    }
  }
  return k;
}

struct KuuGradient {
  SymBand d_log_lengthscale;
  SymBand d_log_variance;
};

inline KuuGradient assemble_kuu_grad(const GramComponents& comp, double lengthscale, double variance) {
  KuuGradient g{SymBand(comp.dim(), comp.width()), SymBand(comp.dim(), comp.width())};
  for (const auto& term : detail::gram_terms(comp)) {
    const double c = term.coef * std::pow(lengthscale, term.power) / variance;
    const SymBand& src = *term.component;
    for (std::size_t i = 0; i < comp.dim(); ++i) {
      for (std::size_t j = src.first_col(i); j <= i; ++j) {
        g.d_log_lengthscale.at(i, j) += term.power * c * src(i, j);
        g.d_log_variance.at(i, j) -= c * src(i, j);
      }
    }
  }
  return g;
}

}  // namespace asvgp
