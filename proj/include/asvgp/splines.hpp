#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asvgp/error.hpp"

namespace asvgp {

inline constexpr int kMaxSplineOrder = 3;

/// Nonzero values of the basis at one point: indices first .. first+count-1.
struct ActiveSet {
  std::size_t first = 0;
  std::size_t count = 0;
  std::array<double, kMaxSplineOrder + 1> values{};

  std::span<const double> span() const { return {values.data(), count}; }
  bool empty() const { return count == 0; }
};

/// Uniform B-spline basis of order k on [a, b].
///
/// The knot vector runs k intervals past each end of the domain, so the
/// M = n_intervals + k basis functions form a partition of unity on all of
/// [a, b]. Knot j sits at a + (j - k) h for j = 0 .. M + k. Basis m is
/// supported on [v_m, v_{m+k+1}].
///
/// Knot intervals are half-open [v_j, v_{j+1}); the point x = b (and the last
/// knot) belongs to the interval on its left, so every x in [a, b] lies in
/// exactly one interval.
class SplineBasis {
 public:
  SplineBasis(double a, double b, std::size_t num_basis, int order)
      : a_(a), b_(b), num_basis_(num_basis), order_(order) {
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
      throw InvalidDomain("spline domain must satisfy a < b");
    }
    if (order < 0 || order > kMaxSplineOrder) {
      throw InvalidConfiguration("spline order must lie in [0, 3]");
    }
    if (num_basis <= static_cast<std::size_t>(order)) {
      throw InvalidConfiguration("number of basis functions must exceed the order");
    }
    intervals_ = num_basis - static_cast<std::size_t>(order);
    h_ = (b - a) / static_cast<double>(intervals_);
  }

  int order() const noexcept { return order_; }
  std::size_t num_basis() const noexcept { return num_basis_; }
  std::size_t num_intervals() const noexcept { return intervals_; }
  std::size_t num_knots() const noexcept { return num_basis_ + order_ + 1; }
  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }
  double spacing() const noexcept { return h_; }

  /// Knot position for any integer index; indices outside 0 .. M+k continue
  /// the uniform grid.
  double knot(long j) const noexcept {
    const long offset = j - order_;
    if (offset == 0) return a_;
    if (offset == static_cast<long>(intervals_)) return b_;
    return a_ + (b_ - a_) * (static_cast<double>(offset) / static_cast<double>(intervals_));
  }

  std::vector<double> knots() const {
    std::vector<double> v(num_knots());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = knot(static_cast<long>(j));
    return v;
  }

  bool contains(double x) const noexcept { return x >= a_ && x <= b_; }

  /// Index j of the knot interval holding x, or -1 outside [v_0, v_{M+k}].
  long interval_of(double x) const noexcept {
    const long last = static_cast<long>(num_basis_) + order_ - 1;
    if (!(x >= knot(0)) || !(x <= knot(last + 1))) return -1;
    if (x == b_) return static_cast<long>(num_basis_) - 1;
    if (x == knot(last + 1)) return last;
    long j = static_cast<long>(std::floor((x - a_) / h_)) + order_;
    if (j < 0) j = 0;
    if (j > last) j = last;
    while (j > 0 && x < knot(j)) --j;
    while (j < last && x >= knot(j + 1)) ++j;
    return j;
  }

  /// r-th derivatives of the order-k functions j-k .. j, evaluated with the
  /// polynomial pieces of knot interval j. Index i of the result is basis
  /// j - k + i (which is negative or >= M for some intervals in the overhang).
  std::array<double, kMaxSplineOrder + 1> local_derivatives(long j, double x, int r) const {
    if (r < 0 || r > order_) throw InvalidOrder("derivative order exceeds spline order");
    const int p = order_ - r;
    std::array<double, kMaxSplineOrder + 1> n{};
    std::array<double, kMaxSplineOrder + 1> left{};
    std::array<double, kMaxSplineOrder + 1> right{};
    // Cox-de Boor triangle for the order-p functions j-p .. j.
    n[0] = 1.0;
    for (int d = 1; d <= p; ++d) {
      left[d] = x - knot(j + 1 - d);
      right[d] = knot(j + d) - x;
      double saved = 0.0;
      for (int s = 0; s < d; ++s) {
        const double temp = n[s] / (right[s + 1] + left[d - s]);
        n[s] = saved + right[s + 1] * temp;
        saved = left[d - s] * temp;
      }
      n[d] = saved;
    }
    // Lift to order k, one derivative per level:
    //   d/dx B_{m,q} = q/(v_{m+q}-v_m) B_{m,q-1} - q/(v_{m+q+1}-v_{m+1}) B_{m+1,q-1}.
    for (int q = p + 1; q <= order_; ++q) {
      std::array<double, kMaxSplineOrder + 1> next{};
      for (int s = 0; s <= q; ++s) {
        const long m = j - q + s;
        double value = 0.0;
        if (s >= 1) value += q / (knot(m + q) - knot(m)) * n[s - 1];
        if (s <= q - 1) value -= q / (knot(m + q + 1) - knot(m + 1)) * n[s];
        next[s] = value;
      }
      n = next;
    }
    return n;
  }

  /// B_{m,k}(x); exactly zero outside [v_m, v_{m+k+1}].
  double eval(std::size_t m, double x) const { return eval_derivative(m, x, 0); }

  /// r-th (weak, for r = k) derivative of B_{m,k} at x.
  double eval_derivative(std::size_t m, double x, int r) const {
    if (r < 0 || r > order_) throw InvalidOrder("derivative order exceeds spline order");
    if (m >= num_basis_) return 0.0;
    const long mi = static_cast<long>(m);
    if (!(x >= knot(mi)) || !(x <= knot(mi + order_ + 1))) return 0.0;
    const long j = interval_of(x);
    if (j < 0 || mi < j - order_ || mi > j) return 0.0;
    return local_derivatives(j, x, r)[static_cast<std::size_t>(mi - (j - order_))];
  }

  /// The k+1 basis functions active at x in [a, b]; empty outside the domain.
  ActiveSet active_at(double x) const { return active_derivatives_at(x, 0); }

  ActiveSet active_derivatives_at(double x, int r) const {
    ActiveSet out;
    if (!contains(x)) return out;
    const long j = interval_of(x);
    out.first = static_cast<std::size_t>(j - order_);
    out.count = static_cast<std::size_t>(order_ + 1);
    out.values = local_derivatives(j, x, r);
    return out;
  }

  bool operator==(const SplineBasis& other) const noexcept {
    return a_ == other.a_ && b_ == other.b_ && num_basis_ == other.num_basis_ &&
           order_ == other.order_;
  }

  std::string fingerprint() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "bspline(k=%d,M=%zu,[%.17g,%.17g])", order_, num_basis_, a_, b_);
    return buf;
  }

 private:
  double a_;
  double b_;
  std::size_t num_basis_;
  int order_;
  std::size_t intervals_ = 0;
  double h_ = 0.0;
};

inline SplineBasis make_uniform_basis(double a, double b, std::size_t num_basis, int order) {
  return SplineBasis(a, b, num_basis, order);
}

}  // namespace asvgp
