#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "asvgp/error.hpp"

namespace asvgp {

/// Row-major band storage shared by the symmetric and lower-triangular forms.
///
/// Row i stores the entries (i, i-w+1) .. (i, i) left to right; slots with a
/// negative column are padding and always zero.
class BandStorage {
 public:
  BandStorage() = default;
  BandStorage(std::size_t dim, std::size_t width) : dim_(dim), width_(width), data_(dim * width, 0.0) {
    if (dim > 0 && (width < 1 || width > dim)) {
      throw InvalidConfiguration("band width must lie in [1, dim]");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t width() const noexcept { return width_; }

  /// Lower-triangle entry (i, j) with j <= i; zero outside the band.
  double operator()(std::size_t i, std::size_t j) const noexcept {
    if (j > i || i - j >= width_) return 0.0;
    return data_[i * width_ + (width_ - 1) - (i - j)];
  }

  /// Mutable lower-triangle entry (i, j); requires j <= i and i - j < width.
  double& at(std::size_t i, std::size_t j) noexcept { return data_[i * width_ + (width_ - 1) - (i - j)]; }

  /// Row i starting at column first_col(i).
  double* row(std::size_t i) noexcept { return data_.data() + i * width_ + (width_ - 1) - (i - first_col(i)); }
  const double* row(std::size_t i) const noexcept {
    return data_.data() + i * width_ + (width_ - 1) - (i - first_col(i));
  }

  std::size_t first_col(std::size_t i) const noexcept { return i + 1 >= width_ ? i + 1 - width_ : 0; }

  std::span<double> raw() noexcept { return data_; }
  std::span<const double> raw() const noexcept { return data_; }

  bool operator==(const BandStorage&) const = default;

 protected:
  std::size_t dim_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Symmetric banded matrix; only the lower band is stored.
class SymBand : public BandStorage {
 public:
  using BandStorage::BandStorage;

  static SymBand identity(std::size_t dim) {
    SymBand s(dim, 1);
    for (std::size_t i = 0; i < dim; ++i) s.at(i, i) = 1.0;
    return s;
  }

  /// Symmetric access for any (i, j).
  double get(std::size_t i, std::size_t j) const noexcept { return i >= j ? (*this)(i, j) : (*this)(j, i); }

  /// Adds v to (i, j) and, implicitly, (j, i).
  void add(std::size_t i, std::size_t j, double v) noexcept {
    if (i >= j) at(i, j) += v;
    else at(j, i) += v;
  }

  SymBand& operator+=(const SymBand& other) {
    if (other.dim_ != dim_ || other.width_ != width_) throw DimensionMismatch("band shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  double mean_diagonal() const noexcept {
    if (dim_ == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += (*this)(i, i);
    return s / static_cast<double>(dim_);
  }

  /// Copy with a (possibly larger) width; widening pads with zeros, narrowing drops entries.
  SymBand with_width(std::size_t width) const {
    SymBand out(dim_, width);
    for (std::size_t i = 0; i < dim_; ++i) {
      const std::size_t lo = std::max(first_col(i), out.first_col(i));
      for (std::size_t j = lo; j <= i; ++j) out.at(i, j) = (*this)(i, j);
    }
    return out;
  }
};

/// Lower-triangular banded factor.
class LowerBand : public BandStorage {
 public:
  using BandStorage::BandStorage;
};

/// Banded Cholesky S = L L^T without pivoting, O(M w^2).
inline LowerBand chol(const SymBand& s) {
  const std::size_t n = s.dim();
  const std::size_t w = s.width();
  LowerBand l(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = l.first_col(i);
    double* li = l.row(i);
    const double* si = s.row(i);
    for (std::size_t j = lo; j <= i; ++j) {
      const std::size_t lj0 = l.first_col(j);
      const std::size_t p0 = std::max(lo, lj0);
      const double* lj = l.row(j);
      double acc = si[j - lo];
      for (std::size_t p = p0; p < j; ++p) acc -= li[p - lo] * lj[p - lj0];
      if (j == i) {
        if (!(acc > 0.0) || !std::isfinite(acc)) {
          throw NotPositiveDefinite("banded Cholesky failed", i);
        }
        li[i - lo] = std::sqrt(acc);
      } else {
        li[j - lo] = acc / lj[j - lj0];
      }
    }
  }
  return l;
}

/// Solves L x = v by forward substitution.
inline std::vector<double> solve_lower(const LowerBand& l, std::span<const double> v) {
  if (v.size() != l.dim()) throw DimensionMismatch("solve_lower: vector length differs from matrix dim");
  std::vector<double> x(v.begin(), v.end());
  for (std::size_t i = 0; i < l.dim(); ++i) {
    const std::size_t lo = l.first_col(i);
    const double* li = l.row(i);
    double acc = x[i];
    for (std::size_t p = lo; p < i; ++p) acc -= li[p - lo] * x[p];
    x[i] = acc / li[i - lo];
  }
  return x;
}

/// Solves L^T x = v by backward substitution.
inline std::vector<double> solve_upper(const LowerBand& l, std::span<const double> v) {
  if (v.size() != l.dim()) throw DimensionMismatch("solve_upper: vector length differs from matrix dim");
  std::vector<double> x(v.begin(), v.end());
  for (std::size_t ii = l.dim(); ii-- > 0;) {
    const std::size_t lo = l.first_col(ii);
    const double* li = l.row(ii);
    x[ii] /= li[ii - lo];
    const double xi = x[ii];
    for (std::size_t p = lo; p < ii; ++p) x[p] -= li[p - lo] * xi;
  }
  return x;
}

/// S^{-1} v given L = chol(S).
inline std::vector<double> chol_solve(const LowerBand& l, std::span<const double> v) {
  const auto z = solve_lower(l, v);
  return solve_upper(l, z);
}

inline double logdet_from_chol(const LowerBand& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.dim(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

/// Entries of S^{-1} inside the band of S, from L = chol(S) (Takahashi
/// recurrences). O(M w^2).
///
/// Uses L^T Z = L^{-1}, whose upper triangle reads
///   Z_ij = (delta_ij / L_ii - sum_{p=i+1}^{i+w-1} L_pi Z_pj) / L_ii,  j >= i.
inline SymBand inverse_band_subset(const LowerBand& l) {
  const std::size_t n = l.dim();
  const std::size_t w = l.width();
  SymBand z(n, w);
  for (std::size_t i = n; i-- > 0;) {
    const double lii = l(i, i);
    const std::size_t last = std::min(n - 1, i + w - 1);
    for (std::size_t j = last + 1; j-- > i;) {
      double acc = (i == j) ? 1.0 / lii : 0.0;
      for (std::size_t p = i + 1; p <= last; ++p) acc -= l(p, i) * z.get(p, j);
      z.at(j, i) = acc / lii;
    }
  }
  return z;
}

/// tr(P Q) summed over the narrower of the two bands.
///
/// Exact whenever, outside that band, at least one operand's entries vanish
/// wherever the other is nonzero.
inline double band_trace_product(const SymBand& p, const SymBand& q) {
  if (p.dim() != q.dim()) throw DimensionMismatch("band_trace_product: dims differ");
  const std::size_t w = std::min(p.width(), q.width());
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    diag += p(i, i) * q(i, i);
    const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
    for (std::size_t j = lo; j < i; ++j) off += p(i, j) * q(i, j);
  }
  return diag + 2.0 * off;
}

/// alpha P + beta Q at the wider of the two widths.
inline SymBand band_axpby(double alpha, const SymBand& p, double beta, const SymBand& q) {
  if (p.dim() != q.dim()) throw DimensionMismatch("band_axpby: dims differ");
  const std::size_t w = std::max(p.width(), q.width());
  SymBand out(p.dim(), w);
  for (std::size_t i = 0; i < p.dim(); ++i) {
    for (std::size_t j = out.first_col(i); j <= i; ++j) out.at(i, j) = alpha * p(i, j) + beta * q(i, j);
  }
  return out;
}

inline SymBand scaled(double alpha, const SymBand& p) { return band_axpby(alpha, p, 0.0, p); }

/// In-band entries of L L^T.
inline SymBand reconstruct(const LowerBand& l) {
  SymBand s(l.dim(), l.width());
  for (std::size_t i = 0; i < l.dim(); ++i) {
    for (std::size_t j = l.first_col(i); j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t p = std::max(l.first_col(i), l.first_col(j)); p <= j; ++p) acc += l(i, p) * l(j, p);
      s.at(i, j) = acc;
    }
  }
  return s;
}

}  // namespace asvgp
