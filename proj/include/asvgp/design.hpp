#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstddef>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "asvgp/banded.hpp"
#include "asvgp/error.hpp"
#include "asvgp/splines.hpp"

namespace asvgp {

enum class Structure { one_d, separable_2d, additive };

inline std::string to_string(Structure s) {
  switch (s) {
    case Structure::one_d: return "1d";
    case Structure::separable_2d: return "separable2d";
    case Structure::additive: return "additive";
  }
  return "?";
}

inline Structure structure_from_string(const std::string& s) {
  if (s == "1d") return Structure::one_d;
  if (s == "separable2d") return Structure::separable_2d;
  if (s == "additive") return Structure::additive;
  throw InvalidConfiguration("unknown structure '" + s + "'");
}

/// One column of K_uf for a 1D basis: contiguous nonzeros starting at first_index.
using SparseRow = ActiveSet;

inline SparseRow design_row(const SplineBasis& basis, double x) { return basis.active_at(x); }

/// Row-major inputs (size() rows of dims() columns) with matching targets.
struct DataView {
  std::span<const double> x;
  std::size_t dims = 1;
  std::span<const double> y;

  std::size_t size() const noexcept { return y.size(); }
  double input(std::size_t n, std::size_t d) const noexcept { return x[n * dims + d]; }
};

/// Per-dimension affine map x -> (x - offset) * scale onto [0, upper].
///
/// Values within a relative 1e-12 of the target range snap onto its ends so
/// the extreme training inputs never round out of the basis domain.
struct InputTransform {
  std::vector<double> offset;
  std::vector<double> scale;
  std::vector<double> upper;

  std::size_t dims() const noexcept { return offset.size(); }

  static InputTransform identity(std::size_t dims) {
    return {std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0), std::vector<double>(dims, 0.0)};
  }

  double apply(std::size_t d, double x) const noexcept {
    double t = (x - offset[d]) * scale[d];
    if (upper[d] > 0.0) {
      const double tol = 1e-12 * upper[d];
      if (t < 0.0 && t > -tol) t = 0.0;
      if (t > upper[d] && t < upper[d] + tol) t = upper[d];
    }
    return t;
  }

  bool operator==(const InputTransform&) const = default;
};

/// The inducing-feature layout: one basis (1D), a tensor product of two
/// (separable), or a concatenation of D (additive). All bases share one order.
class FeatureSpace {
 public:
  FeatureSpace(Structure structure, std::vector<SplineBasis> bases)
      : structure_(structure), bases_(std::move(bases)) {
    if (bases_.empty()) throw InvalidConfiguration("feature space needs at least one basis");
    if (structure_ == Structure::one_d && bases_.size() != 1) {
      throw InvalidConfiguration("1d structure takes exactly one basis");
    }
    if (structure_ == Structure::separable_2d && bases_.size() != 2) {
      throw InvalidConfiguration("separable structure supports exactly two dimensions");
    }
    for (const auto& b : bases_) {
      if (b.order() != bases_.front().order()) throw InvalidConfiguration("all bases must share one spline order");
    }
    offsets_.resize(bases_.size(), 0);
    for (std::size_t d = 1; d < bases_.size(); ++d) offsets_[d] = offsets_[d - 1] + bases_[d - 1].num_basis();
  }

  static FeatureSpace one_d(SplineBasis b) { return FeatureSpace(Structure::one_d, {std::move(b)}); }

  Structure structure() const noexcept { return structure_; }
  const std::vector<SplineBasis>& bases() const noexcept { return bases_; }
  const SplineBasis& basis(std::size_t d = 0) const { return bases_.at(d); }
  std::size_t input_dims() const noexcept { return bases_.size(); }
  int order() const noexcept { return bases_.front().order(); }
  std::size_t block_offset(std::size_t d) const { return offsets_.at(d); }

  std::size_t num_features() const noexcept {
    switch (structure_) {
      case Structure::one_d: return bases_[0].num_basis();
      case Structure::separable_2d: return bases_[0].num_basis() * bases_[1].num_basis();
      case Structure::additive: return offsets_.back() + bases_.back().num_basis();
    }
    return 0;
  }

  /// Width of the K_uu band.
  std::size_t kuu_width() const noexcept {
    const std::size_t k = static_cast<std::size_t>(order());
    if (structure_ == Structure::separable_2d) return k * bases_[1].num_basis() + k + 1;
    return k + 1;
  }

  /// Width of the K_uf K_fu band (full for additive).
  std::size_t stats_width() const noexcept {
    if (structure_ == Structure::additive) return num_features();
    return kuu_width();
  }

  std::string fingerprint() const {
    std::string s = to_string(structure_) + ":";
    for (const auto& b : bases_) s += b.fingerprint();
    return s;
  }

  bool operator==(const FeatureSpace& o) const noexcept {
    return structure_ == o.structure_ && bases_ == o.bases_;
  }

 private:
  Structure structure_;
  std::vector<SplineBasis> bases_;
  std::vector<std::size_t> offsets_;
};

/// Sparse feature vector phi(x): parallel (index, value) lists, indices ascending.
struct FeatureRow {
  std::vector<std::size_t> index;
  std::vector<double> value;

  void clear() noexcept {
    index.clear();
    value.clear();
  }
  std::size_t size() const noexcept { return index.size(); }
};

/// phi(x) for normalized input coordinates x[0 .. dims).
inline void feature_row(const FeatureSpace& space, const double* x, FeatureRow& out) {
  out.clear();
  switch (space.structure()) {
    case Structure::one_d: {
      const auto a = space.basis(0).active_at(x[0]);
      for (std::size_t s = 0; s < a.count; ++s) {
        out.index.push_back(a.first + s);
        out.value.push_back(a.values[s]);
      }
      break;
    }
    case Structure::separable_2d: {
      const auto a = space.basis(0).active_at(x[0]);
      const auto b = space.basis(1).active_at(x[1]);
      const std::size_t m2 = space.basis(1).num_basis();
      for (std::size_t s = 0; s < a.count; ++s) {
        for (std::size_t t = 0; t < b.count; ++t) {
          out.index.push_back((a.first + s) * m2 + b.first + t);
          out.value.push_back(a.values[s] * b.values[t]);
        }
      }
      break;
    }
    case Structure::additive: {
      for (std::size_t d = 0; d < space.input_dims(); ++d) {
        const auto a = space.basis(d).active_at(x[d]);
        for (std::size_t s = 0; s < a.count; ++s) {
          out.index.push_back(space.block_offset(d) + a.first + s);
          out.value.push_back(a.values[s]);
        }
      }
      break;
    }
  }
}

/// Sufficient statistics A = K_uf K_fu, b = K_uf y, c = y^T y, n.
struct Stats {
  SymBand a;
  std::vector<double> b;
  double c = 0.0;
  std::size_t n = 0;
  std::string fingerprint;

  static Stats zeros(const FeatureSpace& space) {
    return {SymBand(space.num_features(), space.stats_width()), std::vector<double>(space.num_features(), 0.0), 0.0,
            0, space.fingerprint()};
  }

  Stats& operator+=(const Stats& o) {
    if (o.fingerprint != fingerprint) throw DimensionMismatch("cannot merge statistics from different bases");
    a += o.a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
    c += o.c;
    n += o.n;
    return *this;
  }

  bool operator==(const Stats&) const = default;
};

namespace detail {

inline void check_data(const DataView& data, std::size_t dims) {
  if (data.dims != dims) throw DimensionMismatch("input has the wrong number of columns");
  if (data.x.size() != data.y.size() * dims) throw DimensionMismatch("inputs and targets differ in length");
}

inline void check_finite_row(const DataView& data, std::size_t n) {
  for (std::size_t d = 0; d < data.dims; ++d) {
    if (!std::isfinite(data.input(n, d))) throw InvalidData("non-finite input value", n);
  }
  if (!std::isfinite(data.y[n])) throw InvalidData("non-finite target value", n);
}

inline double coord(const DataView& data, const InputTransform* t, std::size_t n, std::size_t d) {
  const double x = data.input(n, d);
  return t ? t->apply(d, x) : x;
}

/// Rank-1 update of A over a contiguous window.
inline void window_update(SymBand& a, std::vector<double>& b, const ActiveSet& row, double y) {
  for (std::size_t s = 0; s < row.count; ++s) {
    const double vs = row.values[s];
    double* arow = a.row(row.first + s);
    const std::size_t lo = a.first_col(row.first + s);
    for (std::size_t t = 0; t <= s; ++t) arow[row.first + t - lo] += vs * row.values[t];
    b[row.first + s] += vs * y;
  }
}

inline void accumulate(const FeatureSpace& space, const DataView& data, const InputTransform* t, std::size_t begin,
                       std::size_t end, Stats& st) {
  switch (space.structure()) {
    case Structure::one_d: {
      const auto& basis = space.basis(0);
      for (std::size_t n = begin; n < end; ++n) {
        check_finite_row(data, n);
        const double y = data.y[n];
        window_update(st.a, st.b, basis.active_at(coord(data, t, n, 0)), y);
        st.c += y * y;
      }
      break;
    }
    case Structure::separable_2d: {
      FeatureRow row;
      double xs[2];
      for (std::size_t n = begin; n < end; ++n) {
        check_finite_row(data, n);
        xs[0] = coord(data, t, n, 0);
        xs[1] = coord(data, t, n, 1);
        feature_row(space, xs, row);
        const double y = data.y[n];
        for (std::size_t s = 0; s < row.size(); ++s) {
          for (std::size_t q = 0; q <= s; ++q) st.a.at(row.index[s], row.index[q]) += row.value[s] * row.value[q];
          st.b[row.index[s]] += row.value[s] * y;
        }
        st.c += y * y;
      }
      break;
    }
    case Structure::additive: {
      FeatureRow row;
      std::vector<double> xs(space.input_dims());
      for (std::size_t n = begin; n < end; ++n) {
        check_finite_row(data, n);
        for (std::size_t d = 0; d < xs.size(); ++d) xs[d] = coord(data, t, n, d);
        feature_row(space, xs.data(), row);
        const double y = data.y[n];
        for (std::size_t s = 0; s < row.size(); ++s) {
          for (std::size_t q = 0; q <= s; ++q) st.a.at(row.index[s], row.index[q]) += row.value[s] * row.value[q];
          st.b[row.index[s]] += row.value[s] * y;
        }
        st.c += y * y;
      }
      break;
    }
  }
  st.n += end - begin;
}

}  // namespace detail

/// One streaming pass over the data. With num_shards > 1 the rows are split
/// into contiguous shards accumulated on separate threads and merged in shard
/// order, so a fixed shard count is deterministic.
inline Stats precompute(const FeatureSpace& space, const DataView& data, const InputTransform* transform = nullptr,
                        std::size_t num_shards = 1) {
  detail::check_data(data, space.input_dims());
  if (transform && transform->dims() != space.input_dims()) throw DimensionMismatch("transform dims differ");
  const std::size_t n = data.size();
  num_shards = std::max<std::size_t>(1, std::min(num_shards, std::max<std::size_t>(1, n)));
  Stats total = Stats::zeros(space);
  if (num_shards == 1) {
    detail::accumulate(space, data, transform, 0, n, total);
    return total;
  }
  std::vector<Stats> parts(num_shards, Stats::zeros(space));
  std::vector<std::exception_ptr> errors(num_shards);
  std::vector<std::thread> workers;
  for (std::size_t s = 0; s < num_shards; ++s) {
    workers.emplace_back([&, s] {
      try {
        detail::accumulate(space, data, transform, n * s / num_shards, n * (s + 1) / num_shards, parts[s]);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& p : parts) total += p;
  return total;
}

inline Stats precompute_stats(const SplineBasis& basis, std::span<const double> x, std::span<const double> y) {
  return precompute(FeatureSpace::one_d(basis), DataView{x, 1, y});
}

/// x holds (x1, x2) pairs row-major.
inline Stats precompute_stats_separable_2d(const SplineBasis& basis_x, const SplineBasis& basis_y,
                                           std::span<const double> x, std::span<const double> y) {
  return precompute(FeatureSpace(Structure::separable_2d, {basis_x, basis_y}), DataView{x, 2, y});
}

/// x holds D = bases.size() columns row-major.
inline Stats precompute_stats_additive(const std::vector<SplineBasis>& bases, std::span<const double> x,
                                       std::span<const double> y) {
  return precompute(FeatureSpace(Structure::additive, bases), DataView{x, bases.size(), y});
}

}  // namespace asvgp
