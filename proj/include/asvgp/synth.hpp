#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace asvgp::synth {

/// Periodic benchmark function on [0, 1].
inline double test_function(double x) {
  constexpr double pi = std::numbers::pi;
  return std::sin(3.0 * pi * x) + 0.3 * std::cos(9.0 * pi * x) + 0.5 * std::sin(7.0 * pi * x);
}

struct Dataset {
  std::size_t dims = 1;
  std::vector<double> x;  // row-major
  std::vector<double> y;
  std::size_t size() const noexcept { return y.size(); }
};

/// N draws x ~ U[0, 1], y = f(x) + noise_std * eps.
inline Dataset test_function_data(std::size_t n, double noise_std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 1.0);
  Dataset d;
  d.x.resize(n);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.x[i] = u(rng);
    d.y[i] = test_function(d.x[i]) + noise_std * e(rng);
  }
  return d;
}

/// Random split into train and test sets of the given test fraction.
inline void split(const Dataset& all, double test_fraction, std::uint64_t seed, Dataset& train, Dataset& test) {
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(all.size())));
  train = Dataset{all.dims, {}, {}};
  test = Dataset{all.dims, {}, {}};
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Dataset& dst = r < n_test ? test : train;
    const std::size_t i = idx[r];
    for (std::size_t d = 0; d < all.dims; ++d) dst.x.push_back(all.x[i * all.dims + d]);
    dst.y.push_back(all.y[i]);
  }
}

}  // namespace asvgp::synth
