#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asvgp {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

class InvalidDomain : public Error {
 public:
  using Error::Error;
};

class InvalidOrder : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Bad input data. `index()` is the offending row when one can be named.
class InvalidData : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit InvalidData(const std::string& what, std::size_t index = npos)
      : Error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Cholesky hit a non-positive (or non-finite) pivot.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, std::size_t pivot)
      : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

}  // namespace asvgp
