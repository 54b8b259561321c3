#pragma once

#include <cstdint>
#include <random>

#include "epr/numerics.hpp"

namespace epr {

/// Seeded source of random test and scenario data. Identical seeds give
/// identical streams on a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t next() { return engine_(); }

  Matrix ginibre(std::size_t rows, std::size_t cols);
  Vector gaussian_vector(std::size_t n);
  Matrix hermitian(std::size_t dim);
  Matrix haar_unitary(std::size_t dim);
  /// Haar-random unit vector in C^dim.
  Vector unit_vector(std::size_t dim);
  /// Random real combination of the given matrices.
  Matrix real_combination(std::span<const Matrix> terms);
  Matrix complex_combination(std::span<const Matrix> terms);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace epr
