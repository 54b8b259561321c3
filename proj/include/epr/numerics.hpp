#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epr/error.hpp"

namespace epr {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Shared numerical policy. rank_tol is relative and decides when a singular
/// value or eigenvalue counts as zero; residual_tol is the absolute bound on
/// verification residuals after scaling to unit norm.
struct Tolerance {
  double rank_tol = 1e-9;
  double residual_tol = 1e-8;

  void validate() const;

  /// Process-wide defaults used when callers do not pass a tolerance.
  static Tolerance global();
  static void set_global(const Tolerance& tol);
};

// ---------------------------------------------------------------------------
// Small helpers

double hs_norm(const Matrix& x);
/// Hilbert-Schmidt inner product tr(X* Y).
Complex hs_inner(const Matrix& x, const Matrix& y);
Matrix identity(std::size_t dim);
Matrix kron(const Matrix& a, const Matrix& b);
Matrix commutator(const Matrix& a, const Matrix& b);
/// Column-stacking vectorization and its inverse.
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols);
/// Orthogonal projector onto the span of orthonormal columns.
Matrix projector(const Matrix& orthonormal_columns);
bool is_hermitian(const Matrix& h, double residual_tol);

/// Throws DimensionMismatch unless x is square of the given size.
void require_square(const Matrix& x, std::size_t dim, const char* what);

// ---------------------------------------------------------------------------
// Dense factorizations

struct EigenDecomposition {
  RealVector values;  // ascending
  Matrix vectors;     // unitary, columns are eigenvectors
};

EigenDecomposition hermitian_eig(const Matrix& h, const Tolerance& tol = Tolerance::global());

/// Applies f to the spectrum of a Hermitian matrix.
template <typename F>
Matrix spectral_apply(const EigenDecomposition& eig, F&& f) {
  RealVector mapped(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) mapped(i) = f(eig.values(i));
  return eig.vectors * mapped.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
}

/// SVD-backed rank decisions and minimum-norm least squares. Tall systems are
/// first reduced by a Householder QR so that the SVD only sees an n x n factor.
/// A singular value counts as zero when it is at most rank_tol * max(sigma_max, scale).
class LeastSquares {
 public:
  LeastSquares(const Matrix& m, double rank_tol, double scale = 1.0);

  std::size_t rank() const { return rank_; }
  std::size_t cols() const { return cols_; }
  const RealVector& singular_values() const { return sigma_; }
  /// Orthonormal basis of the numerical null space (cols() - rank() columns).
  Matrix null_space() const;
  /// Minimum-norm least-squares solution.
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

 private:
  Matrix reduce_rhs(const Matrix& rhs) const;

  std::size_t rows_;
  std::size_t cols_;
  bool reduced_;
  Eigen::HouseholderQR<Matrix> qr_;
  Matrix u_;
  Matrix v_;
  RealVector sigma_;
  std::size_t rank_ = 0;
};

/// Orthonormal basis of the column space.
/// Singular value decomposition M = U diag(s) V*, s descending.
struct SvdResult {
  Matrix u;
  RealVector s;
  Matrix v;
};
/// Divide-and-conquer SVD with a reconstruction check; falls back to one-sided
/// Jacobi when the fast path loses accuracy (seen on clustered spectra).
SvdResult svd(const Matrix& m, bool full_u = false, bool full_v = false);

Matrix range_basis(const Matrix& m, double rank_tol, double scale = 1.0);
std::size_t numerical_rank(const Matrix& m, double rank_tol, double scale = 1.0);

/// Incremental Gram-Schmidt over matrices (two passes per candidate) in the
/// Hilbert-Schmidt inner product. Candidates whose residual after projection
/// is at most `threshold` are absorbed.
class SpanAccumulator {
 public:
  SpanAccumulator(std::size_t rows, std::size_t cols, double threshold);

  bool add(const Matrix& candidate);
  std::size_t size() const { return count_; }
  std::vector<Matrix> basis() const;
  /// Vectorized basis, one column per element.
  Matrix stacked() const { return q_.leftCols(count_); }

 private:
  std::size_t rows_;
  std::size_t cols_;
  double threshold_;
  Matrix q_;
  std::size_t count_ = 0;
};

/// Orthonormal basis (Hilbert-Schmidt) of the linear span of the family.
std::vector<Matrix> orthonormal_span(std::span<const Matrix> family,
                                     const Tolerance& tol = Tolerance::global());

/// Orthonormalizes `primary` and applies the same linear recombination to
/// `companion`, so that pairs (X_i, Y_i) related by a linear map stay related.
struct PairedBasis {
  std::vector<Matrix> primary;
  std::vector<Matrix> companion;
};
PairedBasis orthonormalize_pairs(const std::vector<Matrix>& primary,
                                 const std::vector<Matrix>& companion, const Tolerance& tol);

/// Returns a description of the first violated density-matrix condition
/// (hermiticity, positivity, trace), or nothing when rho is a valid state.
std::optional<std::string> density_defect(const Matrix& rho, const Tolerance& tol);

// ---------------------------------------------------------------------------
// Antilinear operators

/// Conjugate-linear map x -> M conj(x) in the computational basis. Only the
/// kernel matrix M is stored; it may be rectangular.
class AntilinearOperator {
 public:
  explicit AntilinearOperator(Matrix kernel) : kernel_(std::move(kernel)) {}

  /// Entrywise complex conjugation on C^dim.
  static AntilinearOperator conjugation(std::size_t dim);

  const Matrix& kernel() const { return kernel_; }
  std::size_t rows() const { return static_cast<std::size_t>(kernel_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(kernel_.cols()); }

  Vector apply(const Vector& x) const { return kernel_ * x.conjugate(); }
  Vector operator()(const Vector& x) const { return apply(x); }

  /// Adjoint fixed by <x, S* y> = <y, S x>; its kernel is the transpose.
  AntilinearOperator adjoint() const { return AntilinearOperator(kernel_.transpose()); }

  /// Composition of two antilinear maps is linear: (this o other).
  Matrix compose(const AntilinearOperator& other) const {
    return kernel_ * other.kernel_.conjugate();
  }
  /// this o L for a linear L.
  AntilinearOperator after(const Matrix& linear) const {
    return AntilinearOperator(kernel_ * linear.conjugate());
  }
  /// L o this for a linear L.
  AntilinearOperator before(const Matrix& linear) const {
    return AntilinearOperator(linear * kernel_);
  }
  /// The linear operator this o X o this, for an antilinear `this`.
  Matrix sandwich(const Matrix& x) const {
    return kernel_ * x.conjugate() * kernel_.conjugate();
  }

 private:
  Matrix kernel_;
};

struct AntilinearPolar {
  AntilinearOperator J;
  Matrix delta;
};

/// Polar decomposition S = J o Delta^{1/2} with Delta = S* S.
AntilinearPolar antilinear_polar(const AntilinearOperator& s,
                                 const Tolerance& tol = Tolerance::global());

}  // namespace epr
