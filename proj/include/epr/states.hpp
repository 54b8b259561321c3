#pragma once

#include <cstddef>

#include "epr/algebra.hpp"
#include "epr/numerics.hpp"

namespace epr {

/// Unit vector on C^{dim_a} (x) C^{dim_b}; amplitude of |i>|j> sits at i*dim_b + j.
class BipartiteState {
 public:
  static BipartiteState from_vector(std::size_t dim_a, std::size_t dim_b, Vector amplitudes,
                                    const Tolerance& tol = Tolerance::global());
  /// The coefficient matrix C with C(i, j) = <i j | psi>, reshaped to a state.
  static BipartiteState from_coefficients(const Matrix& coefficients,
                                          const Tolerance& tol = Tolerance::global());

  std::size_t dim_a() const { return dim_a_; }
  std::size_t dim_b() const { return dim_b_; }
  std::size_t dim() const { return dim_a_ * dim_b_; }
  const Vector& vector() const { return vector_; }
  Matrix coefficient_matrix() const;

 private:
  BipartiteState(std::size_t a, std::size_t b, Vector v) : dim_a_(a), dim_b_(b), vector_(std::move(v)) {}

  std::size_t dim_a_;
  std::size_t dim_b_;
  Vector vector_;
};

/// Hermitian, positive semidefinite, trace one.
class DensityOperator {
 public:
  static DensityOperator from_matrix(Matrix rho, const Tolerance& tol = Tolerance::global());
  static DensityOperator pure(const Vector& psi, const Tolerance& tol = Tolerance::global());

  const Matrix& matrix() const { return matrix_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }

 private:
  explicit DensityOperator(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

struct SchmidtData {
  RealVector coefficients;  // descending, all above rank_tol
  Matrix left_basis;        // dim_a x rank
  Matrix right_basis;       // dim_b x rank
  std::size_t rank = 0;
};

enum class Side { A, B };

/// The conjugate-linear map H_A -> H_B with <psi, x (x) y> = <L x, y>.
AntilinearOperator l_psi(const BipartiteState& psi);

DensityOperator reduced_density(const BipartiteState& psi, Side side);

SchmidtData schmidt(const BipartiteState& psi, const Tolerance& tol = Tolerance::global());

/// psi = sum_k sqrt(lambda_k) |e_k> (x) |k> on C^d (x) C^d.
BipartiteState purify(const DensityOperator& rho, const Tolerance& tol = Tolerance::global());

/// The orbit {X psi : X in basis} spans the ambient space.
bool is_cyclic(const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol = Tolerance::global());
/// X -> X psi is injective on the algebra.
bool is_separating(const MatrixAlgebra& alg, const Vector& psi,
                   const Tolerance& tol = Tolerance::global());

/// Orthonormal basis of span{X psi : X in alg}, one column per vector.
Matrix orbit_basis(const MatrixAlgebra& alg, const Vector& psi,
                   const Tolerance& tol = Tolerance::global());

Matrix support_projection(const DensityOperator& rho, const Tolerance& tol = Tolerance::global());

/// Partial trace over the second factor of C^{dim_a} (x) C^{dim_b}.
Matrix partial_trace_second(const Matrix& x, std::size_t dim_a, std::size_t dim_b);
/// Partial trace over the first factor.
Matrix partial_trace_first(const Matrix& x, std::size_t dim_a, std::size_t dim_b);

}  // namespace epr
