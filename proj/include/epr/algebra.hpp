#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "epr/numerics.hpp"

namespace epr {

/// A unital *-subalgebra of d x d complex matrices, stored as a basis that is
/// orthonormal in the Hilbert-Schmidt inner product. Construction always
/// validates unit, adjoint closure and product closure.
class MatrixAlgebra {
 public:
  enum class ClosureCheck {
    Auto,        // exhaustive for small algebras, randomized otherwise
    Exhaustive,  // every basis pair
  };

  /// Orthonormalizes `spanning` and validates the algebra invariants.
  static MatrixAlgebra from_span(std::size_t ambient_dim, std::span<const Matrix> spanning,
                                 const Tolerance& tol = Tolerance::global(),
                                 ClosureCheck check = ClosureCheck::Auto);

  static MatrixAlgebra scalars(std::size_t dim);
  static MatrixAlgebra full(std::size_t dim);
  /// M_{dim_a} (x) 1 acting on C^{dim_a} (x) C^{dim_b}.
  static MatrixAlgebra left_factor(std::size_t dim_a, std::size_t dim_b);
  /// 1 (x) M_{dim_b} acting on C^{dim_a} (x) C^{dim_b}.
  static MatrixAlgebra right_factor(std::size_t dim_a, std::size_t dim_b);
  /// Algebra (x) 1_{ancilla}.
  MatrixAlgebra tensor_identity(std::size_t ancilla_dim) const;

  std::size_t ambient_dim() const { return dim_; }
  std::size_t dimension() const { return basis_.size(); }
  const std::vector<Matrix>& basis() const { return basis_; }
  /// Vectorized basis, one column per element.
  const Matrix& stacked() const { return stacked_; }

  Vector coefficients(const Matrix& x) const;
  Matrix element(const Vector& coefficients) const;
  /// Hilbert-Schmidt orthogonal projection onto the span.
  Matrix project(const Matrix& x) const;
  double membership_residual(const Matrix& x) const;
  /// Membership at residual_tol relative to max(|x|_HS, 1).
  bool contains(const Matrix& x, const Tolerance& tol = Tolerance::global()) const;

  /// Largest violation of the closure invariants; all are zero for an exact algebra.
  struct Defects {
    double unit = 0.0;
    double adjoint = 0.0;
    double product = 0.0;
  };
  Defects defects(ClosureCheck check = ClosureCheck::Auto) const;

 private:
  MatrixAlgebra(std::size_t dim, std::vector<Matrix> basis);

  std::size_t dim_;
  std::vector<Matrix> basis_;
  Matrix stacked_;
};

/// Same linear span at residual_tol.
bool span_equal(const MatrixAlgebra& a, const MatrixAlgebra& b,
                const Tolerance& tol = Tolerance::global());
/// span(a) contained in span(b) at residual_tol.
bool span_contains(const MatrixAlgebra& outer, const MatrixAlgebra& inner,
                   const Tolerance& tol = Tolerance::global());

/// Smallest unital *-algebra containing the generators.
MatrixAlgebra generate_algebra(std::span<const Matrix> generators, std::size_t ambient_dim,
                               const Tolerance& tol = Tolerance::global());

MatrixAlgebra commutant(const MatrixAlgebra& alg, const Tolerance& tol = Tolerance::global());

/// Elements A with tr(rho A X) = tr(rho X A) for all X in the algebra. Only
/// the functional X -> tr(rho X) on the algebra enters the computation.
MatrixAlgebra centralizer(const MatrixAlgebra& alg, const Matrix& rho,
                          const Tolerance& tol = Tolerance::global());

MatrixAlgebra intersect(const MatrixAlgebra& a, const MatrixAlgebra& b,
                        const Tolerance& tol = Tolerance::global());

/// {J X* J} when star is set, else {J X J}. J must be an antiunitary involution.
MatrixAlgebra conjugate_by_antiunitary(const MatrixAlgebra& alg, const AntilinearOperator& j,
                                       bool star, const Tolerance& tol = Tolerance::global());

MatrixAlgebra center(const MatrixAlgebra& alg, const Tolerance& tol = Tolerance::global());

/// Orthonormal basis of {X in span(candidates) : [X, C] = 0 for all C}, plus
/// the coefficients of each result with respect to the candidates (one column
/// per result). Candidates must be Hilbert-Schmidt orthonormal.
struct CommutingSubspace {
  std::vector<Matrix> elements;
  Matrix coefficients;
};
CommutingSubspace commuting_subspace(const std::vector<Matrix>& candidates,
                                     const std::vector<Matrix>& constraints, const Tolerance& tol);

struct Block {
  std::size_t size = 0;          // n_k: the algebra acts as M_{n_k}
  std::size_t multiplicity = 0;  // m_k: ... tensored with 1_{m_k}
  bool operator==(const Block&) const = default;
};

struct BlockStructure {
  std::vector<Block> blocks;  // sorted by (size, multiplicity) descending
  /// Columns form the adapted basis: U* X U = (+)_k (X_k (x) 1_{m_k}).
  Matrix conjugating_unitary;
};

BlockStructure block_decomposition(const MatrixAlgebra& alg,
                                   const Tolerance& tol = Tolerance::global());

/// Hilbert-Schmidt mass of U* X U outside the pattern (+)_k (M_{n_k} (x) 1_{m_k}),
/// maximized over the algebra basis. Zero for an exact decomposition.
double off_pattern_mass(const MatrixAlgebra& alg, const BlockStructure& structure);

}  // namespace epr
