#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "epr/algebra.hpp"
#include "epr/modular.hpp"
#include "epr/numerics.hpp"
#include "epr/states.hpp"

namespace epr {

/// Residuals of the perfect-correlation conditions for a candidate pair (A, A').
struct DoubleCertificate {
  Matrix a;
  Matrix a_prime;
  double residual_left = 0.0;   // |rho (A - A')|_HS
  double residual_right = 0.0;  // |(A - A') rho|_HS
  /// tr(rho D*D) and tr(rho DD*) averaged, D = A - A'; equals tr(rho D^2) for Hermitian D.
  double residual_eq1 = 0.0;
  bool verdict = false;
  /// The scalar criterion, judged on its own at tolerance.
  bool eq1_verdict = false;
  /// |rho D|^2 <= 2 |rho| eq1 and eq1 <= |D| max(left, right) both hold.
  bool eq1_bounds_hold = false;
};

DoubleCertificate verify_double(const DensityOperator& rho, const Matrix& a, const Matrix& a_prime,
                                const Tolerance& tol = Tolerance::global());

struct DoubleSolution {
  std::optional<Matrix> double_op;  // minimum-norm A' in span(B), when feasible
  std::size_t solution_dim = 0;     // dimension of the affine solution set
  double residual = 0.0;
};

/// Solves rho A' = rho A and A' rho = A rho over span(B) by least squares.
/// The factorization is reused across observables.
class DoubleSolver {
 public:
  DoubleSolver(const DensityOperator& rho, const MatrixAlgebra& b,
               const Tolerance& tol = Tolerance::global());
  DoubleSolution solve(const Matrix& a) const;

 private:
  Matrix rho_;
  MatrixAlgebra b_;
  Tolerance tol_;
  LeastSquares ls_;
  Matrix system_;
};

DoubleSolution solve_double(const DensityOperator& rho, const Matrix& a, const MatrixAlgebra& b,
                            const Tolerance& tol = Tolerance::global());

/// Projections onto [A psi] (R, in the commutant) and [A' psi] (R', in A), and
/// the compression of A to range(R) n range(R'), where psi is cyclic and separating.
struct ReductionData {
  Matrix R;
  Matrix R_prime;
  Matrix restricted_basis;  // orthonormal columns
  MatrixAlgebra restricted_algebra;
  Vector restricted_psi;
};

ReductionData reduce(const MatrixAlgebra& a, const Vector& psi, const Tolerance& tol = Tolerance::global());

/// Compresses a working-space operator to the restricted subspace.
Matrix compress(const ReductionData& red, const Matrix& x);

using StateInput = std::variant<Vector, DensityOperator>;

/// The reduction pipeline: purify (mixed input), reduce, modular theory on the
/// restriction, transport back. All *_parts and essential_doubles live on the
/// working space, which is the input space tensored with the ancilla.
struct GeneralDoubles {
  MatrixAlgebra algebra;               // D(A, B, rho) on the input space
  std::vector<Matrix> doubles;         // a double for each basis element (see doubles_on_input_space)
  bool doubles_on_input_space = true;  // false only for B = commutant with a purified input
  std::vector<Matrix> essential_doubles;  // R A' R (canonical representative)
  std::vector<Matrix> zero_parts;         // (1 - R') A (1 - R'), double zero
  std::vector<Matrix> essential_parts;    // R' A R'
  std::vector<Matrix> restricted_parts;   // A compressed onto range(R) n range(R')
  ReductionData reduction;
  ModularData restricted_modular;
  std::size_t ancilla_dim = 1;
};

/// `b` absent means B = commutant of A on the working space.
GeneralDoubles general_doubles(const MatrixAlgebra& a, const std::optional<MatrixAlgebra>& b,
                               const StateInput& state, const Tolerance& tol = Tolerance::global());

/// D computed straight from rho (A - A') = (A - A') rho = 0 over the joint
/// coefficient space of A and B, with minimum-norm doubles.
struct OracleDoubles {
  MatrixAlgebra algebra;
  std::vector<Matrix> doubles;
  std::vector<std::size_t> solution_dims;
};

OracleDoubles oracle_doubles(const MatrixAlgebra& a, const MatrixAlgebra& b, const DensityOperator& rho,
                             const Tolerance& tol = Tolerance::global());

enum class Path { Modular, Oracle, Both };

struct DoublesAlgebra {
  MatrixAlgebra algebra;
  std::vector<Matrix> doubles;  // aligned with algebra.basis(), elements of span(B)
  Path path = Path::Both;
  std::optional<GeneralDoubles> modular;
  std::optional<OracleDoubles> oracle;
  bool paths_agree = true;
  double double_discrepancy = 0.0;  // largest support-restricted mismatch of doubles
};

/// Both paths by default; with Path::Both a disagreement throws
/// PathDisagreement unless `throw_on_disagreement` is false.
DoublesAlgebra doubles_algebra(const MatrixAlgebra& a, const MatrixAlgebra& b, const DensityOperator& rho,
                               const Tolerance& tol = Tolerance::global(), Path path = Path::Both,
                               bool throw_on_disagreement = true);

/// Largest |[X, Y]|_HS over basis pairs.
double max_commutator(const MatrixAlgebra& a, const MatrixAlgebra& b);

}  // namespace epr
