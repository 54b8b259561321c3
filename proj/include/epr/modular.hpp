#pragma once

#include "epr/algebra.hpp"
#include "epr/numerics.hpp"

namespace epr {

/// Modular objects of an algebra with a cyclic and separating vector:
/// S(X psi) = X* psi, S = J Delta^{1/2}.
struct ModularData {
  MatrixAlgebra algebra;
  Vector psi;
  AntilinearOperator S;
  Matrix delta;
  AntilinearOperator J;
};

ModularData modular_data(const MatrixAlgebra& alg, const Vector& psi,
                         const Tolerance& tol = Tolerance::global());

/// [Delta, A] = 0 at tolerance. A must belong to md.algebra.
bool commutes_with_delta(const Matrix& a, const ModularData& md,
                         const Tolerance& tol = Tolerance::global());

/// The unique double J A* J in the commutant. Throws NotInCentralizer when A
/// does not commute with Delta.
Matrix modular_double(const Matrix& a, const ModularData& md,
                      const Tolerance& tol = Tolerance::global());

}  // namespace epr
