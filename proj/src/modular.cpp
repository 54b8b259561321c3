#include "epr/modular.hpp"

#include <cmath>
#include <sstream>

#include "epr/random.hpp"
#include "epr/states.hpp"

namespace epr {

namespace {

constexpr std::uint64_t kDoubleCheckSeed = 0x5eed'c0de'0004ULL;

void fail_check(const char* what, double residual) {
  std::ostringstream msg;
  msg << what << " (residual " << residual << ")";
  throw Error(ErrorKind::NumericalFailure, msg.str());
}

}  // namespace

ModularData modular_data(const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
  if (static_cast<std::size_t>(psi.size()) != alg.ambient_dim())
    throw Error(ErrorKind::DimensionMismatch, "vector does not live in the algebra's ambient space");
  if (std::abs(psi.norm() - 1.0) > tol.residual_tol)
    throw Error(ErrorKind::InvalidState, "modular data needs a unit vector");
  if (!is_cyclic(alg, psi, tol)) throw Error(ErrorKind::NotCyclic, "vector is not cyclic for the algebra");
  if (!is_separating(alg, psi, tol))
    throw Error(ErrorKind::NotSeparating, "vector is not separating for the algebra");

  // S x = K conj(x) with K conj(X_k psi) = X_k* psi for every basis element.
  // Orthonormalize the orbit first: orbit = Q R, so K conj(Q) = images conj(R)^{-1}.
  const auto n = static_cast<Eigen::Index>(alg.dimension());
  Matrix orbit(psi.size(), n), images(psi.size(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Matrix& x = alg.basis()[static_cast<std::size_t>(k)];
    orbit.col(k) = x * psi;
    images.col(k) = x.adjoint() * psi;
  }
  Eigen::HouseholderQR<Matrix> qr(orbit);
  const Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // images conj(R)^{-1}: solve conj(R)^T Y^T = images^T.
  const Matrix rc = r.conjugate();
  const Matrix transported =
      rc.transpose().triangularView<Eigen::Lower>().solve(images.transpose()).transpose();
  AntilinearOperator s(transported * q.transpose());

  AntilinearPolar polar = [&] {
    try {
      return antilinear_polar(s, tol);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SingularOperator)
        throw Error(ErrorKind::NotSeparating, std::string("modular operator is singular: ") + e.what());
      throw;
    }
  }();

  ModularData md{alg, psi, std::move(s), std::move(polar.delta), std::move(polar.J)};

  double worst = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) worst = std::max(worst, (md.S.apply(orbit.col(k)) - images.col(k)).norm());
  if (worst > tol.residual_tol) fail_check("S X psi differs from X* psi", worst);
  const double delta_fix = (md.delta * psi - psi).norm();
  if (delta_fix > tol.residual_tol) fail_check("Delta does not fix psi", delta_fix);
  const double j_fix = (md.J.apply(psi) - psi).norm();
  if (j_fix > tol.residual_tol) fail_check("J does not fix psi", j_fix);
  return md;
}

bool commutes_with_delta(const Matrix& a, const ModularData& md, const Tolerance& tol) {
  require_square(a, md.algebra.ambient_dim(), "observable");
  if (!md.algebra.contains(a, tol)) throw Error(ErrorKind::NotInAlgebra, "observable is not in the algebra");
  const double a_norm = a.norm();
  if (a_norm == 0.0) return true;
  const double residual = commutator(md.delta, a).norm();
  if (residual > tol.residual_tol * md.delta.norm() * a_norm) return false;
  const double bound = tol.residual_tol * std::max(md.delta.norm(), 1.0) * a_norm;
  const double shift = (md.delta * (a * md.psi) - a * md.psi).norm();
  if (shift > bound) fail_check("commuting observable is not fixed by Delta on psi", shift);
  const double shift_star = (md.delta * (a.adjoint() * md.psi) - a.adjoint() * md.psi).norm();
  if (shift_star > bound) fail_check("adjoint of commuting observable is not fixed by Delta on psi", shift_star);
  return true;
}

Matrix modular_double(const Matrix& a, const ModularData& md, const Tolerance& tol) {
  if (!commutes_with_delta(a, md, tol))
    throw Error(ErrorKind::NotInCentralizer, "observable does not commute with Delta; no double exists");
  const Matrix a_prime = md.J.sandwich(a.adjoint());

  const double scale = std::max(a.norm(), 1.0);
  double worst = 0.0;
  const auto& basis = md.algebra.basis();
  const double d = static_cast<double>(md.algebra.ambient_dim());
  if (static_cast<double>(basis.size()) * d * d * d <= 1e7) {
    for (const Matrix& x : basis) worst = std::max(worst, commutator(a_prime, x).norm());
  } else {
    // [A', sum c_k X_k] vanishes for random c only if every [A', X_k] does.
    Rng rng(kDoubleCheckSeed);
    for (int trial = 0; trial < 2; ++trial) {
      const Matrix probe = md.algebra.element(rng.gaussian_vector(basis.size()).normalized());
      worst = std::max(worst, commutator(a_prime, probe).norm());
    }
  }
  if (worst > tol.residual_tol * scale) fail_check("double is not in the commutant", worst);
  const double left = (a_prime * md.psi - a * md.psi).norm();
  const double right = (a_prime.adjoint() * md.psi - a.adjoint() * md.psi).norm();
  if (std::max(left, right) > tol.residual_tol * scale)
    fail_check("double does not reproduce A on psi", std::max(left, right));
  return a_prime;
}

}  // namespace epr
