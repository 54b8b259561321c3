#include "epr/states.hpp"

#include <cmath>
#include <sstream>

namespace epr {

namespace {

void require_unit(const Vector& v, const Tolerance& tol) {
  if (!v.allFinite()) throw Error(ErrorKind::InvalidState, "state vector has non-finite amplitudes");
  const double n = v.norm();
  if (std::abs(n - 1.0) > tol.residual_tol) {
    std::ostringstream msg;
    msg << "state vector norm is " << n << ", expected 1";
    throw Error(ErrorKind::InvalidState, msg.str());
  }
}

Matrix orbit_matrix(const MatrixAlgebra& alg, const Vector& psi) {
  if (static_cast<std::size_t>(psi.size()) != alg.ambient_dim())
    throw Error(ErrorKind::DimensionMismatch, "vector does not live in the algebra's ambient space");
  Matrix orbit(psi.size(), static_cast<Eigen::Index>(alg.dimension()));
  for (std::size_t k = 0; k < alg.dimension(); ++k)
    orbit.col(static_cast<Eigen::Index>(k)) = alg.basis()[k] * psi;
  return orbit;
}

}  // namespace

BipartiteState BipartiteState::from_vector(std::size_t dim_a, std::size_t dim_b, Vector amplitudes,
                                           const Tolerance& tol) {
  if (dim_a == 0 || dim_b == 0) throw Error(ErrorKind::DimensionMismatch, "factor dimensions must be positive");
  if (static_cast<std::size_t>(amplitudes.size()) != dim_a * dim_b) {
    std::ostringstream msg;
    msg << "state has " << amplitudes.size() << " amplitudes, expected " << dim_a * dim_b;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  require_unit(amplitudes, tol);
  return BipartiteState(dim_a, dim_b, std::move(amplitudes));
}

BipartiteState BipartiteState::from_coefficients(const Matrix& c, const Tolerance& tol) {
  const auto a = static_cast<std::size_t>(c.rows());
  const auto b = static_cast<std::size_t>(c.cols());
  Vector v(c.size());
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) v(i * c.cols() + j) = c(i, j);
  return from_vector(a, b, std::move(v), tol);
}

Matrix BipartiteState::coefficient_matrix() const {
  const auto a = static_cast<Eigen::Index>(dim_a_);
  const auto b = static_cast<Eigen::Index>(dim_b_);
  Matrix c(a, b);
  for (Eigen::Index i = 0; i < a; ++i)
    for (Eigen::Index j = 0; j < b; ++j) c(i, j) = vector_(i * b + j);
  return c;
}

DensityOperator DensityOperator::from_matrix(Matrix rho, const Tolerance& tol) {
  if (auto defect = density_defect(rho, tol))
    throw Error(ErrorKind::InvalidState, "density operator fails " + *defect);
  return DensityOperator(std::move(rho));
}

DensityOperator DensityOperator::pure(const Vector& psi, const Tolerance& tol) {
  require_unit(psi, tol);
  return DensityOperator(psi * psi.adjoint());
}

AntilinearOperator l_psi(const BipartiteState& psi) {
  // <psi, x (x) y> = sum conj(C_ij) x_i y_j = <C^T conj(x), y>.
  return AntilinearOperator(psi.coefficient_matrix().transpose());
}

DensityOperator reduced_density(const BipartiteState& psi, Side side) {
  const Matrix c = psi.coefficient_matrix();
  if (side == Side::A) {
    // L* L is linear with kernel C conj(C^T) = C C*.
    const AntilinearOperator l = l_psi(psi);
    return DensityOperator::from_matrix(l.adjoint().compose(l));
  }
  const Matrix rho_b = (c.adjoint() * c).transpose();
  return DensityOperator::from_matrix(rho_b);
}

SchmidtData schmidt(const BipartiteState& psi, const Tolerance& tol) {
  const Matrix c = psi.coefficient_matrix();
  const SvdResult dec = svd(c);
  const RealVector& s = dec.s;
  SchmidtData out;
  while (out.rank < static_cast<std::size_t>(s.size()) && s(static_cast<Eigen::Index>(out.rank)) > tol.rank_tol)
    ++out.rank;
  const auto r = static_cast<Eigen::Index>(out.rank);
  out.coefficients = s.head(r);
  out.left_basis = dec.u.leftCols(r);
  // C = U S V* gives psi = sum_k s_k u_k (x) conj(v_k).
  out.right_basis = dec.v.leftCols(r).conjugate();
  return out;
}

BipartiteState purify(const DensityOperator& rho, const Tolerance& tol) {
  const EigenDecomposition eig = hermitian_eig(rho.matrix(), tol);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix c(d, d);
  // Largest eigenvalue pairs with ancilla |0>, so pure inputs purify to product states |e>|0>.
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = d - 1 - k;
    c.col(k) = std::sqrt(std::max(eig.values(src), 0.0)) * eig.vectors.col(src);
  }
  // Clipping tiny negative eigenvalues leaves a norm defect of order rank_tol.
  c /= c.norm();
  return BipartiteState::from_coefficients(c, tol);
}

Matrix orbit_basis(const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
  return range_basis(orbit_matrix(alg, psi), tol.rank_tol, psi.norm());
}

bool is_cyclic(const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
  return numerical_rank(orbit_matrix(alg, psi), tol.rank_tol, psi.norm()) == alg.ambient_dim();
}

bool is_separating(const MatrixAlgebra& alg, const Vector& psi, const Tolerance& tol) {
  return numerical_rank(orbit_matrix(alg, psi), tol.rank_tol, psi.norm()) == alg.dimension();
}

Matrix support_projection(const DensityOperator& rho, const Tolerance& tol) {
  const EigenDecomposition eig = hermitian_eig(rho.matrix(), tol);
  return spectral_apply(eig, [&](double x) { return x > tol.rank_tol ? 1.0 : 0.0; });
}

Matrix partial_trace_second(const Matrix& x, std::size_t dim_a, std::size_t dim_b) {
  require_square(x, dim_a * dim_b, "operator");
  const auto a = static_cast<Eigen::Index>(dim_a), b = static_cast<Eigen::Index>(dim_b);
  Matrix out = Matrix::Zero(a, a);
  for (Eigen::Index i = 0; i < a; ++i)
    for (Eigen::Index k = 0; k < a; ++k)
      for (Eigen::Index j = 0; j < b; ++j) out(i, k) += x(i * b + j, k * b + j);
  return out;
}

Matrix partial_trace_first(const Matrix& x, std::size_t dim_a, std::size_t dim_b) {
  require_square(x, dim_a * dim_b, "operator");
  const auto a = static_cast<Eigen::Index>(dim_a), b = static_cast<Eigen::Index>(dim_b);
  Matrix out = Matrix::Zero(b, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index l = 0; l < b; ++l)
      for (Eigen::Index i = 0; i < a; ++i) out(j, l) += x(i * b + j, i * b + l);
  return out;
}

}  // namespace epr
