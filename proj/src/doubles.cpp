#include "epr/doubles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "epr/random.hpp"

namespace epr {

namespace {

constexpr std::uint64_t kCommuteSeed = 0x5eed'c0de'0003ULL;

[[noreturn]] void numerical_failure(const std::string& what, double residual) {
  std::ostringstream msg;
  msg << what << " (residual " << residual << ")";
  throw Error(ErrorKind::NumericalFailure, msg.str());
}

// Columns [vec(rho X); vec(X rho)] for each basis element.
Matrix correlation_system(const Matrix& rho, const std::vector<Matrix>& basis) {
  const auto d2 = rho.size();
  Matrix m(2 * d2, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    m.col(col).head(d2) = vec(rho * basis[k]);
    m.col(col).tail(d2) = vec(basis[k] * rho);
  }
  return m;
}

Matrix compression_system(const Matrix& w, const std::vector<Matrix>& family) {
  const auto k = w.cols();
  Matrix m(k * k, static_cast<Eigen::Index>(family.size()));
  for (std::size_t j = 0; j < family.size(); ++j)
    m.col(static_cast<Eigen::Index>(j)) = vec(w.adjoint() * family[j] * w);
  return m;
}

// Algebras built from compressed or transported spans are algebras up to
// rounding; a failed validation there is a numerical problem, not bad input.
MatrixAlgebra rebuild(std::size_t dim, std::span<const Matrix> span, const Tolerance& tol, const char* what) {
  try {
    return MatrixAlgebra::from_span(dim, span, tol);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidAlgebra)
      throw Error(ErrorKind::NumericalFailure, std::string(what) + ": " + e.what());
    throw;
  }
}

Matrix to_working(const Matrix& x, std::size_t ancilla) {
  return ancilla == 1 ? x : kron(x, identity(ancilla));
}

Matrix to_input(const Matrix& x, std::size_t dim, std::size_t ancilla) {
  return ancilla == 1 ? x : Matrix(partial_trace_second(x, dim, ancilla) / static_cast<double>(ancilla));
}

// Projection onto span{X v : X in alg, v in range(rho)}, where every double of
// an element of alg is determined.
Matrix determined_subspace(const MatrixAlgebra& alg, const DensityOperator& rho, const Tolerance& tol) {
  const Matrix support = range_basis(support_projection(rho, tol), tol.rank_tol);
  const auto d = static_cast<Eigen::Index>(alg.ambient_dim());
  Matrix images(d, support.cols() * static_cast<Eigen::Index>(alg.dimension()));
  for (std::size_t k = 0; k < alg.dimension(); ++k)
    images.middleCols(static_cast<Eigen::Index>(k) * support.cols(), support.cols()) = alg.basis()[k] * support;
  return projector(range_basis(images, tol.rank_tol));
}

}  // namespace

DoubleCertificate verify_double(const DensityOperator& rho, const Matrix& a, const Matrix& a_prime,
                                const Tolerance& tol) {
  require_square(a, rho.dim(), "observable");
  require_square(a_prime, rho.dim(), "double");
  const Matrix& r = rho.matrix();
  const Matrix diff = a - a_prime;

  DoubleCertificate cert;
  cert.a = a;
  cert.a_prime = a_prime;
  cert.residual_left = (r * diff).norm();
  cert.residual_right = (diff * r).norm();
  const Complex plain = (r * diff.adjoint() * diff).trace();
  const Complex swapped = (r * diff * diff.adjoint()).trace();
  cert.residual_eq1 = std::abs(0.5 * (plain + swapped));

  const double scale = std::max({a.norm(), a_prime.norm(), 1.0});
  const double bound = tol.residual_tol * scale;
  cert.verdict = std::max(cert.residual_left, cert.residual_right) <= bound;
  cert.eq1_verdict = cert.residual_eq1 <= bound * bound;

  // |rho D|^2 = tr(D* rho^2 D) <= |rho|_op tr(rho D D*) <= 2 |rho|_op eq1, and
  // eq1 <= |D| max(|rho D|, |D rho|) by Cauchy-Schwarz.
  const double rho_op = Eigen::SelfAdjointEigenSolver<Matrix>(r, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double slack = 1e-12 * std::max(1.0, diff.squaredNorm());
  const double two_sided = std::max(cert.residual_left, cert.residual_right);
  cert.eq1_bounds_hold = two_sided * two_sided <= 2.0 * rho_op * cert.residual_eq1 + slack &&
                         cert.residual_eq1 <= diff.norm() * two_sided + slack;
  return cert;
}

DoubleSolver::DoubleSolver(const DensityOperator& rho, const MatrixAlgebra& b, const Tolerance& tol)
    : rho_(rho.matrix()),
      b_(b),
      tol_(tol),
      ls_(correlation_system(rho.matrix(), b.basis()), tol.rank_tol, 1.0),
      system_(correlation_system(rho.matrix(), b.basis())) {
  if (b.ambient_dim() != rho.dim())
    throw Error(ErrorKind::DimensionMismatch, "algebra and state live on different spaces");
}

DoubleSolution DoubleSolver::solve(const Matrix& a) const {
  require_square(a, b_.ambient_dim(), "observable");
  const auto d2 = rho_.size();
  Vector rhs(2 * d2);
  rhs.head(d2) = vec(rho_ * a);
  rhs.tail(d2) = vec(a * rho_);
  const Vector c = ls_.solve(rhs);

  DoubleSolution out;
  out.solution_dim = ls_.cols() - ls_.rank();
  out.residual = (system_ * c - rhs).norm();
  if (out.residual <= tol_.residual_tol * std::max(a.norm(), 1.0)) out.double_op = b_.element(c);
  return out;
}

DoubleSolution solve_double(const DensityOperator& rho, const Matrix& a, const MatrixAlgebra& b,
                            const Tolerance& tol) {
  return DoubleSolver(rho, b, tol).solve(a);
}

ReductionData reduce(const MatrixAlgebra& a, const Vector& psi, const Tolerance& tol) {
  const auto n = static_cast<Eigen::Index>(a.ambient_dim());
  if (psi.size() != n) throw Error(ErrorKind::DimensionMismatch, "vector does not live in the algebra's ambient space");
  if (std::abs(psi.norm() - 1.0) > tol.residual_tol)
    throw Error(ErrorKind::InvalidState, "reduction needs a unit vector");

  Matrix orbit(n, static_cast<Eigen::Index>(a.dimension()));
  for (std::size_t k = 0; k < a.dimension(); ++k) orbit.col(static_cast<Eigen::Index>(k)) = a.basis()[k] * psi;
  const Matrix r = projector(range_basis(orbit, tol.rank_tol));

  // 1 - R' is the largest projection in A killing psi: the span of the ranges
  // of X* over the left ideal {X : X psi = 0}.
  Matrix r_prime = identity(a.ambient_dim());
  const Matrix ideal = LeastSquares(orbit, tol.rank_tol).null_space();
  if (ideal.cols() > 0) {
    Matrix ranges(n, n * ideal.cols());
    for (Eigen::Index j = 0; j < ideal.cols(); ++j) ranges.middleCols(j * n, n) = a.element(ideal.col(j)).adjoint();
    r_prime -= projector(range_basis(ranges, tol.rank_tol));
  }

  const double check_scale = tol.residual_tol * std::sqrt(static_cast<double>(n));
  const double skew = commutator(r, r_prime).norm();
  if (skew > check_scale) numerical_failure("orbit projections do not commute", skew);
  double worst = 0.0;
  for (const Matrix& x : a.basis()) worst = std::max(worst, commutator(r, x).norm());
  if (worst > check_scale) numerical_failure("orbit projection is not in the commutant", worst);
  const double outside = a.membership_residual(r_prime);
  if (outside > check_scale) numerical_failure("support projection is not in the algebra", outside);

  const Matrix w = range_basis(r * r_prime, tol.rank_tol);
  const auto k = static_cast<std::size_t>(w.cols());
  std::vector<Matrix> compressed;
  compressed.reserve(a.dimension());
  for (const Matrix& x : a.basis()) compressed.push_back(w.adjoint() * x * w);
  MatrixAlgebra restricted = rebuild(k, compressed, tol, "compressed algebra");
  Vector restricted_psi = w.adjoint() * psi;
  const double lost = std::abs(restricted_psi.norm() - 1.0);
  if (lost > tol.residual_tol) numerical_failure("vector leaves the restricted subspace", lost);
  restricted_psi.normalize();
  if (!is_cyclic(restricted, restricted_psi, tol) || !is_separating(restricted, restricted_psi, tol))
    throw Error(ErrorKind::NumericalFailure, "restricted vector is not cyclic and separating");

  return ReductionData{r, r_prime, w, std::move(restricted), std::move(restricted_psi)};
}

Matrix compress(const ReductionData& red, const Matrix& x) {
  return red.restricted_basis.adjoint() * x * red.restricted_basis;
}

GeneralDoubles general_doubles(const MatrixAlgebra& a, const std::optional<MatrixAlgebra>& b,
                               const StateInput& state, const Tolerance& tol) {
  const std::size_t d = a.ambient_dim();
  if (b && b->ambient_dim() != d) throw Error(ErrorKind::DimensionMismatch, "algebras live on different spaces");

  Vector psi;
  std::size_t ancilla = 1;
  if (const auto* v = std::get_if<Vector>(&state)) {
    if (static_cast<std::size_t>(v->size()) != d)
      throw Error(ErrorKind::DimensionMismatch, "state vector does not match the algebra");
    if (std::abs(v->norm() - 1.0) > tol.residual_tol) throw Error(ErrorKind::InvalidState, "state vector is not normalized");
    psi = *v;
  } else {
    const DensityOperator& rho = std::get<DensityOperator>(state);
    if (rho.dim() != d) throw Error(ErrorKind::DimensionMismatch, "density operator does not match the algebra");
    const EigenDecomposition eig = hermitian_eig(rho.matrix(), tol);
    const auto rank = (eig.values.array() > tol.rank_tol).count();
    if (rank == 1) {
      psi = eig.vectors.col(eig.values.size() - 1);
    } else {
      psi = purify(rho, tol).vector();
      ancilla = d;
    }
  }

  const MatrixAlgebra aw = a.tensor_identity(ancilla);
  std::optional<MatrixAlgebra> bw;
  if (b) bw = b->tensor_identity(ancilla);
  const std::size_t n = aw.ambient_dim();

  ReductionData red = reduce(aw, psi, tol);
  ModularData md = modular_data(red.restricted_algebra, red.restricted_psi, tol);
  const Matrix& w = red.restricted_basis;
  const std::size_t k = static_cast<std::size_t>(w.cols());
  MatrixAlgebra dk = centralizer(md.algebra, md.psi * md.psi.adjoint(), tol);

  // Elements of B that commute with R compress to an algebra on the
  // restricted subspace; B_K holds them with coefficients relative to B.
  std::vector<Matrix> b_tilde;
  Matrix b_tilde_coeffs;
  Matrix b_lift_system;
  std::optional<LeastSquares> b_lift;
  if (bw) {
    const double off = (identity(n) - red.R).norm();
    if (off <= tol.residual_tol) {
      b_tilde = bw->basis();
      b_tilde_coeffs = Matrix::Identity(static_cast<Eigen::Index>(bw->dimension()),
                                        static_cast<Eigen::Index>(bw->dimension()));
    } else {
      CommutingSubspace cs = commuting_subspace(bw->basis(), {red.R}, tol);
      b_tilde = std::move(cs.elements);
      b_tilde_coeffs = std::move(cs.coefficients);
    }
    std::vector<Matrix> compressed;
    for (const Matrix& y : b_tilde) compressed.push_back(w.adjoint() * y * w);
    const MatrixAlgebra bk = rebuild(k, compressed, tol, "compressed second algebra");
    dk = intersect(dk, conjugate_by_antiunitary(bk, md.J, false, tol), tol);
    b_lift_system = compression_system(w, b_tilde);
    b_lift.emplace(b_lift_system, tol.rank_tol);
  }

  // Orbit pseudo-inverse: Y (X psi) = X v defines the essential double on [A psi].
  Matrix orbit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(aw.dimension()));
  for (std::size_t l = 0; l < aw.dimension(); ++l) orbit.col(static_cast<Eigen::Index>(l)) = aw.basis()[l] * psi;
  const Matrix orbit_pinv = LeastSquares(orbit, tol.rank_tol).solve(identity(n));

  const Matrix a_lift_system = compression_system(w, aw.basis());
  const LeastSquares a_lift(a_lift_system, tol.rank_tol);

  std::vector<Matrix> primaries, companions, essentials;
  const double lift_tol = tol.residual_tol * std::sqrt(static_cast<double>(k));
  for (const Matrix& z : dk.basis()) {
    const Matrix z_prime = modular_double(z, md, tol);

    const Vector zc = vec(z);
    const Vector ca = a_lift.solve(zc);
    const double a_res = (a_lift_system * ca - zc).norm();
    if (a_res > lift_tol) numerical_failure("restricted element has no lift to the algebra", a_res);
    const Matrix x = red.R_prime * aw.element(ca) * red.R_prime;

    const Vector v = w * (z_prime * md.psi);
    Matrix images(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(aw.dimension()));
    for (std::size_t l = 0; l < aw.dimension(); ++l) images.col(static_cast<Eigen::Index>(l)) = aw.basis()[l] * v;
    const Matrix y = images * orbit_pinv;

    primaries.push_back(to_input(x, d, ancilla));
    essentials.push_back(y);
    if (bw) {
      const Vector zpc = vec(z_prime);
      const Vector e = b_lift->solve(zpc);
      const double b_res = (b_lift_system * e - zpc).norm();
      if (b_res > lift_tol) numerical_failure("restricted double has no lift to the second algebra", b_res);
      const Vector coeffs = b_tilde_coeffs * e;
      companions.push_back(b->element(coeffs) / std::sqrt(static_cast<double>(ancilla)));
    } else {
      companions.push_back(y);
    }
  }

  // (1 - R') A (1 - R') is doubled by zero.
  const Matrix off_support = identity(n) - red.R_prime;
  if (off_support.norm() > tol.residual_tol) {
    const auto zero_in = Matrix::Zero(static_cast<Eigen::Index>(b ? d : n), static_cast<Eigen::Index>(b ? d : n));
    for (const Matrix& x : aw.basis()) {
      primaries.push_back(to_input(off_support * x * off_support, d, ancilla));
      companions.push_back(zero_in);
      essentials.push_back(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    }
  }

  PairedBasis paired = orthonormalize_pairs(primaries, companions, tol);
  PairedBasis paired_essential = orthonormalize_pairs(primaries, essentials, tol);
  MatrixAlgebra algebra = rebuild(d, paired.primary, tol, "algebra of doubled elements");
  if (algebra.dimension() != paired.primary.size())
    throw Error(ErrorKind::NumericalFailure, "doubled elements lost independence");
  double drift = 0.0;
  for (std::size_t i = 0; i < algebra.dimension(); ++i)
    drift = std::max(drift, (algebra.basis()[i] - paired.primary[i]).norm());
  if (drift > tol.residual_tol) numerical_failure("basis of doubled elements drifted", drift);

  GeneralDoubles out{std::move(algebra),
                     std::move(paired.companion),
                     bool(b) || ancilla == 1,
                     std::move(paired_essential.companion),
                     {},
                     {},
                     {},
                     std::move(red),
                     std::move(md),
                     ancilla};
  for (const Matrix& x_in : out.algebra.basis()) {
    const Matrix x = to_working(x_in, ancilla);
    out.zero_parts.push_back(off_support * x * off_support);
    out.essential_parts.push_back(out.reduction.R_prime * x * out.reduction.R_prime);
    out.restricted_parts.push_back(compress(out.reduction, x));
  }
  return out;
}

OracleDoubles oracle_doubles(const MatrixAlgebra& a, const MatrixAlgebra& b, const DensityOperator& rho,
                             const Tolerance& tol) {
  if (a.ambient_dim() != rho.dim() || b.ambient_dim() != rho.dim())
    throw Error(ErrorKind::DimensionMismatch, "algebras and state live on different spaces");
  // Solutions (c_a, c_b) of M_A c_a = M_B c_b, eliminated to the A side:
  // c_a is feasible iff M_A c_a has no component off range(M_B). The rank
  // decision is then taken on A coefficients alone.
  const Matrix ma = correlation_system(rho.matrix(), a.basis());
  const Matrix mb = correlation_system(rho.matrix(), b.basis());
  const Matrix qb = range_basis(mb, tol.rank_tol, 1.0);
  const Matrix off_b = ma - qb * (qb.adjoint() * ma);
  const Matrix null = LeastSquares(off_b, tol.rank_tol, 1.0).null_space();

  const Matrix elements = range_basis(a.stacked() * null, tol.rank_tol);
  std::vector<Matrix> span;
  for (Eigen::Index j = 0; j < elements.cols(); ++j) span.push_back(unvec(elements.col(j), rho.dim(), rho.dim()));
  OracleDoubles out{rebuild(rho.dim(), span, tol, "oracle algebra"), {}, {}};

  const DoubleSolver solver(rho, b, tol);
  for (const Matrix& x : out.algebra.basis()) {
    DoubleSolution sol = solver.solve(x);
    if (!sol.double_op) numerical_failure("oracle element has no double", sol.residual);
    out.doubles.push_back(std::move(*sol.double_op));
    out.solution_dims.push_back(sol.solution_dim);
  }
  return out;
}

double max_commutator(const MatrixAlgebra& a, const MatrixAlgebra& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw Error(ErrorKind::DimensionMismatch, "algebras live on different spaces");
  const double d = static_cast<double>(a.ambient_dim());
  double worst = 0.0;
  if (static_cast<double>(a.dimension() * b.dimension()) * d * d * d <= 3e8) {
    for (const Matrix& x : a.basis())
      for (const Matrix& y : b.basis()) worst = std::max(worst, commutator(x, y).norm());
    return worst;
  }
  // A generic unit element of one algebra commutes with a basis of the other
  // only if every element does, almost surely.
  Rng rng(kCommuteSeed);
  const Matrix ga = a.element(rng.gaussian_vector(a.dimension()).normalized());
  const Matrix gb = b.element(rng.gaussian_vector(b.dimension()).normalized());
  for (const Matrix& y : b.basis()) worst = std::max(worst, commutator(ga, y).norm());
  for (const Matrix& x : a.basis()) worst = std::max(worst, commutator(x, gb).norm());
  return worst;
}

DoublesAlgebra doubles_algebra(const MatrixAlgebra& a, const MatrixAlgebra& b, const DensityOperator& rho,
                               const Tolerance& tol, Path path, bool throw_on_disagreement) {
  if (a.ambient_dim() != rho.dim() || b.ambient_dim() != rho.dim())
    throw Error(ErrorKind::DimensionMismatch, "algebras and state live on different spaces");
  const double comm = max_commutator(a, b);
  if (comm > tol.residual_tol) {
    std::ostringstream msg;
    msg << "algebras do not commute (largest commutator " << comm << ")";
    throw Error(ErrorKind::NonCommutingAlgebras, msg.str());
  }

  std::optional<GeneralDoubles> modular;
  std::optional<OracleDoubles> oracle;
  if (path != Path::Oracle) modular = general_doubles(a, b, rho, tol);
  if (path != Path::Modular) oracle = oracle_doubles(a, b, rho, tol);

  bool agree = true;
  double discrepancy = 0.0;
  if (modular && oracle) {
    agree = span_equal(modular->algebra, oracle->algebra, tol);
    const Matrix s = determined_subspace(a, rho, tol);
    const DoubleSolver solver(rho, b, tol);
    for (std::size_t i = 0; i < modular->algebra.dimension(); ++i) {
      const Matrix& x = modular->algebra.basis()[i];
      const Matrix& mine = modular->doubles[i];
      const DoubleSolution sol = solver.solve(x);
      if (!sol.double_op) {
        agree = false;
        discrepancy = std::max(discrepancy, sol.residual);
        continue;
      }
      const double gap = ((mine - *sol.double_op) * s).norm();
      discrepancy = std::max(discrepancy, gap);
      if (gap > tol.residual_tol * std::max(mine.norm(), 1.0)) agree = false;
    }
    if (!agree && throw_on_disagreement) {
      std::ostringstream msg;
      msg << "modular path (dimension " << modular->algebra.dimension() << ") and oracle path (dimension "
          << oracle->algebra.dimension() << ") disagree; largest double mismatch " << discrepancy;
      throw Error(ErrorKind::PathDisagreement, msg.str());
    }
  }

  MatrixAlgebra algebra = modular ? modular->algebra : oracle->algebra;
  std::vector<Matrix> doubles = modular ? modular->doubles : oracle->doubles;
  return DoublesAlgebra{std::move(algebra), std::move(doubles), path, std::move(modular), std::move(oracle),
                        agree, discrepancy};
}

}  // namespace epr
