#pragma once

// Seeded instance generators and the module-level property checks. Shared by
// the unit tests and the acceptance runner so both exercise the same code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "epr/algebra.hpp"
#include "epr/doubles.hpp"
#include "epr/modular.hpp"
#include "epr/numerics.hpp"
#include "epr/random.hpp"
#include "epr/states.hpp"
#include "oracles.hpp"

namespace support {

using namespace epr;

struct Check {
  bool ok = true;
  double worst = 0.0;  // largest residual seen
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
  void bound(double value, double limit, const std::string& what) {
    worst = std::max(worst, value);
    if (!(value <= limit)) {
      std::ostringstream msg;
      msg << what << ": " << value << " > " << limit;
      fail(msg.str());
    }
  }
  void expect(bool cond, const std::string& what) {
    if (!cond) fail(what);
  }
  void merge(const Check& other) {
    worst = std::max(worst, other.worst);
    if (!other.ok) fail(other.detail);
  }
};

// ---------------------------------------------------------------------------
// Generators

/// Coefficient matrix with Gaussian entries; full rank with probability one.
inline Matrix random_coefficients(Rng& rng, std::size_t a, std::size_t b) {
  Matrix c = rng.ginibre(a, b);
  return c / c.norm();
}

/// Coefficient matrix U diag(sqrt(p)) V^T with Haar frames and the given spectrum of rho_A.
inline Matrix coefficients_with_spectrum(Rng& rng, const std::vector<double>& p) {
  const auto d = static_cast<Eigen::Index>(p.size());
  RealVector s(d);
  double total = 0.0;
  for (double x : p) total += x;
  for (Eigen::Index i = 0; i < d; ++i) s(i) = std::sqrt(p[static_cast<std::size_t>(i)] / total);
  return rng.haar_unitary(p.size()) * s.cast<Complex>().asDiagonal() * rng.haar_unitary(p.size()).transpose();
}

/// Spectrum with one value repeated m times and the rest distinct.
inline std::vector<double> degenerate_spectrum(Rng& rng, std::size_t d, std::size_t m) {
  std::vector<double> p;
  const double shared = rng.uniform(0.5, 1.5);
  for (std::size_t i = 0; i < m; ++i) p.push_back(shared);
  for (std::size_t i = m; i < d; ++i) p.push_back(shared + 0.3 * static_cast<double>(i - m + 1) + rng.uniform(0.0, 0.1));
  return p;
}

inline std::vector<double> distinct_spectrum(Rng& rng, std::size_t d) {
  std::vector<double> p;
  for (std::size_t i = 0; i < d; ++i) p.push_back(0.2 + static_cast<double>(i) + rng.uniform(0.0, 0.5));
  return p;
}

/// A random unital *-algebra U ((+)_k M_{n_k} (x) 1_{m_k} (+) C 1_rest) U* on C^d.
inline MatrixAlgebra random_algebra(Rng& rng, std::size_t d) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t used = 0;
  while (used < d) {
    const std::size_t left = d - used;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(0.0, 0.999) * static_cast<double>(std::min<std::size_t>(left, 3)));
    const std::size_t max_m = left / n;
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform(0.0, 0.999) * static_cast<double>(std::min<std::size_t>(max_m, 2)));
    blocks.emplace_back(n, m);
    used += n * m;
  }
  const Matrix u = rng.haar_unitary(d);
  std::vector<Matrix> gens;
  for (int g = 0; g < 2; ++g) {
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::Index at = 0;
    for (const auto& [n, m] : blocks) {
      const auto sz = static_cast<Eigen::Index>(n * m);
      x.block(at, at, sz, sz) = oracle::kron(rng.ginibre(n, n), oracle::eye(static_cast<Eigen::Index>(m)));
      at += sz;
    }
    gens.push_back(u * x * u.adjoint());
  }
  return generate_algebra(gens, d);
}

inline Matrix random_element(Rng& rng, const MatrixAlgebra& alg) {
  return alg.element(rng.gaussian_vector(alg.dimension()));
}

inline Matrix hermitian_element(Rng& rng, const MatrixAlgebra& alg) {
  const Matrix x = random_element(rng, alg);
  return 0.5 * (x + x.adjoint());
}

inline double max_commutator_norm(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (const Matrix& x : a)
    for (const Matrix& y : b) worst = std::max(worst, (x * y - y * x).norm());
  return worst;
}

// ---------------------------------------------------------------------------
// numerics

inline Check polar_properties(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  // Involutive S: K conj(K) = 1 for K = M conj(M)^{-1}, as for every modular S.
  const Matrix m = rng.ginibre(dim, dim) + 2.0 * identity(dim);
  const AntilinearOperator s(m * m.conjugate().inverse());
  const AntilinearPolar polar = antilinear_polar(s);
  for (int t = 0; t < 100; ++t) {
    const Vector x = rng.gaussian_vector(dim);
    c.bound((polar.J.apply(polar.J.apply(x)) - x).norm() / x.norm(), 1e-10, "J involution");
    c.bound(std::abs(polar.J.apply(x).norm() - x.norm()) / x.norm(), 1e-10, "J isometry");
  }
  const Matrix root = spectral_apply(hermitian_eig(polar.delta), [](double v) { return std::sqrt(v); });
  c.bound((polar.J.after(root).kernel() - s.kernel()).norm() / s.kernel().norm(), 1e-8, "S = J Delta^1/2");
  c.bound((polar.delta - s.adjoint().compose(s)).norm() / polar.delta.norm(), 1e-10, "Delta = S*S");
  return c;
}

inline Check span_properties(std::uint64_t seed, std::size_t dim, std::size_t count) {
  Check c;
  Rng rng(seed);
  std::vector<Matrix> family;
  for (std::size_t i = 0; i < count; ++i) family.push_back(rng.ginibre(dim, dim));
  // Include dependent members as well.
  family.push_back(family[0] + 2.0 * family[1]);
  const std::vector<Matrix> basis = orthonormal_span(family);
  const auto n = static_cast<Eigen::Index>(basis.size());
  Matrix gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      gram(i, j) = hs_inner(basis[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(j)]);
  c.bound((gram - identity(basis.size())).norm(), 1e-10, "Gram matrix");
  c.expect(oracle::same_span(basis, family), "span preserved");
  return c;
}

inline Check eig_properties(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  const Matrix h = rng.hermitian(dim);
  const EigenDecomposition e = hermitian_eig(h);
  c.bound(std::abs(e.values.sum() - h.trace().real()), 1e-10 * h.norm(), "eigenvalue sum vs trace");
  c.bound((e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint() - h).norm(), 1e-10 * h.norm(),
          "reconstruction");
  c.bound((e.vectors.adjoint() * e.vectors - identity(dim)).norm(), 1e-10, "unitarity");
  for (Eigen::Index i = 1; i < e.values.size(); ++i) c.expect(e.values(i - 1) <= e.values(i), "ascending order");
  return c;
}

// ---------------------------------------------------------------------------
// algebra

inline Check double_commutant_property(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  const MatrixAlgebra alg = random_algebra(rng, dim);
  const MatrixAlgebra comm = commutant(alg);
  const MatrixAlgebra back = commutant(comm);
  c.expect(span_equal(alg, back), "double commutant equals the algebra");
  c.bound(max_commutator_norm(comm.basis(), alg.basis()), 1e-9, "commutant elements commute");
  c.expect(oracle::same_span(comm.basis(), oracle::commutant(alg.basis(), static_cast<Eigen::Index>(dim))),
           "commutant matches Kronecker null space");
  return c;
}

inline Check centralizer_property(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  // Full matrix algebra: centralizer is {A : [A, rho] = 0}.
  const Matrix g = rng.ginibre(dim, dim);
  Matrix rho = g * g.adjoint();
  if (seed % 2 == 0) {
    // Force a degenerate eigenvalue so the centralizer is non-abelian.
    const EigenDecomposition e = hermitian_eig(rho);
    RealVector v = e.values;
    v(1) = v(0);
    rho = e.vectors * v.cast<Complex>().asDiagonal() * e.vectors.adjoint();
  }
  rho /= rho.trace();
  const MatrixAlgebra full = MatrixAlgebra::full(dim);
  const MatrixAlgebra cent = centralizer(full, rho);
  c.expect(oracle::same_span(cent.basis(), oracle::commutant({rho}, static_cast<Eigen::Index>(dim))),
           "centralizer of M_d equals commutant of rho");
  // Subalgebra case: containment and validity.
  const MatrixAlgebra alg = random_algebra(rng, dim);
  const MatrixAlgebra sub = centralizer(alg, rho);
  c.expect(span_contains(alg, sub), "centralizer inside the algebra");
  const MatrixAlgebra::Defects def = sub.defects(MatrixAlgebra::ClosureCheck::Exhaustive);
  c.bound(std::max({def.unit, def.adjoint, def.product}), 1e-8, "centralizer closure");
  for (const Matrix& a : sub.basis())
    for (const Matrix& x : alg.basis()) c.bound(std::abs((rho * (a * x - x * a)).trace()), 1e-8, "tr(rho [A, X])");
  return c;
}

inline Check block_property(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  const MatrixAlgebra alg = random_algebra(rng, dim);
  const BlockStructure bs = block_decomposition(alg);
  c.bound(off_pattern_mass(alg, bs), 1e-8, "off-pattern mass");
  const auto n = static_cast<Eigen::Index>(dim);
  c.bound((bs.conjugating_unitary.adjoint() * bs.conjugating_unitary - identity(dim)).norm(), 1e-8, "unitarity");
  std::size_t algebra_dim = 0, covered = 0;
  for (const Block& b : bs.blocks) {
    algebra_dim += b.size * b.size;
    covered += b.size * b.multiplicity;
  }
  c.expect(algebra_dim == alg.dimension(), "sum of n_k^2 equals the algebra dimension");
  c.expect(covered <= static_cast<std::size_t>(n), "blocks fit the ambient space");
  return c;
}

// ---------------------------------------------------------------------------
// states

inline Check state_properties(std::uint64_t seed, std::size_t a, std::size_t b) {
  Check c;
  Rng rng(seed);
  const BipartiteState psi = BipartiteState::from_coefficients(random_coefficients(rng, a, b));
  const DensityOperator ra = reduced_density(psi, Side::A), rb = reduced_density(psi, Side::B);
  RealVector ea = hermitian_eig(ra.matrix()).values.reverse(), eb = hermitian_eig(rb.matrix()).values.reverse();
  const Eigen::Index k = std::min(ea.size(), eb.size());
  c.bound((ea.head(k) - eb.head(k)).norm(), 1e-9, "nonzero spectra agree");
  const AntilinearOperator l = l_psi(psi);
  c.bound((l.adjoint().compose(l) - ra.matrix()).norm(), 1e-9, "L*L = rho_A");
  const Matrix c0 = oracle::coefficients(psi.vector(), static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  c.bound((ra.matrix() - oracle::rho_a(c0)).norm(), 1e-10, "rho_A against coefficient formula");
  c.bound((partial_trace_second(psi.vector() * psi.vector().adjoint(), a, b) - ra.matrix()).norm(), 1e-10,
          "rho_A against partial trace");
  // Purification round trip.
  const BipartiteState p = purify(ra);
  c.bound((partial_trace_second(p.vector() * p.vector().adjoint(), a, a) - ra.matrix()).norm(), 1e-10,
          "purification round trip");
  return c;
}

inline Check cyclic_separating_duality(std::uint64_t seed, std::size_t dim) {
  Check c;
  Rng rng(seed);
  const MatrixAlgebra alg = random_algebra(rng, dim);
  const MatrixAlgebra comm = commutant(alg);
  // Alternate between generic vectors and vectors confined to a subspace.
  Vector psi = rng.unit_vector(dim);
  if (seed % 2 == 1) {
    psi.tail(static_cast<Eigen::Index>(dim / 2)).setZero();
    psi.normalize();
  }
  c.expect(is_cyclic(alg, psi) == is_separating(comm, psi), "cyclic for A iff separating for A'");
  c.expect(is_cyclic(comm, psi) == is_separating(alg, psi), "cyclic for A' iff separating for A");
  return c;
}

// ---------------------------------------------------------------------------
// modular

struct FactorInstance {
  std::size_t d;
  Matrix coeffs;
  Vector psi;
  MatrixAlgebra a;
  MatrixAlgebra b;
};

inline FactorInstance factor_instance(Matrix coeffs) {
  const auto d = static_cast<std::size_t>(coeffs.rows());
  Vector psi = oracle::from_coefficients(coeffs);
  return {d, std::move(coeffs), std::move(psi), MatrixAlgebra::left_factor(d, d), MatrixAlgebra::right_factor(d, d)};
}

inline Check modular_properties(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst =
      factor_instance(seed % 3 == 0 ? coefficients_with_spectrum(rng, degenerate_spectrum(rng, d, 2))
                                    : random_coefficients(rng, d, d));
  const ModularData md = modular_data(inst.a, inst.psi);
  c.expect(span_equal(conjugate_by_antiunitary(inst.a, md.J, false), commutant(inst.a)), "J A J = A'");
  c.bound((md.delta - oracle::closed_form_delta(inst.coeffs)).norm() / md.delta.norm(), 1e-8, "closed-form Delta");

  const MatrixAlgebra cent = centralizer(inst.a, inst.psi * inst.psi.adjoint());
  const Matrix a1 = random_element(rng, cent), a2 = random_element(rng, cent);
  for (const Matrix& x : {a1, a2}) {
    c.expect(commutes_with_delta(x, md), "centralizer element commutes with Delta");
    c.bound((md.delta * x * inst.psi - x * inst.psi).norm(), 1e-8 * x.norm(), "Delta A psi = A psi");
    c.bound((md.delta * x.adjoint() * inst.psi - x.adjoint() * inst.psi).norm(), 1e-8 * x.norm(),
            "Delta A* psi = A* psi");
    const Matrix xp = modular_double(x, md);
    c.bound((xp * inst.psi - x * inst.psi).norm(), 1e-8 * x.norm(), "A' psi = A psi");
    c.bound((xp.adjoint() * inst.psi - x.adjoint() * inst.psi).norm(), 1e-8 * x.norm(), "A'* psi = A* psi");
    const DoubleSolution sol = solve_double(DensityOperator::pure(inst.psi), x, inst.b);
    c.expect(sol.double_op.has_value() && sol.solution_dim == 0, "unique double in the commutant");
    if (sol.double_op) c.bound((*sol.double_op - xp).norm(), 1e-8 * std::max(1.0, x.norm()), "solver agrees with J A* J");
  }
  const Matrix lhs = modular_double(a1 * a2, md);
  const Matrix rhs = modular_double(a2, md) * modular_double(a1, md);
  c.bound((lhs - rhs).norm(), 1e-8 * std::max(1.0, (a1 * a2).norm()), "anti-homomorphism");
  return c;
}

// ---------------------------------------------------------------------------
// doubles

inline Check theorem_instance(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst = factor_instance(random_coefficients(rng, d, d));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const DoublesAlgebra res = doubles_algebra(inst.a, inst.b, rho, Tolerance::global(), Path::Modular);
  const MatrixAlgebra cent = centralizer(inst.a, rho.matrix());
  c.expect(span_equal(res.algebra, cent), "doubles algebra equals the centralizer");
  c.expect(oracle::same_span(res.algebra.basis(),
                             oracle::type_one_centralizer(oracle::rho_a(inst.coeffs), static_cast<Eigen::Index>(d))),
           "centralizer matches [X, rho_A] = 0");
  for (std::size_t i = 0; i < res.algebra.dimension(); ++i) {
    const DoubleCertificate cert = verify_double(rho, res.algebra.basis()[i], res.doubles[i]);
    c.bound(std::max(cert.residual_left, cert.residual_right), 1e-8, "two-sided residual of a basis double");
  }
  return c;
}

inline Check upper_bound_property(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst = factor_instance(coefficients_with_spectrum(rng, degenerate_spectrum(rng, d, 2)));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const MatrixAlgebra cent = centralizer(inst.a, rho.matrix());
  const DoubleSolver solver(rho, inst.b);
  std::vector<Matrix> trials = {random_element(rng, inst.a), random_element(rng, cent),
                                random_element(rng, cent) + 1e-3 * random_element(rng, inst.a)};
  int feasible = 0;
  for (const Matrix& x : trials) {
    const DoubleSolution sol = solver.solve(x);
    if (!sol.double_op) continue;
    ++feasible;
    c.expect(cent.contains(x), "element with a double lies in the centralizer");
  }
  c.expect(feasible >= 1, "centralizer elements are feasible");
  return c;
}

inline Check closure_property(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst = factor_instance(coefficients_with_spectrum(rng, degenerate_spectrum(rng, d, 2)));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const DoublesAlgebra res = doubles_algebra(inst.a, inst.b, rho);
  auto double_of = [&](const Matrix& x) {
    const Vector co = res.algebra.coefficients(x);
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < co.size(); ++i) out += co(i) * res.doubles[static_cast<std::size_t>(i)];
    return out;
  };
  const Matrix a1 = random_element(rng, res.algebra), a2 = random_element(rng, res.algebra);
  c.expect(res.algebra.contains(a1 * a2) && res.algebra.contains(a1.adjoint()), "products and adjoints stay doubled");
  const double scale = std::max(1.0, (a1 * a2).norm());
  c.bound((double_of(a1 * a2) - double_of(a2) * double_of(a1)).norm(), 1e-8 * scale, "double(A1 A2) = A2' A1'");
  c.bound((double_of(a1.adjoint()) - double_of(a1).adjoint()).norm(), 1e-8 * std::max(1.0, a1.norm()),
          "double(A*) = double(A)*");
  c.expect(verify_double(rho, a1 * a2, double_of(a2) * double_of(a1)).verdict, "A2' A1' is a double of A1 A2");
  return c;
}

/// Random commuting pair (A, B) with B a proper subalgebra of the commutant.
inline MatrixAlgebra random_sub_commutant(Rng& rng, std::size_t d, int generators) {
  std::vector<Matrix> gens;
  if (generators == 1) {
    gens.push_back(oracle::kron(oracle::eye(static_cast<Eigen::Index>(d)), rng.hermitian(d)));
  } else {
    // A unitary image of diag plus a block on the first d-1 coordinates: the
    // generated algebra is M_{d-1} (+) C, proper in M_d.
    const Matrix u = rng.haar_unitary(d);
    RealVector diag(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < diag.size(); ++i) diag(i) = rng.normal();
    Matrix block = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    block.topLeftCorner(static_cast<Eigen::Index>(d - 1), static_cast<Eigen::Index>(d - 1)) = rng.ginibre(d - 1, d - 1);
    const Matrix id = oracle::eye(static_cast<Eigen::Index>(d));
    gens.push_back(oracle::kron(id, u * diag.cast<Complex>().asDiagonal() * u.adjoint()));
    gens.push_back(oracle::kron(id, u * block * u.adjoint()));
  }
  return generate_algebra(gens, d * d);
}

inline Check path_equivalence(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const int kind = static_cast<int>(seed % 4);
  Matrix coeffs;
  if (kind == 0) {
    coeffs = random_coefficients(rng, d, d);
  } else if (kind == 1) {
    coeffs = coefficients_with_spectrum(rng, degenerate_spectrum(rng, d, 2));
  } else {
    coeffs = random_coefficients(rng, d, d - 1);
    Matrix padded = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    padded.leftCols(static_cast<Eigen::Index>(d - 1)) = coeffs;
    coeffs = padded * rng.haar_unitary(d).transpose();
  }
  const FactorInstance inst = factor_instance(coeffs);
  const MatrixAlgebra b = kind == 3 ? random_sub_commutant(rng, d, 2) : inst.b;
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const DoublesAlgebra res = doubles_algebra(inst.a, b, rho, Tolerance::global(), Path::Both, false);
  c.expect(res.paths_agree, "modular and oracle paths agree");
  c.bound(res.double_discrepancy, 1e-8, "doubles agree on the determined subspace");
  return c;
}

inline Check scalar_residual_property(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst = factor_instance(coefficients_with_spectrum(rng, degenerate_spectrum(rng, d, 2)));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const DoublesAlgebra res = doubles_algebra(inst.a, inst.b, rho, Tolerance::global(), Path::Modular);
  // True doubles of Hermitian elements, and perturbed candidates.
  const Vector co = rng.gaussian_vector(res.algebra.dimension());
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(d * d), static_cast<Eigen::Index>(d * d));
  Matrix xp = x;
  for (std::size_t i = 0; i < res.algebra.dimension(); ++i) {
    x += co(static_cast<Eigen::Index>(i)) * res.algebra.basis()[i];
    xp += co(static_cast<Eigen::Index>(i)) * res.doubles[i];
  }
  const Matrix h = 0.5 * (x + x.adjoint()), hp = 0.5 * (xp + xp.adjoint());
  const Matrix noise = hermitian_element(rng, inst.b);
  for (double eps : {0.0, 1e-6, 1e-2, 1.0}) {
    const DoubleCertificate cert = verify_double(rho, h, hp + eps * noise);
    c.expect(cert.eq1_bounds_hold, "scalar and two-sided residual bounds");
    c.expect(cert.verdict == cert.eq1_verdict, "scalar and two-sided verdicts agree");
    const double scale = std::max({h.norm(), (hp + eps * noise).norm(), 1.0});
    // Hermitian difference: eq1 = |rho D|^2 exactly for a pure state.
    c.bound(std::abs(cert.residual_eq1 - cert.residual_left * cert.residual_left), 1e-12 * scale * scale,
            "eq1 equals |rho D|^2 for pure rho");
  }
  return c;
}

inline Check vector_state_property(std::uint64_t seed, std::size_t d) {
  Check c;
  Rng rng(seed);
  const FactorInstance inst = factor_instance(random_coefficients(rng, d, d));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const MatrixAlgebra cent = centralizer(inst.a, rho.matrix());
  const ModularData md = modular_data(inst.a, inst.psi);
  const Matrix x = random_element(rng, cent);
  const Matrix good = modular_double(x, md);
  const Matrix bad = good + 0.1 * random_element(rng, inst.b);
  for (const Matrix& cand : {good, bad}) {
    const double scale = std::max({x.norm(), cand.norm(), 1.0});
    const bool vector_eqs = (x * inst.psi - cand * inst.psi).norm() <= 1e-8 * scale &&
                            (x.adjoint() * inst.psi - cand.adjoint() * inst.psi).norm() <= 1e-8 * scale;
    c.expect(verify_double(rho, x, cand).verdict == vector_eqs, "verdict matches the two vector equations");
  }
  return c;
}

inline Check spectrum_artifact(std::uint64_t seed, std::size_t d, std::size_t degeneracy) {
  Check c;
  Rng rng(seed);
  const std::vector<double> spectrum =
      degeneracy <= 1 ? distinct_spectrum(rng, d) : degenerate_spectrum(rng, d, degeneracy);
  const FactorInstance inst = factor_instance(coefficients_with_spectrum(rng, spectrum));
  const DensityOperator rho = DensityOperator::pure(inst.psi);
  const DoublesAlgebra res = doubles_algebra(inst.a, inst.b, rho);
  // Compare the first-factor algebra's blocks with the spectrum's multiplicities.
  std::vector<Matrix> factors;
  for (const Matrix& x : res.algebra.basis()) factors.push_back(partial_trace_second(x, d, d) / static_cast<double>(d));
  const BlockStructure bs = block_decomposition(MatrixAlgebra::from_span(d, factors));
  std::vector<int> sizes;
  for (const Block& b : bs.blocks) {
    c.expect(b.multiplicity == 1, "factor-level blocks have multiplicity one");
    sizes.push_back(static_cast<int>(b.size));
  }
  std::vector<int> expected = oracle::multiplicities(oracle::rho_a(inst.coeffs));
  std::sort(expected.rbegin(), expected.rend());
  c.expect(sizes == expected, "block sizes equal spectral multiplicities");
  // Ambient algebra: blocks (n_k, d).
  for (const Block& b : block_decomposition(res.algebra).blocks)
    c.expect(b.multiplicity == d, "ambient blocks carry the second factor");
  if (degeneracy <= 1) c.expect(max_commutator_norm(res.algebra.basis(), res.algebra.basis()) <= 1e-8, "abelian");
  return c;
}

}  // namespace support
