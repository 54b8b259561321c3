#include "epr/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "epr/random.hpp"

namespace epr {

namespace {

constexpr std::uint64_t kCommutantSeed = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kClosureSeed = 0x2545f4914f6cdd1dULL;
constexpr std::uint64_t kBlockSeed = 0xd1b54a32d192ed03ULL;

// Work estimate for the exhaustive product check; beyond this the check
// falls back to random pairs.
constexpr double kExhaustiveBudget = 3e8;

std::vector<Matrix> hermitian_parts(const std::vector<Matrix>& xs) {
  std::vector<Matrix> out;
  out.reserve(2 * xs.size());
  const Complex i(0.0, 1.0);
  for (const Matrix& x : xs) {
    out.push_back(0.5 * (x + x.adjoint()));
    out.push_back((x - x.adjoint()) / (2.0 * i));
  }
  return out;
}

/// Groups ascending eigenvalues whose consecutive gaps are below the tolerance.
std::vector<std::vector<Eigen::Index>> cluster_eigenvalues(const RealVector& values, double tol) {
  std::vector<std::vector<Eigen::Index>> clusters;
  if (values.size() == 0) return clusters;
  const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  clusters.push_back({0});
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) - values(i - 1) > tol * scale)
      clusters.push_back({i});
    else
      clusters.back().push_back(i);
  }
  return clusters;
}

/// Horizontal concatenation [B_0 B_1 ...]; B_i * H holds every product B_i B_j
/// in column-major order, i.e. the vectorized products side by side.
Matrix concat(const std::vector<Matrix>& xs, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix h(d, d * static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) h.middleCols(static_cast<Eigen::Index>(j) * d, d) = xs[j];
  return h;
}

Matrix unit_block(std::size_t dim, std::size_t i, std::size_t j) {
  Matrix e = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

MatrixAlgebra::MatrixAlgebra(std::size_t dim, std::vector<Matrix> basis)
    : dim_(dim), basis_(std::move(basis)) {
  const auto d2 = static_cast<Eigen::Index>(dim_ * dim_);
  stacked_.resize(d2, static_cast<Eigen::Index>(basis_.size()));
  for (std::size_t k = 0; k < basis_.size(); ++k)
    stacked_.col(static_cast<Eigen::Index>(k)) = vec(basis_[k]);
}

MatrixAlgebra MatrixAlgebra::from_span(std::size_t ambient_dim, std::span<const Matrix> spanning,
                                       const Tolerance& tol, ClosureCheck check) {
  if (ambient_dim == 0) throw Error(ErrorKind::DimensionMismatch, "ambient dimension must be positive");
  for (const Matrix& x : spanning) require_square(x, ambient_dim, "algebra element");
  std::vector<Matrix> basis = orthonormal_span(spanning, tol);
  if (basis.empty()) throw Error(ErrorKind::InvalidAlgebra, "empty span is not unital");
  MatrixAlgebra alg(ambient_dim, std::move(basis));
  const Defects def = alg.defects(check);
  std::ostringstream msg;
  if (def.unit > tol.residual_tol) {
    msg << "span does not contain the identity (residual " << def.unit << ")";
    throw Error(ErrorKind::InvalidAlgebra, msg.str());
  }
  if (def.adjoint > tol.residual_tol) {
    msg << "span is not closed under adjoint (residual " << def.adjoint << ")";
    throw Error(ErrorKind::InvalidAlgebra, msg.str());
  }
  if (def.product > tol.residual_tol) {
    msg << "span is not closed under multiplication (residual " << def.product << ")";
    throw Error(ErrorKind::InvalidAlgebra, msg.str());
  }
  return alg;
}

MatrixAlgebra MatrixAlgebra::scalars(std::size_t dim) {
  return MatrixAlgebra(dim, {identity(dim) / std::sqrt(static_cast<double>(dim))});
}

MatrixAlgebra MatrixAlgebra::full(std::size_t dim) { return left_factor(dim, 1); }

MatrixAlgebra MatrixAlgebra::left_factor(std::size_t dim_a, std::size_t dim_b) {
  std::vector<Matrix> basis;
  const Matrix id = identity(dim_b) / std::sqrt(static_cast<double>(dim_b));
  for (std::size_t i = 0; i < dim_a; ++i)
    for (std::size_t j = 0; j < dim_a; ++j) basis.push_back(kron(unit_block(dim_a, i, j), id));
  return MatrixAlgebra(dim_a * dim_b, std::move(basis));
}

MatrixAlgebra MatrixAlgebra::right_factor(std::size_t dim_a, std::size_t dim_b) {
  std::vector<Matrix> basis;
  const Matrix id = identity(dim_a) / std::sqrt(static_cast<double>(dim_a));
  for (std::size_t i = 0; i < dim_b; ++i)
    for (std::size_t j = 0; j < dim_b; ++j) basis.push_back(kron(id, unit_block(dim_b, i, j)));
  return MatrixAlgebra(dim_a * dim_b, std::move(basis));
}

MatrixAlgebra MatrixAlgebra::tensor_identity(std::size_t ancilla_dim) const {
  if (ancilla_dim == 1) return *this;
  const Matrix id = identity(ancilla_dim) / std::sqrt(static_cast<double>(ancilla_dim));
  std::vector<Matrix> basis;
  basis.reserve(basis_.size());
  for (const Matrix& b : basis_) basis.push_back(kron(b, id));
  return MatrixAlgebra(dim_ * ancilla_dim, std::move(basis));
}

Vector MatrixAlgebra::coefficients(const Matrix& x) const {
  require_square(x, dim_, "operator");
  return stacked_.adjoint() * vec(x);
}

Matrix MatrixAlgebra::element(const Vector& coefficients) const {
  if (static_cast<std::size_t>(coefficients.size()) != basis_.size())
    throw Error(ErrorKind::DimensionMismatch, "coefficient vector has the wrong length");
  return unvec(stacked_ * coefficients, dim_, dim_);
}

Matrix MatrixAlgebra::project(const Matrix& x) const { return element(coefficients(x)); }

double MatrixAlgebra::membership_residual(const Matrix& x) const {
  const Vector v = vec(x);
  return (v - stacked_ * (stacked_.adjoint() * v)).norm();
}

bool MatrixAlgebra::contains(const Matrix& x, const Tolerance& tol) const {
  require_square(x, dim_, "operator");
  return membership_residual(x) <= tol.residual_tol * std::max(x.norm(), 1.0);
}

MatrixAlgebra::Defects MatrixAlgebra::defects(ClosureCheck check) const {
  Defects def;
  def.unit = membership_residual(identity(dim_)) / std::sqrt(static_cast<double>(dim_));
  for (const Matrix& b : basis_) def.adjoint = std::max(def.adjoint, membership_residual(b.adjoint()));

  const double b = static_cast<double>(basis_.size());
  const double d = static_cast<double>(dim_);
  const bool exhaustive =
      check == ClosureCheck::Exhaustive || b * b * d * d * (d + 2.0 * b) <= kExhaustiveBudget;
  if (exhaustive) {
    const Matrix h = concat(basis_, dim_);
    const auto d2 = static_cast<Eigen::Index>(dim_ * dim_);
    const auto n = static_cast<Eigen::Index>(basis_.size());
    for (const Matrix& left : basis_) {
      const Matrix products = left * h;
      Eigen::Map<const Matrix> cols(products.data(), d2, n);
      const Matrix residual = cols - stacked_ * (stacked_.adjoint() * cols);
      def.product = std::max(def.product, residual.colwise().norm().maxCoeff());
    }
  } else {
    // A nonzero bilinear defect is detected by random pairs with probability one.
    Rng rng(kClosureSeed ^ basis_.size());
    for (int trial = 0; trial < 8; ++trial) {
      Matrix x = rng.complex_combination(basis_);
      Matrix y = rng.complex_combination(basis_);
      x /= x.norm();
      y /= y.norm();
      def.product = std::max(def.product, membership_residual(x * y));
    }
  }
  return def;
}

// ---------------------------------------------------------------------------

bool span_contains(const MatrixAlgebra& outer, const MatrixAlgebra& inner, const Tolerance& tol) {
  if (outer.ambient_dim() != inner.ambient_dim()) return false;
  for (const Matrix& x : inner.basis())
    if (outer.membership_residual(x) > tol.residual_tol) return false;
  return true;
}

bool span_equal(const MatrixAlgebra& a, const MatrixAlgebra& b, const Tolerance& tol) {
  return a.dimension() == b.dimension() && span_contains(a, b, tol) && span_contains(b, a, tol);
}

MatrixAlgebra generate_algebra(std::span<const Matrix> generators, std::size_t ambient_dim,
                               const Tolerance& tol) {
  if (ambient_dim == 0) throw Error(ErrorKind::DimensionMismatch, "ambient dimension must be positive");
  for (const Matrix& g : generators) require_square(g, ambient_dim, "generator");

  // Every candidate below has Hilbert-Schmidt norm at most one.
  SpanAccumulator acc(ambient_dim, ambient_dim, tol.rank_tol);
  acc.add(identity(ambient_dim) / std::sqrt(static_cast<double>(ambient_dim)));
  for (const Matrix& g : generators) {
    const double n = g.norm();
    if (n == 0.0) continue;
    acc.add(g / n);
    acc.add(g.adjoint() / n);
  }

  const std::size_t full = ambient_dim * ambient_dim;
  const auto d = static_cast<Eigen::Index>(ambient_dim);
  for (std::size_t round = 0; round < full && acc.size() < full; ++round) {
    const std::size_t before = acc.size();
    const std::vector<Matrix> current = acc.basis();
    const Matrix h = concat(current, ambient_dim);
    for (const Matrix& left : current) {
      const Matrix products = left * h;
      for (std::size_t j = 0; j < current.size() && acc.size() < full; ++j)
        acc.add(products.middleCols(static_cast<Eigen::Index>(j) * d, d));
    }
    if (acc.size() == before) break;
  }
  const std::vector<Matrix> basis = acc.basis();
  return MatrixAlgebra::from_span(ambient_dim, basis, tol);
}

CommutingSubspace commuting_subspace(const std::vector<Matrix>& candidates,
                                     const std::vector<Matrix>& constraints, const Tolerance& tol) {
  CommutingSubspace out;
  if (candidates.empty()) {
    out.coefficients = Matrix(0, 0);
    return out;
  }
  const auto dim = static_cast<std::size_t>(candidates.front().rows());
  const auto n = static_cast<Eigen::Index>(candidates.size());

  // Scalar parts commute with everything; keep normalized traceless parts.
  std::vector<Matrix> reduced;
  for (const Matrix& c : constraints) {
    require_square(c, dim, "constraint");
    const Matrix traceless = c - (c.trace() / static_cast<double>(dim)) * identity(dim);
    const double norm = traceless.norm();
    if (norm > tol.rank_tol * std::max(c.norm(), 1e-300)) reduced.push_back(traceless / norm);
  }
  if (reduced.empty()) {
    out.elements = candidates;
    out.coefficients = Matrix::Identity(n, n);
    return out;
  }

  // A generic element G of the constraint span (with G*) usually already cuts
  // out the answer; constraints that the tentative result still violates are
  // added until every constraint is met.
  Rng rng(kCommutantSeed ^ (candidates.size() * 31 + reduced.size()));
  std::vector<Matrix> active;
  {
    Matrix g = rng.complex_combination(reduced);
    g /= g.norm();
    active.push_back(g);
    active.push_back(g.adjoint());
  }
  const auto d2 = static_cast<Eigen::Index>(dim * dim);
  for (std::size_t iteration = 0; iteration <= reduced.size() + 1; ++iteration) {
    Matrix system(d2 * static_cast<Eigen::Index>(active.size()), n);
    for (std::size_t a = 0; a < active.size(); ++a)
      for (Eigen::Index i = 0; i < n; ++i)
        system.block(static_cast<Eigen::Index>(a) * d2, i, d2, 1) =
            vec(commutator(candidates[static_cast<std::size_t>(i)], active[a]));
    const LeastSquares ls(system, tol.rank_tol, 1.0);
    const Matrix null = ls.null_space();

    out.elements.clear();
    for (Eigen::Index k = 0; k < null.cols(); ++k) {
      Matrix x = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < n; ++i) x += null(i, k) * candidates[static_cast<std::size_t>(i)];
      out.elements.push_back(std::move(x));
    }
    out.coefficients = null;
    if (out.elements.empty()) return out;

    Matrix probe = rng.complex_combination(out.elements);
    probe /= probe.norm();
    std::vector<std::pair<double, std::size_t>> violations;
    for (std::size_t c = 0; c < reduced.size(); ++c) {
      const double r = commutator(probe, reduced[c]).norm();
      if (r > tol.residual_tol) violations.emplace_back(r, c);
    }
    if (violations.empty()) return out;
    std::sort(violations.rbegin(), violations.rend());
    for (std::size_t v = 0; v < std::min<std::size_t>(violations.size(), 4); ++v)
      active.push_back(reduced[violations[v].second]);
  }
  throw Error(ErrorKind::NumericalFailure, "commuting subspace did not stabilize");
}

MatrixAlgebra commutant(const MatrixAlgebra& alg, const Tolerance& tol) {
  const std::size_t dim = alg.ambient_dim();
  // Anything commuting with the algebra commutes with a generic Hermitian
  // element H, hence is block diagonal over H's eigenspaces.
  Rng rng(kCommutantSeed ^ alg.dimension());
  const std::vector<Matrix> parts = hermitian_parts(alg.basis());
  const Matrix h = rng.real_combination(parts);
  const EigenDecomposition eig = hermitian_eig(h, tol);
  std::vector<Matrix> candidates;
  for (const auto& cluster : cluster_eigenvalues(eig.values, tol.residual_tol))
    for (Eigen::Index p : cluster)
      for (Eigen::Index q : cluster)
        candidates.push_back(eig.vectors.col(p) * eig.vectors.col(q).adjoint());
  const CommutingSubspace sub = commuting_subspace(candidates, alg.basis(), tol);
  return MatrixAlgebra::from_span(dim, sub.elements, tol);
}

MatrixAlgebra center(const MatrixAlgebra& alg, const Tolerance& tol) {
  const CommutingSubspace sub = commuting_subspace(alg.basis(), alg.basis(), tol);
  return MatrixAlgebra::from_span(alg.ambient_dim(), sub.elements, tol);
}

MatrixAlgebra centralizer(const MatrixAlgebra& alg, const Matrix& rho, const Tolerance& tol) {
  require_square(rho, alg.ambient_dim(), "density operator");
  if (auto defect = density_defect(rho, tol))
    throw Error(ErrorKind::InvalidState, "rho fails " + *defect);

  // tr(rho X) = tr(P(rho) X) for X in the algebra, where P is the HS projection,
  // so P(rho) carries exactly the functional induced on the algebra.
  const Matrix functional = alg.project(rho);
  const auto b = static_cast<Eigen::Index>(alg.dimension());
  const auto d2 = static_cast<Eigen::Index>(alg.ambient_dim() * alg.ambient_dim());
  Matrix transposed(d2, b), commutators(d2, b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const Matrix& basis_k = alg.basis()[static_cast<std::size_t>(k)];
    transposed.col(k) = vec(basis_k.transpose());
    commutators.col(k) = vec(commutator(functional, basis_k));
  }
  // C(j,k) = tr(rho B_k B_j) - tr(rho B_j B_k) = tr(B_j [rho, B_k]).
  const Matrix conditions = transposed.transpose() * commutators;
  const Matrix null = LeastSquares(conditions, tol.rank_tol, 1.0).null_space();
  std::vector<Matrix> elements;
  for (Eigen::Index k = 0; k < null.cols(); ++k) elements.push_back(alg.element(null.col(k)));
  return MatrixAlgebra::from_span(alg.ambient_dim(), elements, tol);
}

MatrixAlgebra intersect(const MatrixAlgebra& a, const MatrixAlgebra& b, const Tolerance& tol) {
  if (a.ambient_dim() != b.ambient_dim())
    throw Error(ErrorKind::DimensionMismatch, "intersect: algebras act on different spaces");
  const auto na = static_cast<Eigen::Index>(a.dimension());
  const auto nb = static_cast<Eigen::Index>(b.dimension());
  Matrix system(a.stacked().rows(), na + nb);
  system << a.stacked(), -b.stacked();
  const Matrix null = LeastSquares(system, tol.rank_tol, 1.0).null_space();
  const Matrix common = range_basis(a.stacked() * null.topRows(na), tol.rank_tol, 1.0);
  std::vector<Matrix> elements;
  for (Eigen::Index k = 0; k < common.cols(); ++k)
    elements.push_back(unvec(common.col(k), a.ambient_dim(), a.ambient_dim()));
  return MatrixAlgebra::from_span(a.ambient_dim(), elements, tol);
}

MatrixAlgebra conjugate_by_antiunitary(const MatrixAlgebra& alg, const AntilinearOperator& j,
                                       bool star, const Tolerance& tol) {
  require_square(j.kernel(), alg.ambient_dim(), "antiunitary kernel");
  const std::size_t dim = alg.ambient_dim();
  if ((j.compose(j) - identity(dim)).norm() > tol.residual_tol * std::sqrt(static_cast<double>(dim)))
    throw Error(ErrorKind::NotInvolution, "J o J differs from the identity");
  std::vector<Matrix> images;
  images.reserve(alg.dimension());
  for (const Matrix& x : alg.basis()) images.push_back(j.sandwich(star ? Matrix(x.adjoint()) : x));
  return MatrixAlgebra::from_span(dim, images, tol);
}

// ---------------------------------------------------------------------------

namespace {

struct AdaptedBlock {
  Block shape;
  Matrix columns;  // d x (n*m), column i*m + s
};

/// Splits one central summand (range of `range`, orthonormal columns) as
/// M_n (x) 1_m. Returns nothing when the generic element was degenerate.
std::optional<AdaptedBlock> split_summand(const MatrixAlgebra& alg, const Matrix& range, Rng& rng,
                                          const Tolerance& tol) {
  const auto r = static_cast<std::size_t>(range.cols());
  std::vector<Matrix> compressed;
  compressed.reserve(alg.dimension());
  for (const Matrix& b : alg.basis()) compressed.push_back(range.adjoint() * b * range);
  const std::vector<Matrix> local = orthonormal_span(compressed, tol);
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(local.size()))));
  if (n == 0 || n * n != local.size() || r % n != 0) return std::nullopt;
  const std::size_t m = r / n;
  AdaptedBlock out{{n, m}, Matrix()};
  if (n == 1) {
    out.columns = range;
    return out;
  }

  const Matrix h = rng.real_combination(hermitian_parts(local));
  const EigenDecomposition eig = hermitian_eig(h, tol);
  const auto clusters = cluster_eigenvalues(eig.values, tol.residual_tol);
  if (clusters.size() != n) return std::nullopt;
  std::vector<Matrix> minimal;  // ranges of minimal projections, d x m each
  for (const auto& cluster : clusters) {
    if (cluster.size() != m) return std::nullopt;
    Matrix cols(range.rows(), static_cast<Eigen::Index>(m));
    for (std::size_t s = 0; s < m; ++s) cols.col(static_cast<Eigen::Index>(s)) = range * eig.vectors.col(cluster[s]);
    minimal.push_back(std::move(cols));
  }

  // Transport the first minimal range onto the others with the algebra's own
  // partial isometries, so every block carries the same multiplicity frame.
  out.columns.resize(range.rows(), static_cast<Eigen::Index>(r));
  out.columns.leftCols(static_cast<Eigen::Index>(m)) = minimal[0];
  for (std::size_t i = 1; i < n; ++i) {
    Matrix best;
    double best_norm = 0.0;
    for (const Matrix& b : alg.basis()) {
      Matrix t = minimal[i].adjoint() * b * minimal[0];
      const double norm = t.norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(t);
      }
    }
    if (best_norm <= tol.rank_tol) return std::nullopt;
    const double scale = best_norm / std::sqrt(static_cast<double>(m));
    out.columns.middleCols(static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(m)) =
        minimal[i] * best / scale;
  }
  return out;
}

}  // namespace

BlockStructure block_decomposition(const MatrixAlgebra& alg, const Tolerance& tol) {
  const std::size_t dim = alg.ambient_dim();
  const MatrixAlgebra z = center(alg, tol);
  const std::vector<Matrix> central_parts = hermitian_parts(z.basis());
  Rng rng(kBlockSeed ^ alg.dimension());

  constexpr int kAttempts = 3;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const Matrix h = rng.real_combination(central_parts);
    const EigenDecomposition eig = hermitian_eig(h, tol);
    const auto clusters = cluster_eigenvalues(eig.values, tol.residual_tol);
    if (clusters.size() != z.dimension()) continue;

    std::vector<AdaptedBlock> blocks;
    bool ok = true;
    for (const auto& cluster : clusters) {
      Matrix range(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(cluster.size()));
      for (std::size_t s = 0; s < cluster.size(); ++s) range.col(static_cast<Eigen::Index>(s)) = eig.vectors.col(cluster[s]);
      auto block = split_summand(alg, range, rng, tol);
      if (!block) {
        ok = false;
        break;
      }
      blocks.push_back(std::move(*block));
    }
    if (!ok) continue;

    std::stable_sort(blocks.begin(), blocks.end(), [](const AdaptedBlock& a, const AdaptedBlock& b) {
      if (a.shape.size != b.shape.size) return a.shape.size > b.shape.size;
      return a.shape.multiplicity > b.shape.multiplicity;
    });
    BlockStructure out;
    out.conjugating_unitary.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::Index offset = 0;
    for (const AdaptedBlock& b : blocks) {
      out.blocks.push_back(b.shape);
      out.conjugating_unitary.middleCols(offset, b.columns.cols()) = b.columns;
      offset += b.columns.cols();
    }
    if (offset != static_cast<Eigen::Index>(dim)) continue;
    const Matrix& u = out.conjugating_unitary;
    if ((u.adjoint() * u - identity(dim)).norm() > tol.residual_tol * std::sqrt(static_cast<double>(dim)))
      continue;
    if (off_pattern_mass(alg, out) > tol.residual_tol) continue;
    return out;
  }
  throw Error(ErrorKind::NumericalFailure,
              "generic central element stayed degenerate after repeated random draws");
}

double off_pattern_mass(const MatrixAlgebra& alg, const BlockStructure& structure) {
  const Matrix& u = structure.conjugating_unitary;
  double worst = 0.0;
  for (const Matrix& x : alg.basis()) {
    const Matrix y = u.adjoint() * x * u;
    Matrix pattern = Matrix::Zero(y.rows(), y.cols());
    Eigen::Index offset = 0;
    for (const Block& b : structure.blocks) {
      const auto n = static_cast<Eigen::Index>(b.size);
      const auto m = static_cast<Eigen::Index>(b.multiplicity);
      const auto blk = y.block(offset, offset, n * m, n * m);
      Matrix reduced = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index s = 0; s < m; ++s) reduced(i, j) += blk(i * m + s, j * m + s);
      reduced /= static_cast<double>(m);
      pattern.block(offset, offset, n * m, n * m) = kron(reduced, Matrix::Identity(m, m));
      offset += n * m;
    }
    worst = std::max(worst, (y - pattern).norm());
  }
  return worst;
}

}  // namespace epr
