#include "epr/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

namespace epr {

namespace {

std::atomic<double> g_rank_tol{1e-9};
std::atomic<double> g_residual_tol{1e-8};

}  // namespace

void Tolerance::validate() const {
  auto ok = [](double t) { return std::isfinite(t) && t > 0.0 && t < 1.0; };
  if (!ok(rank_tol) || !ok(residual_tol)) {
    std::ostringstream msg;
    msg << "tolerances must lie in (0, 1): rank_tol=" << rank_tol
        << " residual_tol=" << residual_tol;
    throw Error(ErrorKind::ValidationError, msg.str());
  }
}

Tolerance Tolerance::global() { return Tolerance{g_rank_tol.load(), g_residual_tol.load()}; }

void Tolerance::set_global(const Tolerance& tol) {
  tol.validate();
  g_rank_tol.store(tol.rank_tol);
  g_residual_tol.store(tol.residual_tol);
}

double hs_norm(const Matrix& x) { return x.norm(); }

Complex hs_inner(const Matrix& x, const Matrix& y) { return x.conjugate().cwiseProduct(y).sum(); }

Matrix identity(std::size_t dim) {
  return Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

Matrix projector(const Matrix& orthonormal_columns) {
  return orthonormal_columns * orthonormal_columns.adjoint();
}

bool is_hermitian(const Matrix& h, double residual_tol) {
  if (h.rows() != h.cols()) return false;
  return (h - h.adjoint()).norm() <= residual_tol * std::max(h.norm(), 1e-300);
}

void require_square(const Matrix& x, std::size_t dim, const char* what) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (x.rows() != d || x.cols() != d) {
    std::ostringstream msg;
    msg << what << " is " << x.rows() << "x" << x.cols() << ", expected " << dim << "x" << dim;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

EigenDecomposition hermitian_eig(const Matrix& h, const Tolerance& tol) {
  if (h.rows() != h.cols())
    throw Error(ErrorKind::DimensionMismatch, "hermitian_eig needs a square matrix");
  if (!h.allFinite()) throw Error(ErrorKind::NumericalFailure, "matrix has non-finite entries");
  if (!is_hermitian(h, tol.residual_tol) && h.norm() > 0.0)
    throw Error(ErrorKind::NotHermitian, "matrix deviates from its adjoint beyond residual_tol");
  const Matrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalFailure, "Hermitian eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// ---------------------------------------------------------------------------

LeastSquares::LeastSquares(const Matrix& m, double rank_tol, double scale)
    : rows_(static_cast<std::size_t>(m.rows())),
      cols_(static_cast<std::size_t>(m.cols())),
      reduced_(m.rows() > 2 * m.cols()) {
  if (cols_ == 0) return;
  if (rows_ == 0) {
    v_ = Matrix::Identity(m.cols(), m.cols());
    sigma_ = RealVector();
    return;
  }
  SvdResult dec;
  if (reduced_) {
    qr_.compute(m);
    const Matrix r = qr_.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    dec = svd(r, true, true);
  } else {
    dec = svd(m, true, true);
  }
  u_ = std::move(dec.u);
  v_ = std::move(dec.v);
  sigma_ = std::move(dec.s);
  if (!sigma_.allFinite()) throw Error(ErrorKind::NumericalFailure, "SVD produced non-finite values");
  const double top = sigma_.size() > 0 ? sigma_(0) : 0.0;
  const double threshold = rank_tol * std::max(top, scale);
  for (Eigen::Index i = 0; i < sigma_.size(); ++i)
    if (sigma_(i) > threshold) ++rank_;
}

Matrix LeastSquares::null_space() const {
  const auto n = static_cast<Eigen::Index>(cols_);
  const auto r = static_cast<Eigen::Index>(rank_);
  if (n == 0) return Matrix(0, 0);
  return v_.rightCols(n - r);
}

Matrix LeastSquares::reduce_rhs(const Matrix& rhs) const {
  if (!reduced_) return rhs;
  Matrix q_adj_rhs = qr_.householderQ().adjoint() * rhs;
  return q_adj_rhs.topRows(static_cast<Eigen::Index>(cols_));
}

Matrix LeastSquares::solve(const Matrix& rhs) const {
  if (static_cast<std::size_t>(rhs.rows()) != rows_)
    throw Error(ErrorKind::DimensionMismatch, "right-hand side has the wrong length");
  const auto r = static_cast<Eigen::Index>(rank_);
  if (cols_ == 0) return Matrix(0, rhs.cols());
  if (r == 0) return Matrix::Zero(static_cast<Eigen::Index>(cols_), rhs.cols());
  const Matrix y = reduce_rhs(rhs);
  Matrix coeffs = u_.leftCols(r).adjoint() * y;
  for (Eigen::Index i = 0; i < r; ++i) coeffs.row(i) /= sigma_(i);
  return v_.leftCols(r) * coeffs;
}

Vector LeastSquares::solve(const Vector& rhs) const {
  return solve(Matrix(rhs)).col(0);
}

SvdResult svd(const Matrix& m, bool full_u, bool full_v) {
  const unsigned flags = (full_u ? Eigen::ComputeFullU : Eigen::ComputeThinU) |
                         (full_v ? Eigen::ComputeFullV : Eigen::ComputeThinV);
  Eigen::BDCSVD<Matrix> fast(m, flags);
  SvdResult out{fast.matrixU(), fast.singularValues(), fast.matrixV()};
  const Eigen::Index k = out.s.size();
  const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
  const double recon =
      (out.u.leftCols(k) * out.s.cast<Complex>().asDiagonal() * out.v.leftCols(k).adjoint() - m).norm();
  if (out.s.allFinite() && recon <= 1e-11 * scale) return out;
  Eigen::JacobiSVD<Matrix> slow(m, flags);
  return {slow.matrixU(), slow.singularValues(), slow.matrixV()};
}

Matrix range_basis(const Matrix& m, double rank_tol, double scale) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  const SvdResult dec = svd(m);
  const RealVector& s = dec.s;
  const double threshold = rank_tol * std::max(s(0), scale);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > threshold) ++rank;
  return dec.u.leftCols(rank);
}

std::size_t numerical_rank(const Matrix& m, double rank_tol, double scale) {
  if (m.cols() == 0 || m.rows() == 0) return 0;
  const SvdResult dec = svd(m);
  const RealVector& s = dec.s;
  const double threshold = rank_tol * std::max(s(0), scale);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > threshold) ++rank;
  return rank;
}

// ---------------------------------------------------------------------------

SpanAccumulator::SpanAccumulator(std::size_t rows, std::size_t cols, double threshold)
    : rows_(rows), cols_(cols), threshold_(threshold) {
  const auto n = static_cast<Eigen::Index>(rows * cols);
  q_.resize(n, std::min<Eigen::Index>(n, 16));
}

bool SpanAccumulator::add(const Matrix& candidate) {
  if (static_cast<std::size_t>(candidate.rows()) != rows_ ||
      static_cast<std::size_t>(candidate.cols()) != cols_)
    throw Error(ErrorKind::DimensionMismatch, "span members must share one shape");
  const auto full = static_cast<Eigen::Index>(rows_ * cols_);
  if (static_cast<Eigen::Index>(count_) == full) return false;
  Vector v = vec(candidate);
  const auto k = static_cast<Eigen::Index>(count_);
  for (int pass = 0; pass < 2 && k > 0; ++pass) {
    const Vector c = q_.leftCols(k).adjoint() * v;
    v.noalias() -= q_.leftCols(k) * c;
  }
  const double residual = v.norm();
  if (!(residual > threshold_)) return false;
  if (k == q_.cols()) q_.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(full, 2 * k));
  q_.col(k) = v / residual;
  ++count_;
  return true;
}

std::vector<Matrix> SpanAccumulator::basis() const {
  std::vector<Matrix> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i)
    out.push_back(unvec(q_.col(static_cast<Eigen::Index>(i)), rows_, cols_));
  return out;
}

std::vector<Matrix> orthonormal_span(std::span<const Matrix> family, const Tolerance& tol) {
  if (family.empty()) return {};
  const auto rows = static_cast<std::size_t>(family.front().rows());
  const auto cols = static_cast<std::size_t>(family.front().cols());
  double largest = 0.0;
  for (const Matrix& m : family) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols)
      throw Error(ErrorKind::DimensionMismatch, "orthonormal_span: matrices differ in shape");
    largest = std::max(largest, m.norm());
  }
  if (largest == 0.0) return {};
  SpanAccumulator acc(rows, cols, tol.rank_tol * largest);
  for (const Matrix& m : family) acc.add(m);
  return acc.basis();
}

PairedBasis orthonormalize_pairs(const std::vector<Matrix>& primary,
                                 const std::vector<Matrix>& companion, const Tolerance& tol) {
  if (primary.size() != companion.size())
    throw Error(ErrorKind::DimensionMismatch, "orthonormalize_pairs: lists differ in length");
  PairedBasis out;
  if (primary.empty()) return out;
  const auto rows = primary.front().rows(), cols = primary.front().cols();
  const auto crow = companion.front().rows(), ccol = companion.front().cols();
  const auto n = static_cast<Eigen::Index>(primary.size());
  Matrix p(rows * cols, n), c(crow * ccol, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.col(i) = vec(primary[static_cast<std::size_t>(i)]);
    c.col(i) = vec(companion[static_cast<std::size_t>(i)]);
  }
  // P = U S V*; the orthonormal columns U_r = P V_r S_r^{-1}.
  const SvdResult dec = svd(p);
  const RealVector& s = dec.s;
  if (s.size() == 0 || s(0) == 0.0) return out;
  const double threshold = tol.rank_tol * s(0);
  for (Eigen::Index k = 0; k < s.size() && s(k) > threshold; ++k) {
    out.primary.push_back(unvec(dec.u.col(k), static_cast<std::size_t>(rows),
                                static_cast<std::size_t>(cols)));
    const Vector comp = c * dec.v.col(k) / s(k);
    out.companion.push_back(
        unvec(comp, static_cast<std::size_t>(crow), static_cast<std::size_t>(ccol)));
  }
  return out;
}

std::optional<std::string> density_defect(const Matrix& rho, const Tolerance& tol) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) return "square shape";
  if (!rho.allFinite()) return "finite entries";
  if (!is_hermitian(rho, tol.residual_tol)) return "hermiticity";
  const Complex trace = rho.trace();
  if (std::abs(trace - Complex(1.0, 0.0)) > tol.residual_tol) {
    std::ostringstream msg;
    msg << "trace (got " << trace.real() << ")";
    return msg.str();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) return "eigensolver convergence";
  if (solver.eigenvalues()(0) < -tol.rank_tol) {
    std::ostringstream msg;
    msg << "positivity (min eigenvalue " << solver.eigenvalues()(0) << ")";
    return msg.str();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

AntilinearOperator AntilinearOperator::conjugation(std::size_t dim) {
  return AntilinearOperator(identity(dim));
}

AntilinearPolar antilinear_polar(const AntilinearOperator& s, const Tolerance& tol) {
  const Matrix& m = s.kernel();
  if (m.rows() != m.cols())
    throw Error(ErrorKind::DimensionMismatch, "antilinear_polar needs a square kernel");
  const auto dim = static_cast<std::size_t>(m.rows());
  if (numerical_rank(m, tol.rank_tol, 0.0) < dim)
    throw Error(ErrorKind::SingularOperator, "antilinear operator is rank deficient");

  // S* S is linear with matrix M^T conj(M).
  const Matrix delta_raw = m.transpose() * m.conjugate();
  const Matrix delta = 0.5 * (delta_raw + delta_raw.adjoint());
  const EigenDecomposition eig = hermitian_eig(delta, tol);
  const double top = eig.values.maxCoeff();
  if (eig.values.minCoeff() <= tol.rank_tol * top)
    throw Error(ErrorKind::SingularOperator, "S*S has an eigenvalue below the rank floor");

  const Matrix inv_sqrt = spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); });
  AntilinearOperator j = s.after(inv_sqrt);

  const Matrix& k = j.kernel();
  const Matrix id = identity(dim);
  const double scale = std::sqrt(static_cast<double>(dim));
  if ((k.adjoint() * k - id).norm() > tol.residual_tol * scale)
    throw Error(ErrorKind::NumericalFailure, "polar factor J is not antiunitary");
  if ((j.compose(j) - id).norm() > tol.residual_tol * scale)
    throw Error(ErrorKind::NotInvolution, "polar factor J does not square to the identity");
  return {std::move(j), delta};
}

}  // namespace epr
