#include "epr/random.hpp"

namespace epr {

Matrix Rng::ginibre(std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Complex(normal(), normal());
  return m;
}

Vector Rng::gaussian_vector(std::size_t n) { return ginibre(n, 1).col(0); }

Matrix Rng::hermitian(std::size_t dim) {
  const Matrix g = ginibre(dim, dim);
  return 0.5 * (g + g.adjoint());
}

Matrix Rng::haar_unitary(std::size_t dim) {
  const Matrix g = ginibre(dim, dim);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  // Fix the phases of R's diagonal so the distribution is Haar.
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Complex d = r(i, i);
    const double a = std::abs(d);
    if (a > 0.0) q.col(i) *= d / a;
  }
  return q;
}

Vector Rng::unit_vector(std::size_t dim) {
  Vector v = gaussian_vector(dim);
  return v / v.norm();
}

Matrix Rng::real_combination(std::span<const Matrix> terms) {
  Matrix out = Matrix::Zero(terms.front().rows(), terms.front().cols());
  for (const Matrix& t : terms) out += normal() * t;
  return out;
}

Matrix Rng::complex_combination(std::span<const Matrix> terms) {
  Matrix out = Matrix::Zero(terms.front().rows(), terms.front().cols());
  for (const Matrix& t : terms) out += Complex(normal(), normal()) * t;
  return out;
}

}  // namespace epr
