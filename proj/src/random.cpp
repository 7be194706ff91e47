#include "mousse/random.hpp"

#include <cmath>
#include <numbers>

namespace mousse {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = rng.normal();
  }
  return out;
}

Matrix orthonormal_columns(Index rows, Index cols, Rng& rng) {
  if (cols > rows) {
    throw DimensionError("orthonormal_columns: cols exceeds rows (" +
                         shape_string(rows, cols) + ")");
  }
  const Matrix g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

namespace {

Matrix conditioned_matrix(Index rows, Index cols, double kappa, Rng& rng) {
  const Index k = std::min(rows, cols);
  const Matrix u = orthonormal_columns(rows, k, rng);
  const Matrix v = orthonormal_columns(cols, k, rng);
  Vector sigma(k);
  for (Index i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    sigma(i) = std::pow(kappa, -t);
  }
  return u * sigma.asDiagonal() * v.transpose();
}

}  // namespace

Matrix rand_matrix(Index rows, Index cols, std::uint64_t seed, MatrixKind kind) {
  if (rows < 1 || cols < 1) {
    throw ParameterError("rand_matrix: rows and cols must be positive, got " +
                         shape_string(rows, cols));
  }
  Rng rng(seed);
  if (std::holds_alternative<Orthogonal>(kind)) {
    if (rows != cols) {
      throw ParameterError("rand_matrix: orthogonal kind needs a square shape, got " +
                           shape_string(rows, cols));
    }
    return orthonormal_columns(rows, cols, rng);
  }
  if (const auto* cond = std::get_if<Conditioned>(&kind)) {
    if (!(cond->kappa >= 1.0) || !std::isfinite(cond->kappa)) {
      throw ParameterError("rand_matrix: conditioned kind needs kappa >= 1");
    }
    return conditioned_matrix(rows, cols, cond->kappa, rng);
  }
  return gaussian_matrix(rows, cols, rng);
}

}  // namespace mousse
