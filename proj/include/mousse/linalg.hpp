#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mousse/errors.hpp"

namespace mousse {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Parameters, gradients and every intermediate update are carried as
// dense double matrices.
using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Eigenpairs of a symmetric matrix, values sorted in descending order.
template <typename Scalar>
struct EigDecomp {
  Mat<Scalar> vectors;
  Vec<Scalar> values;
};

/// Thin SVD: `u` is rows x k, `v` is cols x k with k = min(rows, cols).
template <typename Scalar>
struct SvdDecomp {
  Mat<Scalar> u;
  Vec<Scalar> singular_values;
  Mat<Scalar> v;
};

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries in input");
  }
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         shape_string(a.rows(), a.cols()));
  }
}

template <typename DerivedA, typename DerivedB>
void require_same_shape(const Eigen::MatrixBase<DerivedA>& a,
                        const Eigen::MatrixBase<DerivedB>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

/// max |a - a^T|
template <typename Derived>
typename Derived::Scalar symmetry_defect(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "symmetry_defect");
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Symmetric eigendecomposition of (a + a^T) / 2.
///
/// Values are returned in descending order. Each eigenvector is oriented so
/// that its largest-magnitude entry is non-negative (first such entry on
/// ties), which makes logged bases reproducible.
template <typename Derived>
EigDecomp<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "sym_eig");
  require_finite(a, "sym_eig");
  const Mat<Scalar> sym = (a + a.transpose()) * Scalar(0.5);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericError("sym_eig: eigensolver failed to converge");
  }
  const Index n = sym.rows();
  EigDecomp<Scalar> out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Index j = 0; j < n; ++j) {
    Index pivot = 0;
    out.vectors.col(j).cwiseAbs().maxCoeff(&pivot);
    if (out.vectors(pivot, j) < Scalar(0)) out.vectors.col(j) *= Scalar(-1);
  }
  return out;
}

/// Thin singular value decomposition, singular values descending.
template <typename Derived>
SvdDecomp<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_finite(a, "svd");
  Eigen::JacobiSVD<Mat<Scalar>> solver(a.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

/// ||a||_F / sqrt(rows * cols)
template <typename Derived>
typename Derived::Scalar rms_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  return a.norm() / std::sqrt(static_cast<Scalar>(a.size()));
}

template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  return svd(a).singular_values(0);
}

/// Ratio of extreme eigenvalues of an already-decomposed PSD matrix.
/// Returns +inf when the smallest eigenvalue is not positive.
template <typename Scalar>
Scalar condition_number(const EigDecomp<Scalar>& eig) {
  const Scalar hi = eig.values.maxCoeff();
  const Scalar lo = eig.values.minCoeff();
  if (!(lo > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
  return hi / lo;
}

/// Q diag(values) Q^T
template <typename Scalar>
Mat<Scalar> reconstruct(const EigDecomp<Scalar>& eig) {
  return eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
}

template <typename Scalar>
Mat<Scalar> reconstruct(const SvdDecomp<Scalar>& s) {
  return s.u * s.singular_values.asDiagonal() * s.v.transpose();
}

}  // namespace mousse
