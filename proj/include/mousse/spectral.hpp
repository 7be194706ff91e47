#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mousse/linalg.hpp"

namespace mousse {

/// One step of the odd quintic X <- a X + b (X X^T) X + c (X X^T)^2 X.
struct NsCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Newton-Schulz schedule: one coefficient triple per iteration.
struct NsConfig {
  std::vector<NsCoefficients> coefficients;
  /// Divide the input by (||G||_F + 1e-12) before iterating.
  bool pre_normalize = true;

  int iterations() const { return static_cast<int>(coefficients.size()); }

  static NsConfig repeated(NsCoefficients triple, int iterations, bool pre_normalize = true) {
    if (iterations < 1) throw ParameterError("NsConfig: iterations must be positive");
    return NsConfig{std::vector<NsCoefficients>(static_cast<std::size_t>(iterations), triple),
                    pre_normalize};
  }

  /// The quintic used by Muon in practice. It pushes singular values into a
  /// band around 1 in five steps but does not converge to exactly 1.
  static NsConfig ns5() { return repeated({3.4445, -4.7750, 2.0315}, 5); }

  /// Contracting quintic p(x) = (15x - 10x^3 + 3x^5) / 8, which fixes 1 with
  /// p'(1) = p''(1) = 0. Converges to the exact polar factor; used as an
  /// oracle-grade setting.
  static NsConfig convergent(int iterations = 15) {
    return repeated({15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0}, iterations);
  }
};

/// Orthogonal polar factor approximated by Newton-Schulz iteration.
///
/// Iterates on the wide orientation (transposing tall inputs) so the Gram
/// matrix X X^T is min(rows, cols) square. A zero matrix maps to zero.
template <typename Derived>
Mat<typename Derived::Scalar> msign_ns(const Eigen::MatrixBase<Derived>& g, const NsConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  require_finite(g, "msign_ns");
  if (cfg.coefficients.empty()) throw ParameterError("msign_ns: empty coefficient schedule");

  const bool tall = g.rows() > g.cols();
  Mat<Scalar> x = tall ? Mat<Scalar>(g.transpose()) : Mat<Scalar>(g);
  const Scalar norm = x.norm();
  if (norm == Scalar(0)) return Mat<Scalar>::Zero(g.rows(), g.cols());
  if (cfg.pre_normalize) x /= (norm + Scalar(1e-12));

  Mat<Scalar> gram;
  Mat<Scalar> poly;
  for (int k = 0; k < cfg.iterations(); ++k) {
    const auto& t = cfg.coefficients[static_cast<std::size_t>(k)];
    gram.noalias() = x * x.transpose();
    poly.noalias() = Scalar(t.c) * gram * gram;
    poly += Scalar(t.b) * gram;
    x = (Scalar(t.a) * x + poly * x).eval();
    if (!x.allFinite()) {
      throw NumericError("msign_ns: non-finite value at iteration " + std::to_string(k));
    }
  }
  if (tall) return x.transpose();
  return x;
}

/// Exact polar factor U V^T from the SVD. Directions whose singular value is
/// below 1e-12 * sigma_max are dropped, so rank-deficient inputs give a
/// partial isometry and a zero input gives zero.
template <typename Derived>
Mat<typename Derived::Scalar> msign_exact(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  const auto s = svd(g);
  Mat<Scalar> out = Mat<Scalar>::Zero(g.rows(), g.cols());
  if (s.singular_values.size() == 0) return out;
  const Scalar cutoff = Scalar(1e-12) * s.singular_values(0);
  for (Index k = 0; k < s.singular_values.size(); ++k) {
    if (s.singular_values(k) <= cutoff || s.singular_values(k) == Scalar(0)) break;
    out.noalias() += s.u.col(k) * s.v.col(k).transpose();
  }
  return out;
}

/// (max(lambda, 0) + eps)^(-alpha), elementwise. alpha = 0 yields ones.
template <typename Derived>
Vec<typename Derived::Scalar> psd_tempered_scalers(const Eigen::MatrixBase<Derived>& values,
                                                   double alpha, double eps) {
  using Scalar = typename Derived::Scalar;
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    throw ParameterError("psd_tempered_scalers: alpha must lie in [0, 0.5], got " +
                         std::to_string(alpha));
  }
  if (!(eps > 0.0)) {
    throw ParameterError("psd_tempered_scalers: eps must be positive, got " + std::to_string(eps));
  }
  require_finite(values, "psd_tempered_scalers");
  if (alpha == 0.0) return Vec<Scalar>::Ones(values.size());
  Vec<Scalar> out(values.size());
  for (Index i = 0; i < values.size(); ++i) {
    out(i) = std::pow(std::max(values(i), Scalar(0)) + Scalar(eps), Scalar(-alpha));
  }
  return out;
}

/// dim / (Tr(a) + eps) * a, so the mean eigenvalue becomes (close to) one.
///
/// A trace below -1e-10 * dim means the accumulated factor stopped being
/// PSD and is reported as a numeric error. A non-positive denominator (zero
/// matrix with eps = 0) returns the zero matrix.
template <typename Derived>
Mat<typename Derived::Scalar> trace_normalize(const Eigen::MatrixBase<Derived>& a, double eps) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "trace_normalize");
  require_finite(a, "trace_normalize");
  if (!(eps >= 0.0)) throw ParameterError("trace_normalize: eps must be non-negative");
  const Scalar dim = static_cast<Scalar>(a.rows());
  const Scalar tr = a.trace();
  if (tr < Scalar(-1e-10) * dim) {
    throw NumericError("trace_normalize: negative trace " + std::to_string(double(tr)) +
                       " (factor is not PSD)");
  }
  const Scalar denom = tr + Scalar(eps);
  if (!(denom > Scalar(0))) return Mat<Scalar>::Zero(a.rows(), a.cols());
  return (dim / denom) * a;
}

}  // namespace mousse
