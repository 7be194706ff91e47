#include <gtest/gtest.h>

#include "mousse/random.hpp"
#include "mousse/testbed.hpp"

using namespace mousse;

namespace {

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

Matrix sqrt_psd(const Matrix& a) {
  const auto e = sym_eig(a);
  return e.vectors * e.values.cwiseSqrt().asDiagonal() * e.vectors.transpose();
}

}  // namespace

TEST(KronQuad, EuclideanCase) {
  KronQuadratic p{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2), 0.0, 0};
  const auto r = kron_quad_eval(p, Matrix::Identity(2, 2), 0);
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  EXPECT_EQ(r.grad, Matrix(Matrix::Identity(2, 2)));
}

TEST(KronQuad, MinimumIsZero) {
  const auto p = make_kron_quadratic(5, 4, 100.0, 0.0, 3);
  const auto r = kron_quad_eval(p, p.w_star, 1);
  EXPECT_NEAR(r.loss, 0.0, 1e-15);
  EXPECT_LE(r.grad.norm(), 1e-14);
}

TEST(KronQuad, GradientMatchesFiniteDifferences) {
  const auto p = make_kron_quadratic(8, 6, 1e2, 0.0, 4);
  const Matrix w = rand_matrix(8, 6, 5);
  const Matrix fd = finite_diff_grad([&](const Matrix& x) { return kron_quad_loss(p, x); }, w, 1e-5);
  EXPECT_LE(max_rel(kron_quad_eval(p, w, 0).grad, fd), 1e-6);
}

TEST(KronQuad, NewtonStepReachesOptimum) {
  const auto p = make_kron_quadratic(7, 5, 1e3, 0.0, 6);
  const Matrix w = rand_matrix(7, 5, 7);
  const Matrix g = kron_quad_eval(p, w, 0).grad;
  const Matrix step = p.l_h.inverse() * g * p.r_h.inverse();
  EXPECT_LE((w - step - p.w_star).norm(), 1e-8 * p.w_star.norm());
}

TEST(KronQuad, SpectrumAndNoise) {
  const auto p = make_kron_quadratic(6, 4, 1e3, 0.1, 8);
  const auto e = sym_eig(p.l_h);
  EXPECT_NEAR(e.values(0), 1.0, 1e-10);
  EXPECT_NEAR(e.values(5), 1e-3, 1e-12);
  const Matrix w = Matrix::Zero(6, 4);
  EXPECT_EQ(kron_quad_eval(p, w, 3).grad, kron_quad_eval(p, w, 3).grad);
  EXPECT_NE(kron_quad_eval(p, w, 3).grad, kron_quad_eval(p, w, 4).grad);
  EXPECT_THROW(kron_quad_eval(p, Matrix::Zero(4, 6), 0), DimensionError);
}

TEST(KronQuad, BalancedTargetWhitensByCurvature) {
  const auto g = make_kron_quadratic(6, 5, 1e2, 0.0, 9, 1.0, TargetDist::gaussian);
  const auto b = make_kron_quadratic(6, 5, 1e2, 0.0, 9, 1.0, TargetDist::balanced);
  EXPECT_EQ(g.l_h, b.l_h);
  const Matrix z = sqrt_psd(b.l_h) * b.w_star * sqrt_psd(b.r_h);
  EXPECT_LE((z - g.w_star).norm(), 1e-8 * g.w_star.norm());
}

TEST(Mlp, DeadNetwork) {
  const Matrix x = rand_matrix(4, 3, 1);
  const Matrix y = rand_matrix(4, 2, 2);
  const auto r = mlp_forward_backward(x, y, Matrix::Zero(3, 5), Matrix::Zero(5, 2));
  EXPECT_NEAR(r.loss, y.squaredNorm() / 4.0, 1e-15);
  EXPECT_EQ(r.grad_w1, Matrix(Matrix::Zero(3, 5)));
  EXPECT_EQ(r.grad_w2, Matrix(Matrix::Zero(5, 2)));
}

TEST(Mlp, HandChainRule) {
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const auto r = mlp_forward_backward(one, Matrix::Zero(1, 1), Matrix::Constant(1, 1, 2.0),
                                      Matrix::Constant(1, 1, 3.0));
  EXPECT_DOUBLE_EQ(r.loss, 144.0);
  EXPECT_DOUBLE_EQ(r.grad_w2(0, 0), 96.0);
  EXPECT_DOUBLE_EQ(r.grad_w1(0, 0), 288.0);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  const auto p = make_mlp_problem(5, 7, 3, 16, 8, 10);
  const Matrix w1 = spectral_init(5, 7, 11);
  const Matrix w2 = spectral_init(7, 3, 12);
  const Matrix b = rand_matrix(1, 3, 13);
  const auto r = mlp_eval(p, w1, w2, 1, b);
  const Matrix xb = p.x.middleRows(8, 8);
  const Matrix yb = p.y.middleRows(8, 8);
  const auto f1 = [&](const Matrix& w) { return mlp_forward_backward(xb, yb, w, w2, b).loss; };
  const auto f2 = [&](const Matrix& w) { return mlp_forward_backward(xb, yb, w1, w, b).loss; };
  const auto fb = [&](const Matrix& w) { return mlp_forward_backward(xb, yb, w1, w2, w).loss; };
  EXPECT_LE(max_rel(r.grad_w1, finite_diff_grad(f1, w1, 1e-5)), 1e-4);
  EXPECT_LE(max_rel(r.grad_w2, finite_diff_grad(f2, w2, 1e-5)), 1e-4);
  EXPECT_LE(max_rel(r.grad_b, finite_diff_grad(fb, b, 1e-5)), 1e-4);
}

TEST(Mlp, FullLossAveragesBatches) {
  const auto p = make_mlp_problem(4, 6, 2, 12, 4, 20);
  const Matrix w1 = spectral_init(4, 6, 1);
  const Matrix w2 = spectral_init(6, 2, 2);
  double mean = 0.0;
  for (Index i = 0; i < p.num_batches(); ++i) mean += mlp_eval(p, w1, w2, i).loss;
  EXPECT_NEAR(mlp_full_loss(p, w1, w2), mean / double(p.num_batches()), 1e-12);
}

TEST(SpectralInit, Sigma) {
  EXPECT_NEAR(spectral_init_sigma(768, 768), 0.03608, 1e-5);
  EXPECT_DOUBLE_EQ(spectral_init_sigma(768, 3072), 1.0 / std::sqrt(768.0));
  EXPECT_NEAR(spectral_init_sigma(3072, 768), 0.009021, 1e-6);
  const Matrix w = spectral_init(256, 256, 3);
  EXPECT_EQ(w.rows(), 256);
  EXPECT_NEAR(std::sqrt(w.squaredNorm() / double(w.size())), 1.0 / 16.0, 1e-3);
}

TEST(FiniteDiff, Examples) {
  const Matrix w = rand_matrix(3, 4, 14);
  const Matrix g0 = rand_matrix(3, 4, 15);
  EXPECT_LE((finite_diff_grad([](const Matrix& x) { return 0.5 * x.squaredNorm(); }, w, 1e-5) - w)
                .cwiseAbs()
                .maxCoeff(),
            1e-8);
  EXPECT_LE((finite_diff_grad([&](const Matrix& x) { return (g0.array() * x.array()).sum(); }, w, 1e-3) - g0)
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
}
