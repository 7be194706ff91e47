#include <gtest/gtest.h>

#include "mousse/precond.hpp"
#include "mousse/random.hpp"

using namespace mousse;

namespace {

PrecondConfig cfg_with(double alpha, double eps = 1e-5, PrecondMode mode = PrecondMode::double_sided) {
  PrecondConfig c;
  c.alpha = alpha;
  c.eps = eps;
  c.mode = mode;
  return c;
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(KroneckerStats, FirstEmaStep) {
  KroneckerStats<double> st(3, 4, PrecondConfig{});
  const Matrix g = rand_matrix(3, 4, 1);
  st.update(g);
  EXPECT_LE((st.left()->factor - 0.05 * g * g.transpose()).norm(), 1e-15);
  EXPECT_LE((st.right()->factor - 0.05 * g.transpose() * g).norm(), 1e-15);
}

TEST(KroneckerStats, ConstantStreamConvergesToGram) {
  KroneckerStats<double> st(3, 4, PrecondConfig{});
  const Matrix g = rand_matrix(3, 4, 2);
  for (int i = 0; i < 1000; ++i) st.update(g);
  const Matrix gram = g * g.transpose();
  EXPECT_LE((st.left()->factor - gram).norm() / gram.norm(), 1e-6);
}

TEST(KroneckerStats, WrongShapeIsDimensionError) {
  KroneckerStats<double> st(3, 4, PrecondConfig{});
  EXPECT_THROW(st.update(Matrix(Matrix::Zero(4, 3))), DimensionError);
}

TEST(KroneckerStats, WhitenBeforeRefreshIsStateError) {
  KroneckerStats<double> st(3, 4, PrecondConfig{});
  st.update(rand_matrix(3, 4, 3));
  EXPECT_THROW(st.whiten(Matrix::Zero(3, 4)), StateError);
  EXPECT_THROW(st.unwhiten(Matrix::Zero(3, 4)), StateError);
}

TEST(KroneckerStats, RefreshSchedule) {
  PrecondConfig c;
  c.refresh_interval = 4;
  KroneckerStats<double> st(2, 2, c);
  EXPECT_FALSE(st.refresh_due());
  std::vector<long> refreshed;
  for (long k = 1; k <= 12; ++k) {
    st.update(rand_matrix(2, 2, static_cast<std::uint64_t>(k)));
    if (st.refresh_due()) {
      st.refresh();
      refreshed.push_back(k);
    }
  }
  EXPECT_EQ(refreshed, (std::vector<long>{1, 4, 8, 12}));
}

TEST(KroneckerStats, IsotropicFactorGivesNearIdentityScalers) {
  KroneckerStats<double> st(3, 3, cfg_with(0.25));
  st.set_left_factor(7.0 * Matrix::Identity(3, 3));
  st.set_right_factor(100.0 * Matrix::Identity(3, 3));
  st.refresh();
  for (const auto* side : {&*st.left(), &*st.right()}) {
    // 3/(Tr+eps) * F is just below I, so the shifted values sit just below 1 + eps.
    EXPECT_LE((side->eig->values.array() - (1.0 + 1e-5)).abs().maxCoeff(), 1e-5);
    EXPECT_LE((side->scalers->array() - 1.0).abs().maxCoeff(), 1e-5);
  }
}

TEST(KroneckerStats, HalfPowerScalers) {
  KroneckerStats<double> st(2, 2, cfg_with(0.5, 1e-12, PrecondMode::left_only));
  st.set_left_factor(diag2(1.9, 0.1));
  st.refresh();
  const Vector& s = *st.left()->scalers;
  EXPECT_NEAR(s(0), 0.7255, 1e-4);
  EXPECT_NEAR(s(1), 3.1623, 1e-4);
  EXPECT_NEAR(s(0), 1.0 / std::sqrt(1.9), 1e-9);
}

TEST(KroneckerStats, AlphaZeroScalersAreOne) {
  KroneckerStats<double> st(4, 3, cfg_with(0.0));
  st.update(rand_matrix(4, 3, 5, Conditioned{1e4}));
  st.refresh();
  EXPECT_EQ(*st.left()->scalers, Vector::Ones(4));
  EXPECT_EQ(*st.right()->scalers, Vector::Ones(3));
}

TEST(KroneckerStats, AlphaZeroWhitenIsRotation) {
  KroneckerStats<double> st(4, 3, cfg_with(0.0));
  st.update(rand_matrix(4, 3, 6));
  st.refresh();
  const Matrix m = rand_matrix(4, 3, 7);
  const Matrix w = st.whiten(m);
  EXPECT_NEAR(w.norm(), m.norm(), 1e-12);
  EXPECT_LE((w - st.left()->eig->vectors.transpose() * m * st.right()->eig->vectors).norm(), 1e-13);
  EXPECT_LE((st.unwhiten(w) - m).norm(), 1e-12 * m.norm());
}

TEST(KroneckerStats, IdentityGeometry) {
  // Any eigenbasis of I is valid, so only the composed operator is pinned.
  for (double alpha : {0.0, 0.25}) {
    KroneckerStats<double> st(3, 3, cfg_with(alpha));
    st.set_left_factor(Matrix::Identity(3, 3));
    st.set_right_factor(Matrix::Identity(3, 3));
    st.refresh();
    const Matrix m = rand_matrix(3, 3, 8);
    EXPECT_LE((st.precondition(m) - m).norm(), 1e-5 * m.norm());
    EXPECT_LE((st.unwhiten(st.whiten(m)) - m).norm(), 1e-5 * m.norm());
  }
}

TEST(KroneckerStats, DiagonalWhitenClosedForm) {
  const double alpha = 0.25;
  KroneckerStats<double> st(2, 2, cfg_with(alpha, 1e-12));
  st.set_left_factor(diag2(3.0, 1.0));
  st.set_right_factor(diag2(0.5, 1.5));
  st.refresh();
  const Matrix m = rand_matrix(2, 2, 9);
  const Vector a_hat = Vector(Eigen::Vector2d(1.5, 0.5));   // 2 / 4 * (3, 1)
  const Vector b_hat = Vector(Eigen::Vector2d(0.5, 1.5));   // 2 / 2 * (0.5, 1.5)
  const Matrix w = st.precondition(m);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      EXPECT_NEAR(w(i, j), std::pow(a_hat(i), -alpha) * m(i, j) * std::pow(b_hat(j), -alpha), 1e-9);
    }
  }
}

TEST(KroneckerStats, SingleSidedLeavesOtherSideIdentity) {
  KroneckerStats<double> left(3, 5, cfg_with(0.25, 1e-5, PrecondMode::left_only));
  KroneckerStats<double> right(3, 5, cfg_with(0.25, 1e-5, PrecondMode::right_only));
  EXPECT_FALSE(left.right().has_value());
  EXPECT_FALSE(right.left().has_value());
  const Matrix g = rand_matrix(3, 5, 10);
  left.update(g);
  right.update(g);
  left.refresh();
  right.refresh();
  const Matrix m = rand_matrix(3, 5, 11);
  const auto& l = *left.left();
  EXPECT_LE((left.whiten(m) - l.scalers->asDiagonal() * (l.eig->vectors.transpose() * m)).norm(), 1e-13);
  const auto& r = *right.right();
  EXPECT_LE((right.whiten(m) - (m * r.eig->vectors) * r.scalers->asDiagonal()).norm(), 1e-13);
  EXPECT_THROW(left.set_right_factor(Matrix::Identity(5, 5)), StateError);
}

TEST(KroneckerStats, AlphaSingleOverridesInSingleSidedMode) {
  PrecondConfig c = cfg_with(0.125, 1e-12, PrecondMode::left_only);
  c.alpha_single = 0.5;
  KroneckerStats<double> st(2, 2, c);
  st.set_left_factor(diag2(1.9, 0.1));
  st.refresh();
  EXPECT_NEAR((*st.left()->scalers)(0), 1.0 / std::sqrt(1.9), 1e-9);
}

TEST(KroneckerStats, CachesMatchMostRecentRefresh) {
  PrecondConfig c;
  c.refresh_interval = 3;
  KroneckerStats<double> st(4, 4, c);
  Matrix factor_at_refresh;
  for (long k = 1; k <= 8; ++k) {
    st.update(rand_matrix(4, 4, 100 + static_cast<std::uint64_t>(k)));
    if (st.refresh_due()) {
      st.refresh();
      factor_at_refresh = st.left()->factor;
    }
  }
  EXPECT_EQ(st.last_refresh_step(), 6);
  const Matrix damped = trace_normalize(factor_at_refresh, c.eps) + c.eps * Matrix::Identity(4, 4);
  EXPECT_LE((reconstruct(*st.left()->eig) - damped).norm(), 1e-10);
}

TEST(KroneckerStats, DiagnosticsRespectBounds) {
  KroneckerStats<double> st(8, 6, PrecondConfig{});
  for (std::uint64_t k = 0; k < 30; ++k) {
    st.update(rand_matrix(8, 6, k, Conditioned{1e6}));
    if (st.refresh_due()) {
      st.refresh();
      for (const auto* side : {&*st.left(), &*st.right()}) {
        const double dim = double(side->factor.rows());
        EXPECT_NEAR(side->diagnostics.normalized_trace, dim, 1e-10 * dim);
        EXPECT_LE(side->diagnostics.condition, (dim + 1e-5) / 1e-5);
        EXPECT_GE(side->eig->values.minCoeff(), 1e-5 * (1 - 1e-9));
      }
    }
  }
}

TEST(KroneckerStats, CheckpointRoundTrip) {
  KroneckerStats<double> a(3, 4, PrecondConfig{});
  for (std::uint64_t k = 0; k < 5; ++k) {
    a.update(rand_matrix(3, 4, k));
    if (a.refresh_due()) a.refresh();
  }
  Checkpoint ck;
  a.save(ck, "s.");
  KroneckerStats<double> b(3, 4, PrecondConfig{});
  b.load(Checkpoint::deserialize(ck.serialize()), "s.");
  const Matrix m = rand_matrix(3, 4, 50);
  EXPECT_EQ(a.whiten(m), b.whiten(m));
  EXPECT_EQ(a.step(), b.step());
  KroneckerStats<double> wrong(3, 4, cfg_with(0.25, 1e-5, PrecondMode::left_only));
  EXPECT_THROW(wrong.load(ck, "s."), IoError);
}

TEST(PrecondConfig, Validation) {
  PrecondConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0.6;
  EXPECT_THROW(c.validate(), ParameterError);
  c = PrecondConfig{};
  c.eps = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = PrecondConfig{};
  c.refresh_interval = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = PrecondConfig{};
  c.beta_pc = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(KroneckerStats, FloatInstantiation) {
  KroneckerStats<float> st(3, 3, PrecondConfig{});
  const Mat<float> g = rand_matrix(3, 3, 4).cast<float>();
  st.update(g);
  st.refresh();
  EXPECT_TRUE(st.whiten(g).allFinite());
}
