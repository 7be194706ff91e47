#pragma once

#include <cstdint>
#include <functional>

#include "mousse/linalg.hpp"

namespace mousse {

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

/// f(W) = 0.5 Tr((W - W*)^T L_H (W - W*) R_H), whose Hessian in vec
/// coordinates is exactly R_H (x) L_H.
struct KronQuadratic {
  Matrix l_h;
  Matrix r_h;
  Matrix w_star;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// How W* is drawn. `gaussian`: i.i.d. N(0, 1) entries, so the initial loss
/// (from W = 0) sits mostly in high-curvature directions. `balanced`:
/// W* = L_H^(-1/2) Z R_H^(-1/2), so every Hessian eigendirection starts with
/// the same expected loss.
enum class TargetDist { gaussian, balanced };

const char* to_string(TargetDist d);

/// L_H = Q_L^T diag(s) Q_L and R_H likewise, with s log-spaced from 1 down
/// to 1/kappa and random orthogonal Q. W* is target_scale times a draw from
/// `target`.
KronQuadratic make_kron_quadratic(Index rows, Index cols, double kappa, double noise_sigma,
                                  std::uint64_t seed, double target_scale = 1.0,
                                  TargetDist target = TargetDist::gaussian);

/// Noise-free loss.
double kron_quad_loss(const KronQuadratic& p, const Matrix& w);

/// Loss and gradient L_H (W - W*) R_H + noise_sigma * Z, where Z is standard
/// normal noise determined by (p.seed, step_seed).
LossGrad kron_quad_eval(const KronQuadratic& p, const Matrix& w, std::uint64_t step_seed);

/// Teacher-student regression with a two-layer squared-ReLU network
/// y_hat = relu(x W1)^2 W2 (+ b). Rows of x are samples.
struct MlpProblem {
  Matrix x;
  Matrix y;
  Index batch_size = 1;
  std::uint64_t seed = 0;
  Matrix teacher_w1;
  Matrix teacher_w2;

  Index num_batches() const { return x.rows() / batch_size; }
};

/// Inputs are N(0, 1); targets come from a teacher of the same shape with
/// spectral-condition init plus N(0, obs_noise^2) observation noise.
MlpProblem make_mlp_problem(Index d_in, Index hidden, Index d_out, Index samples, Index batch_size,
                            std::uint64_t seed, double obs_noise = 1e-3);

struct MlpEval {
  double loss = 0.0;
  Matrix grad_w1;
  Matrix grad_w2;
  /// Row vector; empty when the bias is not used.
  Matrix grad_b;
};

/// Loss = mean over samples of ||y_hat - y||^2 and its exact gradients.
/// `b` is an optional 1 x d_out bias row (pass an empty matrix to omit it).
MlpEval mlp_forward_backward(const Matrix& x, const Matrix& y, const Matrix& w1, const Matrix& w2,
                             const Matrix& b = Matrix());

/// Minibatch `batch_index` (rows [i*B, (i+1)*B)) of the dataset.
MlpEval mlp_eval(const MlpProblem& p, const Matrix& w1, const Matrix& w2, Index batch_index,
                 const Matrix& b = Matrix());

/// Loss over the whole dataset.
double mlp_full_loss(const MlpProblem& p, const Matrix& w1, const Matrix& w2,
                     const Matrix& b = Matrix());

inline double squared_relu(double z) { return z > 0.0 ? z * z : 0.0; }

/// sigma = 1/sqrt(fan_in) * min(1, sqrt(fan_out / fan_in))
double spectral_init_sigma(Index fan_in, Index fan_out);

/// fan_in x fan_out matrix (input-by-output, so activations are x W) with
/// N(0, sigma^2) entries.
Matrix spectral_init(Index fan_in, Index fan_out, std::uint64_t seed);

/// Central differences (f(W + h E_ij) - f(W - h E_ij)) / 2h for every entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& w, double h);

}  // namespace mousse
