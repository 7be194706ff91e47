#include "mousse/testbed.hpp"

#include <cmath>

#include "mousse/random.hpp"

namespace mousse {

namespace {

Matrix spd_with_logspaced_spectrum(Index n, double kappa, std::uint64_t seed) {
  const Matrix q = rand_matrix(n, n, seed, Orthogonal{});
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    s(i) = std::pow(kappa, -t);
  }
  Matrix out = q.transpose() * s.asDiagonal() * q;
  return 0.5 * (out + out.transpose());
}

Matrix inv_sqrt(const Matrix& spd) {
  const auto e = sym_eig(spd);
  return e.vectors * e.values.cwiseSqrt().cwiseInverse().asDiagonal() * e.vectors.transpose();
}

}  // namespace

const char* to_string(TargetDist d) {
  return d == TargetDist::balanced ? "balanced" : "gaussian";
}

KronQuadratic make_kron_quadratic(Index rows, Index cols, double kappa, double noise_sigma,
                                  std::uint64_t seed, double target_scale, TargetDist target) {
  if (!(kappa >= 1.0)) throw ParameterError("make_kron_quadratic: kappa must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ParameterError("make_kron_quadratic: noise_sigma must be >= 0");
  KronQuadratic p;
  p.l_h = spd_with_logspaced_spectrum(rows, kappa, mix_seed(seed, 1));
  p.r_h = spd_with_logspaced_spectrum(cols, kappa, mix_seed(seed, 2));
  p.w_star = target_scale * rand_matrix(rows, cols, mix_seed(seed, 3));
  if (target == TargetDist::balanced) p.w_star = inv_sqrt(p.l_h) * p.w_star * inv_sqrt(p.r_h);
  p.noise_sigma = noise_sigma;
  p.seed = seed;
  return p;
}

double kron_quad_loss(const KronQuadratic& p, const Matrix& w) {
  require_same_shape(w, p.w_star, "kron_quad_loss");
  const Matrix e = w - p.w_star;
  // Tr(E^T L E R) = <L E R, E>
  return 0.5 * (p.l_h * e * p.r_h).cwiseProduct(e).sum();
}

LossGrad kron_quad_eval(const KronQuadratic& p, const Matrix& w, std::uint64_t step_seed) {
  require_same_shape(w, p.w_star, "kron_quad_eval");
  const Matrix e = w - p.w_star;
  LossGrad out;
  out.grad = p.l_h * e * p.r_h;
  out.loss = 0.5 * out.grad.cwiseProduct(e).sum();
  if (p.noise_sigma > 0.0) {
    Rng rng(mix_seed(p.seed ^ 0x6e6f697365ULL, step_seed));
    out.grad += p.noise_sigma * gaussian_matrix(w.rows(), w.cols(), rng);
  }
  return out;
}

MlpProblem make_mlp_problem(Index d_in, Index hidden, Index d_out, Index samples, Index batch_size,
                            std::uint64_t seed, double obs_noise) {
  if (d_in < 1 || hidden < 1 || d_out < 1) throw ParameterError("make_mlp_problem: empty layer");
  if (batch_size < 1 || samples < batch_size) {
    throw ParameterError("make_mlp_problem: need 1 <= batch_size <= samples");
  }
  MlpProblem p;
  p.batch_size = batch_size;
  p.seed = seed;
  p.x = rand_matrix(samples, d_in, mix_seed(seed, 10));
  p.teacher_w1 = spectral_init(d_in, hidden, mix_seed(seed, 11));
  p.teacher_w2 = spectral_init(hidden, d_out, mix_seed(seed, 12));
  const Matrix h = (p.x * p.teacher_w1).unaryExpr(&squared_relu);
  p.y = h * p.teacher_w2 + obs_noise * rand_matrix(samples, d_out, mix_seed(seed, 13));
  return p;
}

MlpEval mlp_forward_backward(const Matrix& x, const Matrix& y, const Matrix& w1, const Matrix& w2,
                             const Matrix& b) {
  if (x.cols() != w1.rows() || w1.cols() != w2.rows() || w2.cols() != y.cols() || x.rows() != y.rows()) {
    throw DimensionError("mlp_forward_backward: inconsistent shapes");
  }
  const bool has_bias = b.size() > 0;
  if (has_bias && (b.rows() != 1 || b.cols() != w2.cols())) {
    throw DimensionError("mlp_forward_backward: bias must be 1 x " + std::to_string(w2.cols()));
  }
  const double n = static_cast<double>(x.rows());
  const Matrix z = x * w1;
  const Matrix h = z.unaryExpr(&squared_relu);
  Matrix y_hat = h * w2;
  if (has_bias) y_hat.rowwise() += b.row(0);
  const Matrix resid = y_hat - y;

  MlpEval out;
  out.loss = resid.squaredNorm() / n;
  const Matrix d_out = (2.0 / n) * resid;
  out.grad_w2 = h.transpose() * d_out;
  // f'(z) = 2 max(z, 0)
  const Matrix d_z = (d_out * w2.transpose()).cwiseProduct(z.unaryExpr([](double v) {
    return v > 0.0 ? 2.0 * v : 0.0;
  }));
  out.grad_w1 = x.transpose() * d_z;
  if (has_bias) out.grad_b = d_out.colwise().sum();
  return out;
}

MlpEval mlp_eval(const MlpProblem& p, const Matrix& w1, const Matrix& w2, Index batch_index,
                 const Matrix& b) {
  if (batch_index < 0 || batch_index >= p.num_batches()) {
    throw RangeError("mlp_eval: batch index " + std::to_string(batch_index) + " outside [0, " +
                     std::to_string(p.num_batches()) + ")");
  }
  const Index start = batch_index * p.batch_size;
  return mlp_forward_backward(p.x.middleRows(start, p.batch_size), p.y.middleRows(start, p.batch_size),
                              w1, w2, b);
}

double mlp_full_loss(const MlpProblem& p, const Matrix& w1, const Matrix& w2, const Matrix& b) {
  return mlp_forward_backward(p.x, p.y, w1, w2, b).loss;
}

double spectral_init_sigma(Index fan_in, Index fan_out) {
  if (fan_in < 1 || fan_out < 1) throw ParameterError("spectral_init: fans must be >= 1");
  const double in = static_cast<double>(fan_in);
  const double out = static_cast<double>(fan_out);
  return (1.0 / std::sqrt(in)) * std::min(1.0, std::sqrt(out / in));
}

Matrix spectral_init(Index fan_in, Index fan_out, std::uint64_t seed) {
  return spectral_init_sigma(fan_in, fan_out) * rand_matrix(fan_in, fan_out, seed);
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& w, double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_grad: step must be positive");
  Matrix grad(w.rows(), w.cols());
  Matrix probe = w;
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace mousse
