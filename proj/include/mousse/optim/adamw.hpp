#pragma once

#include "mousse/optim/common.hpp"

namespace mousse {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

/// First and second moments with their own bias-correction counter.
template <typename Scalar>
struct AdamState {
  AdamConfig cfg;
  Mat<Scalar> m;
  Mat<Scalar> v;
  long t = 0;
  long last_step = 0;

  AdamState(Index rows, Index cols, AdamConfig config)
      : cfg(config), m(Mat<Scalar>::Zero(rows, cols)), v(Mat<Scalar>::Zero(rows, cols)) {}

  /// Folds g into both moments and advances t.
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    const Scalar b1 = Scalar(cfg.beta1);
    const Scalar b2 = Scalar(cfg.beta2);
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    ++t;
  }

  Mat<Scalar> m_hat() const {
    return m / (Scalar(1) - std::pow(Scalar(cfg.beta1), Scalar(t)));
  }
  Mat<Scalar> v_hat() const {
    return v / (Scalar(1) - std::pow(Scalar(cfg.beta2), Scalar(t)));
  }

  /// m_hat / (sqrt(v_hat) + eps)
  Mat<Scalar> direction() const {
    return m_hat().array() / (v_hat().array().sqrt() + Scalar(cfg.eps));
  }

  void save(Checkpoint& ck, const std::string& prefix) const {
    detail::put(ck, prefix + "m", m);
    detail::put(ck, prefix + "v", v);
    ck.put_scalar(prefix + "t", double(t));
    ck.put_scalar(prefix + "last_step", double(last_step));
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    detail::get(ck, prefix + "m", m);
    detail::get(ck, prefix + "v", v);
    t = long(ck.get_scalar(prefix + "t"));
    last_step = long(ck.get_scalar(prefix + "last_step"));
  }
};

inline void validate(const AdamConfig& cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw ParameterError("adam: beta1 must lie in [0, 1)");
  if (!(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) throw ParameterError("adam: beta2 must lie in (0, 1)");
  if (!(cfg.eps > 0.0)) throw ParameterError("adam: eps must be positive");
}

/// Bias-corrected Adam with decoupled weight decay.
template <typename Scalar>
UpdateReport<Scalar> adamw_step(Mat<Scalar>& param, const Mat<Scalar>& grad, AdamState<Scalar>& st,
                                const StepContext& ctx) {
  detail::check_step(param, grad, st.m, ctx, st.last_step, "adamw_step");
  st.accumulate(grad);
  return detail::apply_update(param, st.direction(), ctx, std::nullopt, "adamw_step");
}

}  // namespace mousse
