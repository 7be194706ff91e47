#pragma once

#include "mousse/optim/common.hpp"

namespace mousse {

// The coefficients follow the common Lion convention (0.9, 0.99).
struct LionConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
};

template <typename Scalar>
struct LionState {
  LionConfig cfg;
  Mat<Scalar> m;
  long last_step = 0;

  LionState(Index rows, Index cols, LionConfig config)
      : cfg(config), m(Mat<Scalar>::Zero(rows, cols)) {}

  void save(Checkpoint& ck, const std::string& prefix) const {
    detail::put(ck, prefix + "m", m);
    ck.put_scalar(prefix + "last_step", double(last_step));
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    detail::get(ck, prefix + "m", m);
    last_step = long(ck.get_scalar(prefix + "last_step"));
  }
};

/// U = sign(beta1 M + (1 - beta1) G), then M <- beta2 M + (1 - beta2) G.
template <typename Scalar>
UpdateReport<Scalar> lion_step(Mat<Scalar>& param, const Mat<Scalar>& grad, LionState<Scalar>& st,
                               const StepContext& ctx) {
  detail::check_step(param, grad, st.m, ctx, st.last_step, "lion_step");
  const Scalar b1 = Scalar(st.cfg.beta1);
  const Scalar b2 = Scalar(st.cfg.beta2);
  Mat<Scalar> update = (b1 * st.m + (Scalar(1) - b1) * grad).array().sign().matrix();
  st.m = b2 * st.m + (Scalar(1) - b2) * grad;
  return detail::apply_update(param, std::move(update), ctx, std::nullopt, "lion_step");
}

}  // namespace mousse
