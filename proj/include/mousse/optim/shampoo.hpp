#pragma once

#include "mousse/optim/common.hpp"
#include "mousse/precond.hpp"

namespace mousse {

struct ShampooConfig {
  double beta = 0.95;
  PrecondConfig precond = [] {
    PrecondConfig p;
    p.alpha = 0.25;
    return p;
  }();
};

template <typename Scalar>
struct ShampooState {
  ShampooConfig cfg;
  Mat<Scalar> m;
  KroneckerStats<Scalar> stats;
  long last_step = 0;

  ShampooState(Index rows, Index cols, ShampooConfig config)
      : cfg(std::move(config)), m(Mat<Scalar>::Zero(rows, cols)), stats(rows, cols, cfg.precond) {}

  void save(Checkpoint& ck, const std::string& prefix) const {
    detail::put(ck, prefix + "m", m);
    ck.put_scalar(prefix + "last_step", double(last_step));
    stats.save(ck, prefix + "stats.");
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    detail::get(ck, prefix + "m", m);
    last_step = long(ck.get_scalar(prefix + "last_step"));
    stats.load(ck, prefix + "stats.");
  }
};

/// U = L^(-a) M R^(-a) using the same trace-normalized, damped factors and
/// refresh cadence as Mousse, without the spectral constraint.
template <typename Scalar>
UpdateReport<Scalar> shampoo_step(Mat<Scalar>& param, const Mat<Scalar>& grad,
                                  ShampooState<Scalar>& st, const StepContext& ctx) {
  detail::check_step(param, grad, st.m, ctx, st.last_step, "shampoo_step");
  st.m = Scalar(st.cfg.beta) * st.m + grad;
  st.stats.update(grad);
  if (st.stats.refresh_due()) st.stats.refresh();
  return detail::apply_update(param, st.stats.precondition(st.m), ctx, std::nullopt, "shampoo_step");
}

}  // namespace mousse
