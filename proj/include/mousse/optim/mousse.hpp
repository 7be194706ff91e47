#pragma once

#include "mousse/optim/common.hpp"
#include "mousse/precond.hpp"
#include "mousse/spectral.hpp"

namespace mousse {

struct MousseConfig {
  /// Heavy-ball coefficient: M <- beta M + G (no dampening).
  double beta = 0.95;
  PrecondConfig precond{};
  NsConfig ns = NsConfig::ns5();
  /// Rescale the unwhitened update to the Frobenius norm of the NS output.
  bool grafting = true;
  /// Orthogonalize G + beta M instead of M.
  bool nesterov = false;
  /// Use the SVD polar factor instead of Newton-Schulz (oracle runs).
  bool exact_msign = false;
};

template <typename Scalar>
struct MousseState {
  MousseConfig cfg;
  Mat<Scalar> m;
  KroneckerStats<Scalar> stats;
  long last_step = 0;

  MousseState(Index rows, Index cols, MousseConfig config)
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

/// One Mousse step: spectral steepest descent in the whitened basis.
///
///   M  <- beta M + G
///   L, R EMA update from G; refresh Q, S on the first step and every T
///   M~ = S_L Q_L^T M Q_R S_R
///   M- = msign(M~),  gamma = ||M-||_F
///   U  = Q_L S_L M- S_R Q_R^T,  U <- gamma U / ||U||_F when grafting
///   W  <- W (1 - lr wd) - lr U
template <typename Scalar>
UpdateReport<Scalar> mousse_step(Mat<Scalar>& param, const Mat<Scalar>& grad,
                                 MousseState<Scalar>& st, const StepContext& ctx) {
  detail::check_step(param, grad, st.m, ctx, st.last_step, "mousse_step");
  const Scalar beta = Scalar(st.cfg.beta);
  st.m = beta * st.m + grad;
  st.stats.update(grad);
  if (st.stats.refresh_due()) st.stats.refresh();

  const Mat<Scalar> whitened =
      st.cfg.nesterov ? st.stats.whiten(grad + beta * st.m) : st.stats.whiten(st.m);
  const Mat<Scalar> ortho = st.cfg.exact_msign ? msign_exact(whitened) : msign_ns(whitened, st.cfg.ns);
  const Scalar gamma = ortho.norm();
  Mat<Scalar> update = st.stats.unwhiten(ortho);
  if (st.cfg.grafting) update *= gamma / (update.norm() + Scalar(detail::kNormGuard));
  return detail::apply_update(param, std::move(update), ctx, std::optional<double>(double(gamma)),
                              "mousse_step");
}

}  // namespace mousse
