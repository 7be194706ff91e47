#pragma once

#include "mousse/optim/adamw.hpp"
#include "mousse/precond.hpp"

namespace mousse {

struct SoapConfig {
  AdamConfig adam{0.95, 0.95, 1e-8};
  PrecondConfig precond{};
};

template <typename Scalar>
struct SoapState {
  SoapConfig cfg;
  KroneckerStats<Scalar> stats;
  /// Moments live in the rotated (eigen) frame.
  AdamState<Scalar> adam;
  long last_step = 0;
  /// ||U'||_F of the most recent rotated-frame update.
  double last_rotated_norm = 0.0;

  SoapState(Index rows, Index cols, SoapConfig config)
      : cfg(config), stats(rows, cols, cfg.precond), adam(rows, cols, cfg.adam) {}

  void save(Checkpoint& ck, const std::string& prefix) const {
    ck.put_scalar(prefix + "last_step", double(last_step));
    stats.save(ck, prefix + "stats.");
    adam.save(ck, prefix + "adam.");
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    last_step = long(ck.get_scalar(prefix + "last_step"));
    stats.load(ck, prefix + "stats.");
    adam.load(ck, prefix + "adam.");
  }
};

/// Adam in the curvature eigenbasis: G' = Q_L^T G Q_R, U' = Adam(G'),
/// U = Q_L U' Q_R^T. The tempered scalers are not used.
template <typename Scalar>
UpdateReport<Scalar> soap_step(Mat<Scalar>& param, const Mat<Scalar>& grad, SoapState<Scalar>& st,
                               const StepContext& ctx) {
  detail::check_step(param, grad, st.adam.m, ctx, st.last_step, "soap_step");
  st.stats.update(grad);
  if (st.stats.refresh_due()) st.stats.refresh();
  st.adam.accumulate(st.stats.rotate_in(grad));
  const Mat<Scalar> rotated = st.adam.direction();
  st.last_rotated_norm = double(rotated.norm());
  return detail::apply_update(param, st.stats.rotate_out(rotated), ctx, std::nullopt, "soap_step");
}

}  // namespace mousse
