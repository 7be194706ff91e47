#pragma once

#include "mousse/optim/common.hpp"
#include "mousse/spectral.hpp"

namespace mousse {

struct MuonConfig {
  double beta = 0.95;
  NsConfig ns = NsConfig::ns5();
  bool nesterov = false;
};

template <typename Scalar>
struct MuonState {
  MuonConfig cfg;
  Mat<Scalar> m;
  long last_step = 0;

  MuonState(Index rows, Index cols, MuonConfig config)
      : cfg(std::move(config)), m(Mat<Scalar>::Zero(rows, cols)) {}

  void save(Checkpoint& ck, const std::string& prefix) const {
    detail::put(ck, prefix + "m", m);
    ck.put_scalar(prefix + "last_step", double(last_step));
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    detail::get(ck, prefix + "m", m);
    last_step = long(ck.get_scalar(prefix + "last_step"));
  }
};

/// M <- beta M + G; U = msign(M). Same momentum form as mousse_step, so
/// Mousse with alpha = 0 and no grafting reproduces this stepper.
template <typename Scalar>
UpdateReport<Scalar> muon_step(Mat<Scalar>& param, const Mat<Scalar>& grad, MuonState<Scalar>& st,
                               const StepContext& ctx) {
  detail::check_step(param, grad, st.m, ctx, st.last_step, "muon_step");
  const Scalar beta = Scalar(st.cfg.beta);
  st.m = beta * st.m + grad;
  Mat<Scalar> update =
      st.cfg.nesterov ? msign_ns(Mat<Scalar>(grad + beta * st.m), st.cfg.ns) : msign_ns(st.m, st.cfg.ns);
  return detail::apply_update(param, std::move(update), ctx, std::nullopt, "muon_step");
}

}  // namespace mousse
