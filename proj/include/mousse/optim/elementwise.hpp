#pragma once

#include "mousse/optim/adamw.hpp"
#include "mousse/spectral.hpp"

namespace mousse {

/// Spectral descent under the diagonal metric sqrt(v): the second moment
/// comes from raw gradients, as in Adam.
struct ElementwiseConfig {
  /// beta1 = 0 orthogonalizes the raw gradient G / sqrt(v).
  AdamConfig adam{0.0, 0.95, 1e-8};
  NsConfig ns = NsConfig::ns5();
};

template <typename Scalar>
struct ElementwiseState {
  ElementwiseConfig cfg;
  AdamState<Scalar> adam;
  long last_step = 0;

  ElementwiseState(Index rows, Index cols, ElementwiseConfig config)
      : cfg(std::move(config)), adam(rows, cols, cfg.adam) {}

  void save(Checkpoint& ck, const std::string& prefix) const {
    ck.put_scalar(prefix + "last_step", double(last_step));
    adam.save(ck, prefix + "adam.");
  }
  void load(const Checkpoint& ck, const std::string& prefix) {
    last_step = long(ck.get_scalar(prefix + "last_step"));
    adam.load(ck, prefix + "adam.");
  }
};

/// (1 / d) .* msign(g ./ d) for a positive elementwise scale d.
template <typename DerivedG, typename DerivedD>
Mat<typename DerivedG::Scalar> elementwise_whitened_direction(const Eigen::MatrixBase<DerivedG>& g,
                                                              const Eigen::MatrixBase<DerivedD>& d,
                                                              const NsConfig& ns) {
  using Scalar = typename DerivedG::Scalar;
  require_same_shape(g, d, "elementwise_whitened_direction");
  if (!(d.minCoeff() > Scalar(0))) {
    throw NumericError("elementwise_whitened_direction: scale must be positive");
  }
  const Mat<Scalar> whitened = g.cwiseQuotient(d);
  return msign_ns(whitened, ns).cwiseQuotient(d);
}

template <typename Scalar>
UpdateReport<Scalar> elementwise_whitened_step(Mat<Scalar>& param, const Mat<Scalar>& grad,
                                               ElementwiseState<Scalar>& st, const StepContext& ctx) {
  detail::check_step(param, grad, st.adam.m, ctx, st.last_step, "elementwise_whitened_step");
  st.adam.accumulate(grad);
  const Mat<Scalar> d = (st.adam.v_hat().array().sqrt() + Scalar(st.cfg.adam.eps)).matrix();
  return detail::apply_update(param, elementwise_whitened_direction(st.adam.m_hat(), d, st.cfg.ns),
                              ctx, std::nullopt, "elementwise_whitened_step");
}

}  // namespace mousse
