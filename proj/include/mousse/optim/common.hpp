#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "mousse/checkpoint.hpp"
#include "mousse/linalg.hpp"

namespace mousse {

/// Per-step inputs shared by every stepper.
struct StepContext {
  double lr = 0.0;
  double weight_decay = 0.0;
  /// 1-based; must strictly increase across calls on one state.
  long step_index = 1;
};

/// What a stepper did. `update` is the direction U before lr scaling, so the
/// parameter change is -lr * U after the decoupled decay.
template <typename Scalar>
struct UpdateReport {
  Mat<Scalar> update;
  double rms = 0.0;
  std::optional<double> graft_gamma;
};

namespace detail {

inline constexpr double kNormGuard = 1e-12;

template <typename Scalar>
void check_step(const Mat<Scalar>& param, const Mat<Scalar>& grad, const Mat<Scalar>& state_shape,
                const StepContext& ctx, long& last_step, const char* who) {
  require_same_shape(param, grad, who);
  require_same_shape(param, state_shape, who);
  require_finite(grad, who);
  if (!(ctx.lr >= 0.0) || !std::isfinite(ctx.lr)) {
    throw ParameterError(std::string(who) + ": learning rate must be finite and >= 0");
  }
  if (!(ctx.weight_decay >= 0.0) || !std::isfinite(ctx.weight_decay)) {
    throw ParameterError(std::string(who) + ": weight decay must be finite and >= 0");
  }
  if (ctx.step_index <= last_step) {
    throw ParameterError(std::string(who) + ": step_index " + std::to_string(ctx.step_index) +
                         " does not advance past " + std::to_string(last_step));
  }
  last_step = ctx.step_index;
}

/// Decoupled decay then descent: param <- param (1 - lr wd) - lr U.
template <typename Scalar>
UpdateReport<Scalar> apply_update(Mat<Scalar>& param, Mat<Scalar> update, const StepContext& ctx,
                                  std::optional<double> gamma, const char* who) {
  if (!update.allFinite()) throw NumericError(std::string(who) + ": non-finite update");
  param *= Scalar(1.0 - ctx.lr * ctx.weight_decay);
  param.noalias() -= Scalar(ctx.lr) * update;
  UpdateReport<Scalar> report;
  report.rms = double(rms_norm(update));
  report.graft_gamma = gamma;
  report.update = std::move(update);
  return report;
}

template <typename Scalar>
void put(Checkpoint& ck, const std::string& name, const Mat<Scalar>& m) {
  ck.put(name, m.template cast<double>());
}

template <typename Scalar>
void get(const Checkpoint& ck, const std::string& name, Mat<Scalar>& out) {
  const Matrix& m = ck.get(name);
  if (m.rows() != out.rows() || m.cols() != out.cols()) {
    throw IoError("checkpoint: section '" + name + "' has shape " + shape_string(m.rows(), m.cols()) +
                  ", expected " + shape_string(out.rows(), out.cols()));
  }
  out = m.template cast<Scalar>();
}

}  // namespace detail
}  // namespace mousse
