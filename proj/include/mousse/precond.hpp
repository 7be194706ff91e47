#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "mousse/checkpoint.hpp"
#include "mousse/linalg.hpp"
#include "mousse/spectral.hpp"

namespace mousse {

enum class PrecondMode { double_sided, left_only, right_only };

inline const char* to_string(PrecondMode mode) {
  switch (mode) {
    case PrecondMode::double_sided: return "double_sided";
    case PrecondMode::left_only: return "left_only";
    case PrecondMode::right_only: return "right_only";
  }
  return "?";
}

struct PrecondConfig {
  PrecondMode mode = PrecondMode::double_sided;
  int refresh_interval = 10;
  double beta_pc = 0.95;
  double alpha = 0.125;
  double eps = 1e-5;
  /// Exponent used instead of `alpha` when only one side is active.
  std::optional<double> alpha_single;
  /// Read the factors as EMA / (1 - beta_pc^t). See KroneckerStats::refresh.
  bool bias_correction = false;

  double effective_alpha() const {
    if (mode != PrecondMode::double_sided && alpha_single) return *alpha_single;
    return alpha;
  }

  void validate() const {
    if (refresh_interval < 1) throw ParameterError("precond: refresh_interval must be >= 1");
    if (!(beta_pc > 0.0 && beta_pc < 1.0)) throw ParameterError("precond: beta_pc must lie in (0, 1)");
    if (!(eps > 0.0)) throw ParameterError("precond: eps must be positive");
    const double a = effective_alpha();
    if (!(a >= 0.0 && a <= 0.5)) throw ParameterError("precond: alpha must lie in [0, 0.5]");
  }
};

/// Numbers recorded at each refresh for one side.
struct FactorDiagnostics {
  /// Tr of the raw EMA factor.
  double raw_trace = 0.0;
  /// RMS of the raw factor entries.
  double raw_rms = 0.0;
  /// Tr(dim / Tr(F) * F): the normalized factor before any damping.
  double normalized_trace = 0.0;
  /// Tr(dim / (Tr(F) + eps) * F), the factor actually decomposed (minus eps I).
  double damped_normalized_trace = 0.0;
  /// lambda_max / lambda_min of the damped, trace-normalized factor.
  double condition = 0.0;
};

/// Kronecker-factored curvature statistics L = E[G G^T], R = E[G^T G].
///
/// Accumulates plain EMAs of the gradient Gram matrices and, on refresh,
/// caches the eigenbasis Q and the tempered scalers S = Lambda^(-alpha) of
/// the trace-normalized, damped factors. Those caches define the whitening
/// sandwich S_L Q_L^T (.) Q_R S_R used by Mousse.
///
/// Single writer: update/refresh must not race with whiten/unwhiten on the
/// same instance.
template <typename Scalar>
class KroneckerStats {
 public:
  using MatrixT = Mat<Scalar>;
  using VectorT = Vec<Scalar>;

  struct Side {
    MatrixT factor;
    std::optional<EigDecomp<Scalar>> eig;
    std::optional<VectorT> scalers;
    FactorDiagnostics diagnostics;
  };

  KroneckerStats(Index rows, Index cols, PrecondConfig cfg) : rows_(rows), cols_(cols), cfg_(cfg) {
    if (rows < 1 || cols < 1) throw DimensionError("KroneckerStats: empty shape");
    cfg_.validate();
    if (cfg_.mode != PrecondMode::right_only) left_ = Side{MatrixT::Zero(rows, rows), {}, {}, {}};
    if (cfg_.mode != PrecondMode::left_only) right_ = Side{MatrixT::Zero(cols, cols), {}, {}, {}};
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const PrecondConfig& config() const { return cfg_; }
  long step() const { return step_; }
  long last_refresh_step() const { return last_refresh_; }
  bool has_cache() const { return last_refresh_ >= 0; }

  const std::optional<Side>& left() const { return left_; }
  const std::optional<Side>& right() const { return right_; }

  /// L <- beta_pc L + (1 - beta_pc) G G^T, and likewise R with G^T G.
  template <typename Derived>
  void update(const Eigen::MatrixBase<Derived>& g) {
    if (g.rows() != rows_ || g.cols() != cols_) {
      throw DimensionError("KroneckerStats::update: gradient is " + shape_string(g.rows(), g.cols()) +
                           ", expected " + shape_string(rows_, cols_));
    }
    require_finite(g, "KroneckerStats::update");
    const Scalar beta = Scalar(cfg_.beta_pc);
    if (left_) {
      left_->factor *= beta;
      left_->factor.noalias() += (Scalar(1) - beta) * (g * g.transpose());
    }
    if (right_) {
      right_->factor *= beta;
      right_->factor.noalias() += (Scalar(1) - beta) * (g.transpose() * g);
    }
    ++step_;
  }

  /// True on the first step with statistics and on every multiple of T.
  bool refresh_due() const {
    if (step_ == 0) return false;
    return !has_cache() || step_ % cfg_.refresh_interval == 0;
  }

  /// Recomputes the eigen caches from the current factors.
  ///
  /// Per active side: F~ = dim / (Tr F + eps) * F, (Q, Lambda) = eigh(F~ + eps I),
  /// S = Lambda^(-alpha). Negative eigenvalues of F~ (roundoff) are clamped to
  /// zero before the shift, so every damped eigenvalue is at least eps.
  ///
  /// With bias_correction the factor is read as F / (1 - beta_pc^t). Since
  /// trace_normalize(c F, eps) = dim / (Tr F + eps / c) * F, a global factor c
  /// only rescales the damping in the trace denominator; for Tr F >> eps the
  /// correction has no effect on Q or S.
  void refresh() {
    if (left_) refresh_side(*left_);
    if (right_) refresh_side(*right_);
    last_refresh_ = step_;
  }

  /// diag(S_L) Q_L^T m Q_R diag(S_R); an inactive side acts as identity.
  template <typename Derived>
  MatrixT whiten(const Eigen::MatrixBase<Derived>& m) const {
    require_ready(m, "whiten");
    MatrixT out = m;
    if (left_) out = left_->scalers->asDiagonal() * (left_->eig->vectors.transpose() * out);
    if (right_) out = (out * right_->eig->vectors) * right_->scalers->asDiagonal();
    return out;
  }

  /// Q_L diag(S_L) m diag(S_R) Q_R^T. The scalers are applied a second time
  /// rather than inverted, giving L^(-a) msign(L^(-a) G R^(-a)) R^(-a) overall.
  template <typename Derived>
  MatrixT unwhiten(const Eigen::MatrixBase<Derived>& m) const {
    require_ready(m, "unwhiten");
    MatrixT out = m;
    if (left_) out = left_->eig->vectors * (left_->scalers->asDiagonal() * out);
    if (right_) out = (out * right_->scalers->asDiagonal()) * right_->eig->vectors.transpose();
    return out;
  }

  /// Q_L S_L Q_L^T m Q_R S_R Q_R^T, i.e. L^(-a) m R^(-a) in the original basis.
  template <typename Derived>
  MatrixT precondition(const Eigen::MatrixBase<Derived>& m) const {
    return rotate_out(whiten(m));
  }

  /// Q_L^T m Q_R (no scaling).
  template <typename Derived>
  MatrixT rotate_in(const Eigen::MatrixBase<Derived>& m) const {
    require_ready(m, "rotate_in");
    MatrixT out = m;
    if (left_) out = left_->eig->vectors.transpose() * out;
    if (right_) out = out * right_->eig->vectors;
    return out;
  }

  /// Q_L m Q_R^T (no scaling).
  template <typename Derived>
  MatrixT rotate_out(const Eigen::MatrixBase<Derived>& m) const {
    require_ready(m, "rotate_out");
    MatrixT out = m;
    if (left_) out = left_->eig->vectors * out;
    if (right_) out = out * right_->eig->vectors.transpose();
    return out;
  }

  /// Replaces an accumulated factor, e.g. to pin one side to known statistics.
  void set_left_factor(const MatrixT& f) { set_factor(left_, f, rows_, "left"); }
  void set_right_factor(const MatrixT& f) { set_factor(right_, f, cols_, "right"); }

  void save(Checkpoint& ck, const std::string& prefix) const {
    ck.put_scalar(prefix + "mode", static_cast<double>(cfg_.mode));
    ck.put_scalar(prefix + "rows", static_cast<double>(rows_));
    ck.put_scalar(prefix + "cols", static_cast<double>(cols_));
    ck.put_scalar(prefix + "step", static_cast<double>(step_));
    ck.put_scalar(prefix + "last_refresh", static_cast<double>(last_refresh_));
    if (left_) save_side(ck, prefix + "l.", *left_);
    if (right_) save_side(ck, prefix + "r.", *right_);
  }

  /// Restores state saved by `save`. The configuration must match the one
  /// this instance was built with (mode and shape are checked).
  void load(const Checkpoint& ck, const std::string& prefix) {
    if (static_cast<int>(ck.get_scalar(prefix + "mode")) != static_cast<int>(cfg_.mode) ||
        static_cast<Index>(ck.get_scalar(prefix + "rows")) != rows_ ||
        static_cast<Index>(ck.get_scalar(prefix + "cols")) != cols_) {
      throw IoError("checkpoint: preconditioner section '" + prefix + "' does not match config");
    }
    step_ = static_cast<long>(ck.get_scalar(prefix + "step"));
    last_refresh_ = static_cast<long>(ck.get_scalar(prefix + "last_refresh"));
    if (left_) load_side(ck, prefix + "l.", *left_, rows_);
    if (right_) load_side(ck, prefix + "r.", *right_, cols_);
  }

 private:
  void refresh_side(Side& side) {
    const Scalar eps = Scalar(cfg_.eps);
    MatrixT f = side.factor;
    if (cfg_.bias_correction && step_ > 0) {
      f /= Scalar(1) - std::pow(Scalar(cfg_.beta_pc), Scalar(step_));
    }
    const Index dim = f.rows();
    const MatrixT normalized = trace_normalize(f, cfg_.eps);
    auto eig = sym_eig(normalized + eps * MatrixT::Identity(dim, dim));
    // max(mu, eps) == max(lambda~, 0) + eps for the shifted eigenvalues mu.
    const VectorT lambda = eig.values.array() - eps;
    side.scalers = psd_tempered_scalers(lambda, cfg_.effective_alpha(), cfg_.eps);

    FactorDiagnostics& d = side.diagnostics;
    d.raw_trace = double(f.trace());
    d.raw_rms = double(rms_norm(f));
    d.normalized_trace = double(trace_normalize(f, 0.0).trace());
    d.damped_normalized_trace = double(normalized.trace());
    const VectorT damped = eig.values.cwiseMax(eps);
    d.condition = double(damped.maxCoeff() / damped.minCoeff());
    side.eig = std::move(eig);
  }

  template <typename Derived>
  void require_ready(const Eigen::MatrixBase<Derived>& m, const char* what) const {
    if (!has_cache()) {
      throw StateError(std::string("KroneckerStats::") + what + ": refresh never executed");
    }
    if (m.rows() != rows_ || m.cols() != cols_) {
      throw DimensionError(std::string("KroneckerStats::") + what + ": input is " +
                           shape_string(m.rows(), m.cols()) + ", expected " +
                           shape_string(rows_, cols_));
    }
  }

  static void set_factor(std::optional<Side>& side, const MatrixT& f, Index dim, const char* name) {
    if (!side) throw StateError(std::string("KroneckerStats: ") + name + " side is inactive");
    if (f.rows() != dim || f.cols() != dim) {
      throw DimensionError(std::string("KroneckerStats: ") + name + " factor must be " +
                           shape_string(dim, dim));
    }
    side->factor = f;
  }

  static void save_side(Checkpoint& ck, const std::string& prefix, const Side& side) {
    ck.put(prefix + "factor", side.factor.template cast<double>());
    if (side.eig) {
      ck.put(prefix + "eig.vectors", side.eig->vectors.template cast<double>());
      ck.put_vector(prefix + "eig.values", side.eig->values.template cast<double>());
      ck.put_vector(prefix + "scalers", side.scalers->template cast<double>());
    }
  }

  static void load_side(const Checkpoint& ck, const std::string& prefix, Side& side, Index dim) {
    const Matrix& f = ck.get(prefix + "factor");
    if (f.rows() != dim || f.cols() != dim) {
      throw IoError("checkpoint: factor '" + prefix + "' has the wrong shape");
    }
    side.factor = f.template cast<Scalar>();
    if (ck.contains(prefix + "eig.vectors")) {
      EigDecomp<Scalar> eig;
      eig.vectors = ck.get(prefix + "eig.vectors").template cast<Scalar>();
      eig.values = ck.get_vector(prefix + "eig.values").template cast<Scalar>();
      side.eig = std::move(eig);
      side.scalers = ck.get_vector(prefix + "scalers").template cast<Scalar>();
    } else {
      side.eig.reset();
      side.scalers.reset();
    }
  }

  Index rows_;
  Index cols_;
  PrecondConfig cfg_;
  std::optional<Side> left_;
  std::optional<Side> right_;
  long step_ = 0;
  long last_refresh_ = -1;
};

}  // namespace mousse
