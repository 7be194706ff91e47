#include "mousse/sched.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mousse/errors.hpp"

namespace mousse {

const char* to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::wsd: return "wsd";
    case ScheduleKind::constant: return "constant";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "wsd") return ScheduleKind::wsd;
  if (name == "constant") return ScheduleKind::constant;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

const char* to_string(DecayShape shape) {
  return shape == DecayShape::linear ? "linear" : "cosine";
}

DecayShape parse_decay_shape(std::string_view name) {
  if (name == "linear") return DecayShape::linear;
  if (name == "cosine") return DecayShape::cosine;
  throw ConfigError("unknown decay shape '" + std::string(name) + "'");
}

long ScheduleSpec::warmup_steps() const {
  return std::lround(warmup_frac * static_cast<double>(total_steps));
}

long ScheduleSpec::decay_steps() const {
  if (kind != ScheduleKind::wsd) return 0;
  return std::max(1L, std::lround(decay_frac * static_cast<double>(total_steps)));
}

long ScheduleSpec::stable_end() const { return total_steps - decay_steps(); }

void ScheduleSpec::validate() const {
  if (total_steps < 1) throw ParameterError("schedule: total_steps must be >= 1");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) {
    throw ParameterError("schedule: warmup_frac must lie in [0, 1)");
  }
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) {
    throw ParameterError("schedule: peak_lr must be finite and >= 0");
  }
  if (!(final_lr >= 0.0)) throw ParameterError("schedule: final_lr must be >= 0");
  if (kind != ScheduleKind::constant && !(peak_lr > final_lr)) {
    throw ParameterError("schedule: peak_lr must exceed final_lr");
  }
  if (kind == ScheduleKind::wsd) {
    if (!(decay_frac > 0.0 && decay_frac <= 1.0)) {
      throw ParameterError("schedule: decay_frac must lie in (0, 1]");
    }
    if (warmup_frac + decay_frac > 1.0 + 1e-12 || warmup_steps() > stable_end()) {
      throw ParameterError("schedule: warmup and decay phases overlap");
    }
  }
}

double lr_at(const ScheduleSpec& spec, long step) {
  if (step < 0 || step > spec.total_steps) {
    throw RangeError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(spec.total_steps) + "]");
  }
  const long warmup = spec.warmup_steps();
  if (step <= warmup && warmup > 0) {
    return spec.peak_lr * (static_cast<double>(step) / static_cast<double>(warmup));
  }
  const double span = spec.peak_lr - spec.final_lr;
  switch (spec.kind) {
    case ScheduleKind::constant:
      return spec.peak_lr;
    case ScheduleKind::cosine: {
      if (step == spec.total_steps) return spec.final_lr;
      const double tau = static_cast<double>(step - warmup) / static_cast<double>(spec.total_steps - warmup);
      return spec.final_lr + span * 0.5 * (1.0 + std::cos(std::numbers::pi * tau));
    }
    case ScheduleKind::wsd: {
      if (step == spec.total_steps) return spec.final_lr;
      const long stable_end = spec.stable_end();
      if (step <= stable_end) return spec.peak_lr;
      const double p = static_cast<double>(step - stable_end) / static_cast<double>(spec.decay_steps());
      if (spec.wsd_decay == DecayShape::linear) return spec.peak_lr - span * p;
      return spec.final_lr + span * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
    }
  }
  return spec.peak_lr;
}

}  // namespace mousse
