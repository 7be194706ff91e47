#pragma once

#include <string>
#include <string_view>

namespace mousse {

enum class ScheduleKind { cosine, wsd, constant };
enum class DecayShape { linear, cosine };

const char* to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);
const char* to_string(DecayShape shape);
DecayShape parse_decay_shape(std::string_view name);

/// Learning-rate trajectory over steps 0..total_steps.
///
/// Every kind starts with a linear warmup lr(s) = peak * s / W over the
/// first W = round(warmup_frac * total) steps, so step 1 already has a
/// non-zero rate and step W is exactly `peak_lr`.
///
///   cosine    final + (peak - final) * (1 + cos(pi * tau)) / 2, tau over (W, total]
///   wsd       flat at peak, then decays to final over the last
///             D = round(decay_frac * total) steps (linear by default)
///   constant  peak after warmup; final_lr is not used
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::cosine;
  long total_steps = 1000;
  double warmup_frac = 0.1;
  double decay_frac = 0.1;
  double peak_lr = 1e-2;
  double final_lr = 0.0;
  DecayShape wsd_decay = DecayShape::linear;

  long warmup_steps() const;
  /// Length of the WSD decay phase (0 for other kinds).
  long decay_steps() const;
  /// Last step of the WSD stable plateau.
  long stable_end() const;

  void validate() const;
};

/// Learning rate at `step` in [0, total_steps]; lr_at(total_steps) is exactly
/// final_lr for cosine and wsd.
double lr_at(const ScheduleSpec& spec, long step);

}  // namespace mousse
