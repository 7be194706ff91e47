#include <gtest/gtest.h>

#include "mousse/errors.hpp"
#include "mousse/sched.hpp"

using namespace mousse;

namespace {

ScheduleSpec spec_of(ScheduleKind kind, long total = 10000) {
  ScheduleSpec s;
  s.kind = kind;
  s.total_steps = total;
  s.warmup_frac = 0.1;
  s.decay_frac = 0.1;
  s.peak_lr = 0.02;
  s.final_lr = 0.0;
  return s;
}

}  // namespace

TEST(Schedule, CosineAnchors) {
  const auto s = spec_of(ScheduleKind::cosine);
  EXPECT_DOUBLE_EQ(lr_at(s, 1000), 0.02);
  EXPECT_EQ(lr_at(s, 10000), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 500), 0.01);
  EXPECT_NEAR(lr_at(s, 5500), 0.01, 1e-15);
}

TEST(Schedule, WsdPlateauAndDecay) {
  const auto s = spec_of(ScheduleKind::wsd);
  EXPECT_DOUBLE_EQ(lr_at(s, 5000), 0.02);
  EXPECT_EQ(s.stable_end(), 9000);
  EXPECT_DOUBLE_EQ(lr_at(s, 9000), 0.02);
  EXPECT_NEAR(lr_at(s, 9500), 0.01, 1e-15);
  EXPECT_EQ(lr_at(s, 10000), 0.0);
  ScheduleSpec c = s;
  c.wsd_decay = DecayShape::cosine;
  EXPECT_NEAR(lr_at(c, 9500), 0.01, 1e-15);
  EXPECT_EQ(lr_at(c, 10000), 0.0);
}

TEST(Schedule, ConstantIgnoresFinal) {
  auto s = spec_of(ScheduleKind::constant);
  s.final_lr = 0.5;
  EXPECT_DOUBLE_EQ(lr_at(s, 10000), 0.02);
  EXPECT_DOUBLE_EQ(lr_at(s, 1), 0.02 * 1 / 1000);
}

TEST(Schedule, MonotoneAfterWarmup) {
  for (auto kind : {ScheduleKind::cosine, ScheduleKind::wsd}) {
    const auto s = spec_of(kind, 1000);
    for (long k = s.warmup_steps() + 1; k <= s.total_steps; ++k) {
      ASSERT_LE(lr_at(s, k), lr_at(s, k - 1) + 1e-18);
    }
  }
}

TEST(Schedule, OutOfRangeStep) {
  const auto s = spec_of(ScheduleKind::cosine);
  EXPECT_THROW(lr_at(s, -1), RangeError);
  EXPECT_THROW(lr_at(s, 10001), RangeError);
}

TEST(Schedule, Validation) {
  auto s = spec_of(ScheduleKind::wsd);
  EXPECT_NO_THROW(s.validate());
  s.warmup_frac = 0.95;
  EXPECT_THROW(s.validate(), ParameterError);
  s = spec_of(ScheduleKind::cosine);
  s.final_lr = 0.05;
  EXPECT_THROW(s.validate(), ParameterError);
  s = spec_of(ScheduleKind::cosine);
  s.total_steps = 0;
  EXPECT_THROW(s.validate(), ParameterError);
  s = spec_of(ScheduleKind::wsd);
  s.decay_frac = 0.0;
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Schedule, Parsing) {
  EXPECT_EQ(parse_schedule_kind("wsd"), ScheduleKind::wsd);
  EXPECT_STREQ(to_string(parse_schedule_kind("cosine")), "cosine");
  EXPECT_THROW(parse_schedule_kind("step"), ConfigError);
  EXPECT_EQ(parse_decay_shape("cosine"), DecayShape::cosine);
  EXPECT_THROW(parse_decay_shape("exp"), ConfigError);
}
