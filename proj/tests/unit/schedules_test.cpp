#include <sstream>

#include <gtest/gtest.h>

#include <mmvae/schedules.hpp>

using namespace mmvae;

namespace {

BetaSchedule desk(ScheduleKind k) { return BetaSchedule::make(k, 8000); }
BetaSchedule full(ScheduleKind k) { return BetaSchedule::make(k, 80000); }

}  // namespace

TEST(Schedules, MakeSetsTailStart) {
  EXPECT_EQ(desk(ScheduleKind::constant0).tail_start, 7000);
  EXPECT_EQ(full(ScheduleKind::constant0).tail_start, 70000);
}

TEST(Schedules, ConstantOneEverywhere) {
  const auto s = full(ScheduleKind::constant1);
  for (std::int64_t e = 0; e < s.total_epochs; e += 7) EXPECT_EQ(s.beta_at(e), 1.0);
  EXPECT_EQ(s.beta_at(79999), 1.0);
}

TEST(Schedules, ConstantZeroWarmup) {
  const auto s = full(ScheduleKind::constant0);
  EXPECT_EQ(s.beta_at(0), 1.0);
  EXPECT_EQ(s.beta_at(500), 0.5);
  EXPECT_EQ(s.beta_at(999), 1.0 - 999.0 / 1000.0);
  EXPECT_EQ(s.beta_at(1000), 0.0);
  EXPECT_EQ(s.beta_at(50000), 0.0);
  double prev = 2.0;
  for (std::int64_t e = 0; e < s.total_epochs; ++e) {
    const double b = s.beta_at(e);
    EXPECT_LE(b, prev);
    prev = b;
  }
}

TEST(Schedules, DynamicFirstCycleIsFullDescent) {
  for (auto k : {ScheduleKind::dyn_plateau0, ScheduleKind::dyn_plateau1}) {
    const auto s = full(k);
    EXPECT_EQ(s.descent_length(0), 80);
    EXPECT_EQ(s.beta_at(0), 1.0);
    EXPECT_EQ(s.beta_at(40), 0.5);
    EXPECT_EQ(s.beta_at(79), 1.0 - 79.0 / 80.0);
    EXPECT_EQ(s.beta_at(80), 1.0);
  }
}

TEST(Schedules, DynamicAnchorsAtCycleStarts) {
  for (auto s : {full(ScheduleKind::dyn_plateau0), desk(ScheduleKind::dyn_plateau1)}) {
    for (std::int64_t e = 0; e < s.tail_start; ++e)
      EXPECT_EQ(s.beta_at(e) == 1.0, e % 80 == 0) << "epoch " << e;
  }
}

TEST(Schedules, DynamicPlateauGrows) {
  for (auto s : {full(ScheduleKind::dyn_plateau0), desk(ScheduleKind::dyn_plateau0)}) {
    std::int64_t prev = -1;
    for (std::int64_t c = 0; (c + 1) * 80 <= s.tail_start; ++c) {
      std::int64_t zeros = 0;
      for (std::int64_t e = c * 80; e < (c + 1) * 80; ++e) zeros += s.beta_at(e) == 0.0;
      EXPECT_GE(zeros, prev) << "cycle " << c;
      prev = zeros;
    }
    EXPECT_EQ(prev, 80 - s.descent_floor);
  }
}

TEST(Schedules, DescentLawHandComputed) {
  const auto s = desk(ScheduleKind::dyn_plateau0);  // K = 7000 / 80 = 87
  EXPECT_EQ(s.descent_cycles(), 87);
  EXPECT_EQ(s.descent_length(1), 79);   // round(80 * 86/87) = round(79.08)
  EXPECT_EQ(s.descent_length(43), 40);  // round(80 * 44/87) = round(40.46)
  EXPECT_EQ(s.descent_length(86), 4);   // round(0.92) = 1, floored at 4
  EXPECT_EQ(s.beta_at(43 * 80 + 20), 0.5);
  EXPECT_EQ(s.beta_at(43 * 80 + 40), 0.0);
}

TEST(Schedules, DynamicVariantsAgreeBeforeTailAndSplitAfter) {
  const auto a = desk(ScheduleKind::dyn_plateau0);
  const auto b = desk(ScheduleKind::dyn_plateau1);
  for (std::int64_t e = 0; e < a.tail_start; ++e) ASSERT_EQ(a.beta_at(e), b.beta_at(e));
  for (std::int64_t e = a.tail_start; e < a.total_epochs; ++e) {
    ASSERT_EQ(a.beta_at(e), 0.0);
    ASSERT_EQ(b.beta_at(e), 1.0);
  }
}

TEST(Schedules, RangeIsUnitInterval) {
  for (auto k : kAllSchedules) {
    const auto s = desk(k);
    for (std::int64_t e = 0; e < s.total_epochs; ++e) {
      const double b = s.beta_at(e);
      ASSERT_GE(b, 0.0);
      ASSERT_LE(b, 1.0);
    }
  }
}

TEST(Schedules, OutOfRangeEpochIsUsageError) {
  const auto s = desk(ScheduleKind::constant1);
  EXPECT_THROW(s.beta_at(-1), UsageError);
  EXPECT_THROW(s.beta_at(8000), UsageError);
}

TEST(Schedules, ValidateRejectsBadParameters) {
  auto s = desk(ScheduleKind::dyn_plateau0);
  s.tail_start = 9000;
  EXPECT_THROW(s.validate(), ConfigurationError);
  s = desk(ScheduleKind::dyn_plateau0);
  s.cycle_length = 0;
  EXPECT_THROW(s.validate(), ConfigurationError);
  EXPECT_THROW(BetaSchedule::make(ScheduleKind::constant0, 0), ConfigurationError);
  EXPECT_THROW(schedule_kind_from_string("linear"), ConfigurationError);
}

TEST(Schedules, NamesRoundTrip) {
  for (auto k : kAllSchedules) EXPECT_EQ(schedule_kind_from_string(to_string(k)), k);
}

TEST(Schedules, TableAndCsv) {
  const auto s = desk(ScheduleKind::constant0);
  const auto t = schedule_table(s, 250);
  ASSERT_EQ(t.size(), 32u);
  EXPECT_EQ(t[2].first, 500);
  EXPECT_EQ(t[2].second, 0.5);
  std::ostringstream os;
  write_schedule_csv(os, schedule_table(s, 4000));
  EXPECT_EQ(os.str(), "epoch,beta\n0,1\n4000,0\n");
  EXPECT_THROW(schedule_table(s, 0), UsageError);
}
