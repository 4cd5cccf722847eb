#include <gtest/gtest.h>

#include <cmath>

#include "colorguide/schedule.hpp"

namespace sch = colorguide::schedule;

TEST(Progress, EndpointsAndInterior) {
  sch::ScheduleContext ctx;
  ctx.T = 1000;
  ctx.t_min = 0;
  EXPECT_EQ(sch::progress(1000, ctx), 0.0);
  EXPECT_EQ(sch::progress(0, ctx), 1.0);
  EXPECT_EQ(sch::progress(250, ctx), 0.75);
}

TEST(Progress, RejectsOutOfRange) {
  sch::ScheduleContext ctx;
  EXPECT_THROW(sch::progress(ctx.T + 1, ctx), std::invalid_argument);
  EXPECT_THROW(sch::progress(ctx.t_min - 1, ctx), std::invalid_argument);
}

TEST(Progress, ExhaustiveGridIsMonotone) {
  sch::ScheduleContext ctx;
  ctx.T = 99;
  ctx.t_min = 3;
  double prev = -1.0;
  for (int t = 99; t >= 3; --t) {
    const double p = sch::progress(t, ctx);
    EXPECT_EQ(p, (99.0 - t) / 96.0);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(LateStartGate, Values) {
  EXPECT_EQ(sch::late_start_gate(0.2, 0.2), 0.0);
  EXPECT_EQ(sch::late_start_gate(0.1, 0.2), 0.0);
  EXPECT_EQ(sch::late_start_gate(1.0, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(sch::late_start_gate(0.6, 0.2), 0.5);
  EXPECT_THROW(sch::late_start_gate(0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(sch::late_start_gate(0.5, -0.1), std::invalid_argument);
}

TEST(LateStartGate, ClosedFormOnGrid) {
  for (int si = 0; si < 10; ++si) {
    const double s = si / 10.0;
    for (int pi = 0; pi <= 100; ++pi) {
      const double prog = pi / 100.0;
      const double g = sch::late_start_gate(prog, s);
      EXPECT_EQ(g, prog <= s ? 0.0 : (prog - s) / (1.0 - s));
      EXPECT_GE(g, 0.0);
      EXPECT_LE(g, 1.0);
    }
  }
}

TEST(Window, DefaultIsSixteenToEighty) {
  sch::ScheduleContext ctx;
  ctx.N = 80;
  ctx.f_start = 0.2;
  ctx.f_stop = 1.0;
  EXPECT_EQ(sch::window_bounds(ctx), std::make_pair(16, 80));
  EXPECT_FALSE(sch::guidance_window(15, ctx));
  EXPECT_TRUE(sch::guidance_window(16, ctx));
  EXPECT_TRUE(sch::guidance_window(79, ctx));
  EXPECT_FALSE(sch::guidance_window(80, ctx));
}

TEST(Window, EmptyWhenStartEqualsStop) {
  sch::ScheduleContext ctx;
  ctx.f_start = ctx.f_stop = 0.5;
  for (int i = 0; i < ctx.N; ++i) {
    EXPECT_FALSE(sch::guidance_window(i, ctx));
  }
}

TEST(Window, ExhaustiveSmallGrid) {
  sch::ScheduleContext ctx;
  for (int N = 1; N <= 100; ++N) {
    ctx.N = N;
    for (int a = 0; a <= 10; ++a) {
      for (int b = a; b <= 10; ++b) {
        ctx.f_start = a / 10.0;
        ctx.f_stop = b / 10.0;
        const int lo = static_cast<int>(std::floor(ctx.f_start * N));
        const int hi = static_cast<int>(std::floor(ctx.f_stop * N));
        for (int i = 0; i < N; ++i) {
          ASSERT_EQ(sch::guidance_window(i, ctx), i >= lo && i < hi) << "N=" << N << " i=" << i;
        }
      }
    }
  }
}

TEST(LinDecay, Values) {
  EXPECT_EQ(sch::lin_decay_weight(0), 1.0);
  EXPECT_EQ(sch::lin_decay_weight(1), 0.5);
  EXPECT_EQ(sch::lin_decay_weight(79), 1.0 / 80.0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sch::lin_decay_weight(i), 1.0 / (i + 1));
  }
}

TEST(CvarRamp, Values) {
  sch::ScheduleContext ctx;
  ctx.T0 = 1000;
  ctx.k = 2;
  EXPECT_EQ(sch::cvar_ramp_weight(1000, ctx), 0.0);
  EXPECT_EQ(sch::cvar_ramp_weight(1200, ctx), 0.0);
  EXPECT_EQ(sch::cvar_ramp_weight(600, ctx), 200.0);
  for (int t = 0; t <= 100; ++t) {
    ctx.T0 = 100;
    EXPECT_EQ(sch::cvar_ramp_weight(t, ctx), (100.0 - t) / 2.0);
  }
}

TEST(Context, ValidateRejectsBadFields) {
  sch::ScheduleContext ctx;
  ctx.k = 0;
  EXPECT_THROW(ctx.validate(), std::invalid_argument);
  ctx = {};
  ctx.t_min = ctx.T;
  EXPECT_THROW(ctx.validate(), std::invalid_argument);
  ctx = {};
  ctx.s = 1.0;
  EXPECT_THROW(ctx.validate(), std::invalid_argument);
  EXPECT_NO_THROW(sch::ScheduleContext{}.validate());
}
