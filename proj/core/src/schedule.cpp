#include "colorguide/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace colorguide::schedule {

void ScheduleContext::validate() const {
  if (!(T > t_min)) {
    throw std::invalid_argument("schedule.T: must exceed schedule.t_min");
  }
  if (!(s >= 0.0 && s < 1.0)) {
    throw std::invalid_argument("schedule.s: must lie in [0,1)");
  }
  if (N < 1) {
    throw std::invalid_argument("schedule.N: must be at least 1");
  }
  if (!(f_start >= 0.0 && f_start <= 1.0)) {
    throw std::invalid_argument("schedule.f_start: must lie in [0,1]");
  }
  if (!(f_stop >= 0.0 && f_stop <= 1.0)) {
    throw std::invalid_argument("schedule.f_stop: must lie in [0,1]");
  }
  if (f_start > f_stop) {
    throw std::invalid_argument("schedule.f_start: must not exceed schedule.f_stop");
  }
  if (k == 0.0 || !std::isfinite(k)) {
    throw std::invalid_argument("schedule.k: must be finite and nonzero");
  }
}

double progress(double t, const ScheduleContext& ctx) {
  if (!(t >= ctx.t_min && t <= ctx.T)) {
    throw std::invalid_argument("progress: timestep " + std::to_string(t) + " outside [t_min, T]");
  }
  if (!(ctx.T > ctx.t_min)) {
    throw std::invalid_argument("progress: T must exceed t_min");
  }
  return (ctx.T - t) / (ctx.T - ctx.t_min);
}

double late_start_gate(double prog, double s) {
  if (!(s >= 0.0 && s < 1.0)) {
    throw std::invalid_argument("late_start_gate: s must lie in [0,1)");
  }
  if (prog <= s) {
    return 0.0;
  }
  return (prog - s) / (1.0 - s);
}

std::pair<int, int> window_bounds(const ScheduleContext& ctx) {
  return {static_cast<int>(std::floor(ctx.f_start * ctx.N)), static_cast<int>(std::floor(ctx.f_stop * ctx.N))};
}

bool guidance_window(int i, const ScheduleContext& ctx) {
  const auto [start, stop] = window_bounds(ctx);
  return i >= start && i < stop;
}

double lin_decay_weight(int i) {
  if (i < 0) {
    throw std::invalid_argument("lin_decay_weight: negative step index");
  }
  return 1.0 / (static_cast<double>(i) + 1.0);
}

double cvar_ramp_weight(double t, const ScheduleContext& ctx) {
  if (ctx.k == 0.0) {
    throw std::invalid_argument("cvar_ramp_weight: k must be nonzero");
  }
  const double r = ctx.T0 - t;
  return (r > 0.0 ? r : 0.0) / ctx.k;
}

}  // namespace colorguide::schedule
