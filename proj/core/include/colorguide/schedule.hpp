#pragma once

// Time-dependent scalars of the guidance loop. Timesteps descend; the
// progress/gate pair is defined on timestep values, the window and the
// linear decay on loop indices.

#include <utility>

namespace colorguide::schedule {

struct ScheduleContext {
  double T = 987.0;      // first timestep value of the run
  double t_min = 0.0;    // last timestep value
  double s = 0.2;        // late-start threshold, [0,1)
  int N = 80;            // number of sampling steps
  double f_start = 0.2;  // window start fraction
  double f_stop = 1.0;   // window stop fraction
  double k = 2.0;        // ramp divisor
  double T0 = 987.0;     // reference timestep of the cvar ramp

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ScheduleContext&) const = default;
};

/// (T - t) / (T - t_min); rejects t outside [t_min, T].
double progress(double t, const ScheduleContext& ctx);

/// 0 for prog <= s, else (prog - s) / (1 - s). Rejects s outside [0,1).
double late_start_gate(double prog, double s);

/// Half-open index window [floor(f_start*N), floor(f_stop*N)).
std::pair<int, int> window_bounds(const ScheduleContext& ctx);
bool guidance_window(int i, const ScheduleContext& ctx);

/// 1 / (i + 1).
double lin_decay_weight(int i);

/// max(0, T0 - t) / k.
double cvar_ramp_weight(double t, const ScheduleContext& ctx);

}  // namespace colorguide::schedule
