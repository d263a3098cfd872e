#pragma once

// Time series of one closed-loop rollout and its CSV form.

#include <string>
#include <vector>

#include "flipquad/flight_stack.hpp"

namespace flipquad {

struct Trace {
  std::vector<TickRecord> samples;  ///< first entry is the initial state at t = 0

  std::vector<double> times() const;
  std::vector<Vec3> positions() const;
  std::vector<Vec3> body_gravity() const;
};

/// Columns: t, position, velocity, quaternion (w, x, y, z), body rates, motor
/// rates, rotor thrusts, collective, torque, chart, posture.
void write_trace_csv(const Trace& trace, const std::string& path);

}  // namespace flipquad
