#pragma once

// Closed-loop vehicle: HFCA controller, allocation (OCA or direct inversion)
// and the plant, stepped at the dynamics rate. Also the shared simulation
// configuration, the transition/method enums and the initial-state sampler.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flipquad/allocation.hpp"
#include "flipquad/dynamics.hpp"
#include "flipquad/hfca.hpp"
#include "flipquad/policy.hpp"
#include "flipquad/trajectory.hpp"

namespace flipquad {

enum class Transition { NTI, ITN };
enum class Method { StepHfca, StepHfcaOca, MinSnapHfcaOca, PolicyHfcaOca };

std::string to_string(Transition t);
std::string to_string(Method m);
/// Accepts "nti"/"itn" in any case; throws std::invalid_argument otherwise.
Transition parse_transition(const std::string& s);
/// Accepts step, step-oca, minsnap-oca, policy-oca (and the long names).
Method parse_method(const std::string& s);

inline int initial_posture(Transition t) { return t == Transition::NTI ? 1 : -1; }
/// Target body-frame gravity direction after the transition.
inline Vec3 target_body_gravity(Transition t) { return t == Transition::NTI ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ()); }

/// Spread of the randomized initial conditions.
struct InitialSpread {
  Vec3 position = Vec3::Constant(0.1);  ///< half-width of the uniform box, m
  double velocity_std = 0.1;            ///< m/s
  double rate_std = 0.1;                ///< rad/s
  double yaw_range = 3.141592653589793; ///< ψ ~ U(-range, range)
  double tilt = 0.1;                    ///< φ, θ ~ U(-tilt, tilt), rad

  static InitialSpread none();
};

/// r ~ U(±Δr), v, ω ~ N(0, σ²), R = R_z(ψ) R_y(θ) R_x(φ) R_inv with R_inv = R_x(π)
/// for the inverted posture. Motor rates are left at zero.
QuadState reset_distribution(std::mt19937_64& rng, int posture, const InitialSpread& spread);

struct SimConfig {
  QuadParams quad;
  ActuatorParams actuator;
  RandomizationRanges randomization;
  /// Gains with attitude and rate entries per unit inertia.
  Gains gains;
  ChartConfig charts;
  double feedforward_jump = 0.5;
  AllocationConfig allocation;  ///< bounds are replaced by the actuator range
  double dt = 0.001;            ///< dynamics step, s
  int position_decimation = 10; ///< attitude ticks per position update
  double dt_env = 0.02;         ///< policy step, s
  double policy_delay = 0.006;  ///< s
  double action_limit = 2.0;    ///< m
  ObservationScales scales;
  double step_flip_time = 0.0;  ///< s
  MinSnapSpec min_snap;         ///< posture schedule is set from the transition
  InitialSpread spread;
  double duration = 3.0;        ///< s

  HfcaConfig hfca_config() const;
  AllocationConfig allocation_config() const;
  int substeps() const;
  void validate() const;
};

struct TickRecord {
  double t = 0.0;  ///< time at the end of the tick
  QuadState state;
  Vec4 thrust_commands = Vec4::Zero();
  Vec4 thrusts = Vec4::Zero();
  ControlWrench command;
  Chart chart = Chart::North;
  int posture = 1;
};

class FlightStack {
 public:
  FlightStack(const SimConfig& cfg, bool use_allocation);

  /// Starts at x0 with motors at the hover rates of `posture`.
  void reset(const QuadState& x0, const ActuatorParams& plant, int posture);

  /// One dynamics step tracking `ref` (sampled at the current time).
  const TickRecord& tick(const FlatReference& ref, const std::optional<Vec3>& modulation = std::nullopt);

  const QuadState& state() const { return x_; }
  double time() const { return t_; }
  const HfcaController& controller() const { return ctrl_; }
  const ActuatorParams& plant() const { return plant_; }

 private:
  SimConfig cfg_;
  bool use_allocation_;
  AllocationConfig alloc_;
  HfcaController ctrl_;
  ActuatorParams plant_;
  QuadState x_;
  double t_ = 0.0;
  long ticks_ = 0;
  Vec4 t_prev_ = Vec4::Zero();
  Vec3 accel_ = Vec3::Zero();
  TickRecord last_;
};

/// Per-rotor thrusts for hover in `posture` under the nominal mixer.
Vec4 hover_thrusts(const SimConfig& cfg, int posture);

/// Runs the policy on one vehicle: observation, action history, delay.
class PolicyDriver {
 public:
  PolicyDriver(const GaussianPolicy<float>& policy, const SimConfig& cfg);

  void reset();
  /// Deterministic action (policy mean) for the current state; pushes it
  /// into the history.
  RawAction decide(const QuadState& x);
  /// Action in effect this dynamics step.
  RawAction applied(const RawAction& latest) { return delay_.push(latest); }

 private:
  const GaussianPolicy<float>* policy_;
  SimConfig cfg_;
  ActionHistory history_;
  DelayLine delay_;
};

}  // namespace flipquad
