#pragma once

// Rigid-body quadrotor model: mixer, equations of motion, RK4 step.

#include <array>
#include <stdexcept>

#include "flipquad/actuator.hpp"
#include "flipquad/so3.hpp"

namespace flipquad {

/// Thrown when the integrated state stops being finite.
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadState {
  Vec3 position = Vec3::Zero();          ///< m, world
  Vec3 velocity = Vec3::Zero();          ///< m/s, world
  Quaternion attitude = Quaternion::Identity();  ///< body -> world
  Vec3 body_rates = Vec3::Zero();        ///< rad/s, body
  MotorRates motors = MotorRates::Zero();

  bool finite() const;
};

struct QuadParams {
  double mass = 1.0;                                  ///< kg
  Mat3 inertia = Eigen::Vector3d(0.0045, 0.0045, 0.008).asDiagonal();  ///< kg m^2
  /// Rotor positions (x_i, y_i) in the body frame, m. Rotors 1-2 have
  /// negative yaw sign in the mixer, rotors 3-4 positive.
  std::array<Eigen::Vector2d, kNumRotors> rotor_xy{
      Eigen::Vector2d(0.09, -0.09), Eigen::Vector2d(-0.09, 0.09),
      Eigen::Vector2d(0.09, 0.09), Eigen::Vector2d(-0.09, -0.09)};
  Vec3 cm_offset = Vec3::Zero();  ///< body-frame offset between the CM and the geometric centre, m
  double gravity = 9.81;          ///< m/s^2

  void validate() const;
};

struct ControlWrench {
  double collective = 0.0;      ///< N, signed along body z
  Vec3 torque = Vec3::Zero();  ///< N m, body

  Vec4 as_vector() const { return Vec4(collective, torque.x(), torque.y(), torque.z()); }
  static ControlWrench from_vector(const Vec4& u) { return {u[0], u.tail<3>()}; }
};

/// Mixer M(Ω): rows are [1; y_i; -x_i; ∓m_s(sgn Ω_i)] with yaw signs (-, -, +, +).
Mat4 mixer(const MotorRates& omega, const QuadParams& p, const SteadyStateParams& ss);

/// u = M T.
ControlWrench wrench_from_thrusts(const Vec4& thrusts, const Mat4& mixer);

struct StateDerivative {
  Vec3 position;    ///< ṙ
  Vec3 velocity;    ///< r̈
  Vec4 attitude;    ///< q̇ as [w, x, y, z]
  Vec3 body_rates;  ///< ω̇
};

/// Rigid-body equations of motion under the wrench u.
StateDerivative dynamics_deriv(const QuadState& x, const ControlWrench& u, const QuadParams& p);

/// Same, with the wrench computed from rotor thrusts through the mixer.
StateDerivative dynamics_deriv(const QuadState& x, const Vec4& thrusts, const Mat4& mixer, const QuadParams& p);

/// Equations of motion of the geometric centre when the CM is offset by
/// p.cm_offset. Reduces to dynamics_deriv for a zero offset.
StateDerivative dynamics_deriv_cm_offset(const QuadState& x, const ControlWrench& u, const QuadParams& p);

/// World-frame linear acceleration produced by u at attitude q.
Vec3 linear_acceleration(const Quaternion& q, double collective, const QuadParams& p);

/// Classic RK4 on the rigid-body part of the state with u held constant,
/// followed by quaternion renormalization. Motor rates are left untouched.
QuadState integrate_rigid_body(const QuadState& x, const ControlWrench& u, const QuadParams& p, double dt,
                               bool with_cm_offset = false);

struct StepResult {
  QuadState state;
  Vec4 thrusts = Vec4::Zero();   ///< actual rotor thrusts applied over the step
  ControlWrench wrench;          ///< actual wrench applied over the step
  Vec4 rate_commands = Vec4::Zero();
  std::array<bool, kNumRotors> rate_clamped{};
};

/// Full plant step: T_cmd -> Ω_d (inverse thrust map) -> motor transient ->
/// actual thrusts -> RK4 rigid body. Throws SimulationFault on non-finite state.
StepResult step(const QuadState& x, const Vec4& thrust_commands, const QuadParams& p, const ActuatorParams& act,
                double dt);

/// Gravity direction in the body frame, g_b = -R^T e3.
Vec3 body_gravity(const Quaternion& q);

/// Rotational kinetic energy ½ ωᵀ I ω.
double rotational_energy(const QuadState& x, const QuadParams& p);

}  // namespace flipquad
