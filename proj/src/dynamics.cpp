#include "flipquad/dynamics.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace flipquad {

bool QuadState::finite() const {
  return position.allFinite() && velocity.allFinite() && attitude.coeffs().allFinite() && body_rates.allFinite() &&
         motors.allFinite();
}

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!inertia.isApprox(inertia.transpose(), 1e-12)) throw std::invalid_argument("inertia must be symmetric");
  Eigen::LLT<Mat3> llt(inertia);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("inertia must be positive definite");
  if (!(gravity >= 0.0)) throw std::invalid_argument("gravity must be non-negative");
}

Mat4 mixer(const MotorRates& omega, const QuadParams& p, const SteadyStateParams& ss) {
  static constexpr std::array<double, kNumRotors> kYawSign{-1.0, -1.0, 1.0, 1.0};
  Mat4 m;
  for (int i = 0; i < kNumRotors; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double ms = ss.rotors[idx].of(regime_of(omega[i])).moment_scale;
    m.col(i) << 1.0, p.rotor_xy[idx].y(), -p.rotor_xy[idx].x(), kYawSign[idx] * ms;
  }
  return m;
}

ControlWrench wrench_from_thrusts(const Vec4& thrusts, const Mat4& mixer) {
  return ControlWrench::from_vector(mixer * thrusts);
}

Vec3 linear_acceleration(const Quaternion& q, double collective, const QuadParams& p) {
  return collective / p.mass * so3::hopf_project(q) - p.gravity * Vec3::UnitZ();
}

namespace {

Vec4 attitude_rate(const Quaternion& q, const Vec3& w) {
  return 0.5 * so3::to_wxyz(so3::multiply(q, so3::pure(w)));
}

}  // namespace

StateDerivative dynamics_deriv(const QuadState& x, const ControlWrench& u, const QuadParams& p) {
  StateDerivative d;
  d.position = x.velocity;
  d.velocity = linear_acceleration(x.attitude, u.collective, p);
  d.attitude = attitude_rate(x.attitude, x.body_rates);
  const Vec3& w = x.body_rates;
  d.body_rates = p.inertia.ldlt().solve(-w.cross(p.inertia * w) + u.torque);
  return d;
}

StateDerivative dynamics_deriv(const QuadState& x, const Vec4& thrusts, const Mat4& mixer, const QuadParams& p) {
  return dynamics_deriv(x, wrench_from_thrusts(thrusts, mixer), p);
}

StateDerivative dynamics_deriv_cm_offset(const QuadState& x, const ControlWrench& u, const QuadParams& p) {
  const Vec3& w = x.body_rates;
  const Vec3& off = p.cm_offset;
  const Vec3 thrust_body(0.0, 0.0, u.collective);
  StateDerivative d;
  d.position = x.velocity;
  d.attitude = attitude_rate(x.attitude, w);
  d.body_rates = p.inertia.ldlt().solve(-w.cross(p.inertia * w) + u.torque - off.cross(thrust_body));
  // m (r̈_gc + R([ω̇]x r_off + [ω]x^2 r_off)) = -m g e3 + f_c b3
  const Vec3 lever = d.body_rates.cross(off) + w.cross(w.cross(off));
  d.velocity = linear_acceleration(x.attitude, u.collective, p) - so3::to_rotation(x.attitude) * lever;
  return d;
}

namespace {

QuadState advance(const QuadState& x, const StateDerivative& d, double h) {
  QuadState out = x;
  out.position += h * d.position;
  out.velocity += h * d.velocity;
  out.attitude = so3::from_wxyz(so3::to_wxyz(x.attitude) + h * d.attitude);
  out.body_rates += h * d.body_rates;
  return out;
}

}  // namespace

QuadState integrate_rigid_body(const QuadState& x, const ControlWrench& u, const QuadParams& p, double dt,
                               bool with_cm_offset) {
  auto f = [&](const QuadState& s) {
    return with_cm_offset ? dynamics_deriv_cm_offset(s, u, p) : dynamics_deriv(s, u, p);
  };
  const StateDerivative k1 = f(x);
  const StateDerivative k2 = f(advance(x, k1, 0.5 * dt));
  const StateDerivative k3 = f(advance(x, k2, 0.5 * dt));
  const StateDerivative k4 = f(advance(x, k3, dt));

  QuadState out = x;
  const double h = dt / 6.0;
  out.position += h * (k1.position + 2.0 * k2.position + 2.0 * k3.position + k4.position);
  out.velocity += h * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity);
  const Vec4 q = so3::to_wxyz(x.attitude) + h * (k1.attitude + 2.0 * k2.attitude + 2.0 * k3.attitude + k4.attitude);
  out.attitude = so3::from_wxyz(q).normalized();
  out.body_rates += h * (k1.body_rates + 2.0 * k2.body_rates + 2.0 * k3.body_rates + k4.body_rates);
  return out;
}

StepResult step(const QuadState& x, const Vec4& thrust_commands, const QuadParams& p, const ActuatorParams& act,
                double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  StepResult r;
  MotorRates desired;
  for (int i = 0; i < kNumRotors; ++i) {
    const RateCommand cmd = rate_of_thrust(thrust_commands[i], act.steady, i);
    desired[i] = cmd.omega;
    r.rate_clamped[static_cast<std::size_t>(i)] = cmd.clamped;
  }
  r.rate_commands = desired;
  QuadState next = x;
  next.motors = motor_step(x.motors, desired, act.transient, dt);
  r.thrusts = thrusts_of_rates(next.motors, act.steady);
  r.wrench = wrench_from_thrusts(r.thrusts, mixer(next.motors, p, act.steady));
  next = integrate_rigid_body(next, r.wrench, p, dt);
  if (!next.finite()) throw SimulationFault("simulation produced a non-finite state");
  r.state = next;
  return r;
}

Vec3 body_gravity(const Quaternion& q) { return -so3::to_rotation(q).transpose() * Vec3::UnitZ(); }

double rotational_energy(const QuadState& x, const QuadParams& p) {
  return 0.5 * x.body_rates.dot(p.inertia * x.body_rates);
}

}  // namespace flipquad
