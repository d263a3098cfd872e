#include "flipquad/hfca.hpp"

#include <cmath>
#include <utility>

namespace flipquad {

Gains Gains::from_normalized(const Vec3& position, const Vec3& velocity, const Vec3& attitude_per_inertia,
                             const Vec3& rate_per_inertia, const Mat3& inertia) {
  Gains g;
  g.position = position;
  g.velocity = velocity;
  g.attitude = inertia.diagonal().cwiseProduct(attitude_per_inertia);
  g.rate = inertia.diagonal().cwiseProduct(rate_per_inertia);
  return g;
}

void Gains::validate() const {
  for (const Vec3* v : {&position, &velocity, &attitude, &rate})
    if (!((v->array() > 0.0).all())) throw std::invalid_argument("controller gains must be positive");
}

ChartState ChartState::for_direction(const Vec3& b3d, int posture) {
  ChartState cs;
  cs.chart = b3d.z() >= 0.0 ? Chart::North : Chart::South;
  cs.posture = posture;
  cs.yaw_offset = 0.0;
  return cs;
}

PositionCommand position_feedback(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                                  const std::optional<Vec3>& modulation, const Gains& gains, double mass,
                                  double gravity) {
  const Vec3 target = modulation ? Vec3(ref.position + *modulation) : ref.position;
  const Vec3 e_r = x.position - target;
  const Vec3 e_v = x.velocity - ref.velocity;
  const Vec3 e_a = acceleration - ref.acceleration;

  PositionCommand cmd;
  cmd.acceleration = -gains.position.cwiseProduct(e_r) - gains.velocity.cwiseProduct(e_v) + ref.acceleration +
                     gravity * Vec3::UnitZ();
  cmd.jerk = -gains.position.cwiseProduct(e_v) - gains.velocity.cwiseProduct(e_a) + ref.jerk;
  if (cmd.acceleration.norm() < kMinThrustNorm) throw DegenerateThrust("desired acceleration too small for a thrust axis");
  cmd.collective = mass * so3::hopf_project(x.attitude).dot(cmd.acceleration);
  return cmd;
}

ThrustAxis thrust_axis(const Vec3& acceleration, const Vec3& jerk) {
  const double n = acceleration.norm();
  if (n < kMinThrustNorm) throw DegenerateThrust("desired acceleration too small for a thrust axis");
  ThrustAxis axis;
  axis.direction = acceleration / n;
  axis.rate = (jerk - axis.direction * axis.direction.dot(jerk)) / n;
  return axis;
}

DesiredAttitude desired_attitude(const Vec3& s, int posture, double yaw_ref, const ChartState& cs) {
  const Vec3 b3d = static_cast<double>(posture) * s;
  // yaw is applied about an inverted body axis when η = -1
  const double yaw_north = posture > 0 ? yaw_ref : -yaw_ref;
  DesiredAttitude out;
  if (cs.chart == Chart::North) {
    if (b3d.z() <= -1.0 + so3::kPoleMargin) throw std::logic_error("north chart used at the south pole");
    out.yaw = yaw_north;
    out.attitude = so3::multiply(so3::chart_north(b3d), so3::yaw_quat(out.yaw));
  } else {
    if (b3d.z() >= 1.0 - so3::kPoleMargin) throw std::logic_error("south chart used at the north pole");
    out.yaw = cs.yaw_offset + yaw_north;
    out.attitude = so3::multiply(so3::chart_south(b3d), so3::yaw_quat(out.yaw));
  }
  return out;
}

Vec3 desired_angular_velocity(const Quaternion& qd, const Vec4& qd_dot) {
  const Quaternion p = so3::multiply(so3::conjugate(qd), so3::from_wxyz(qd_dot));
  return 2.0 * Vec3(p.x(), p.y(), p.z());
}

ChartState chart_switch(const ChartState& cs, const Vec3& b3d, int posture, const ChartConfig& cfg) {
  ChartState next = cs;
  next.posture = posture;
  const double a = b3d.x(), b = b3d.y(), c = b3d.z();
  if (cs.chart == Chart::North && c < -cfg.hysteresis) {
    next.chart = Chart::South;
    const bool posture_jump = posture != cs.posture;
    const bool conditioned = std::hypot(a, b) > cfg.offset_epsilon;
    next.yaw_offset = (!posture_jump && conditioned) ? 2.0 * std::atan2(a, b) : 0.0;
  } else if (cs.chart == Chart::South && c > cfg.hysteresis) {
    next.chart = Chart::North;
    next.yaw_offset = 0.0;
  }
  return next;
}

AttitudeError attitude_error(const Quaternion& q, const Vec3& w, const Quaternion& qd, const Vec3& wd) {
  const Quaternion err = so3::multiply(so3::conjugate(qd), q);
  return {so3::log(err), w - so3::to_rotation(err).transpose() * wd};
}

Vec3 attitude_feedback(const Quaternion& q, const Vec3& w, const Quaternion& qd, const Vec3& wd, const Gains& gains,
                       const Vec3& cm_offset, double collective) {
  const AttitudeError e = attitude_error(q, w, qd, wd);
  const Mat3 jinv_t = so3::inv_right_jacobian(e.rotation).transpose();
  return -jinv_t * gains.attitude.cwiseProduct(e.rotation) - gains.rate.cwiseProduct(e.rate) +
         cm_offset.cross(Vec3(0.0, 0.0, collective));
}

HfcaController::HfcaController(HfcaConfig cfg) : cfg_(std::move(cfg)) { cfg_.gains.validate(); }

void HfcaController::reset(const QuadState& x, int posture) {
  posture_ = posture;
  const Vec3 b3 = so3::hopf_project(x.attitude);
  chart_ = ChartState::for_direction(b3, posture);
  axis_ = ThrustAxis{static_cast<double>(posture) * b3, Vec3::Zero()};
  command_ = PositionCommand{cfg_.gravity * axis_.direction, Vec3::Zero(), 0.0};
  yaw_ = 0.0;
  yaw_rate_ = 0.0;
  since_position_ = 0.0;
  have_prev_ = false;
  wd_.setZero();
}

void HfcaController::update_position(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                                     const std::optional<Vec3>& modulation) {
  posture_ = ref.posture >= 0 ? 1 : -1;
  yaw_ = ref.yaw;
  yaw_rate_ = ref.yaw_rate;
  since_position_ = 0.0;
  try {
    command_ = position_feedback(x, acceleration, ref, modulation, cfg_.gains, cfg_.mass, cfg_.gravity);
    axis_ = thrust_axis(command_.acceleration, command_.jerk);
  } catch (const DegenerateThrust&) {
    // free-fall singularity: keep the previous axis for this tick
    const Vec3 target = modulation ? Vec3(ref.position + *modulation) : ref.position;
    command_.acceleration = -cfg_.gains.position.cwiseProduct(x.position - target) -
                            cfg_.gains.velocity.cwiseProduct(x.velocity - ref.velocity) + ref.acceleration +
                            cfg_.gravity * Vec3::UnitZ();
    command_.jerk.setZero();
    axis_.rate.setZero();
  }
}

ControlWrench HfcaController::update_attitude(const QuadState& x, double dt) {
  since_position_ += dt;
  const double tau = since_position_ - dt;  // elapsed since the position update at this tick
  Vec3 s = axis_.direction + tau * axis_.rate;
  s.normalize();
  const double yaw = yaw_ + tau * yaw_rate_;

  const Vec3 b3 = so3::hopf_project(x.attitude);
  ControlWrench u;
  u.collective = cfg_.mass * b3.dot(command_.acceleration);

  const ChartState prev_chart = chart_;
  chart_ = chart_switch(chart_, static_cast<double>(posture_) * s, posture_, cfg_.charts);
  Quaternion qd = desired_attitude(s, posture_, yaw, chart_).attitude;

  wd_.setZero();
  if (have_prev_ && dt > 0.0) {
    if (qd.coeffs().dot(qd_prev_.coeffs()) < 0.0) qd.coeffs() = -qd.coeffs();
    const bool continuous = chart_ == prev_chart && so3::angle_between(qd_prev_, qd) < cfg_.feedforward_jump;
    if (continuous) wd_ = desired_angular_velocity(qd, (so3::to_wxyz(qd) - so3::to_wxyz(qd_prev_)) / dt);
  }
  qd_prev_ = qd;
  have_prev_ = true;

  u.torque = attitude_feedback(x.attitude, x.body_rates, qd, wd_, cfg_.gains, cfg_.cm_offset, u.collective);
  return u;
}

ControlWrench HfcaController::step(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                                   const std::optional<Vec3>& modulation, double dt) {
  update_position(x, acceleration, ref, modulation);
  return update_attitude(x, dt);
}

}  // namespace flipquad
