#include "flipquad/flight_stack.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flipquad {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string to_string(Transition t) { return t == Transition::NTI ? "NTI" : "ITN"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::StepHfca: return "step+hfca";
    case Method::StepHfcaOca: return "step+hfca+oca";
    case Method::MinSnapHfcaOca: return "minsnap+hfca+oca";
    case Method::PolicyHfcaOca: return "policy+hfca+oca";
  }
  return "unknown";
}

Transition parse_transition(const std::string& s) {
  const std::string l = lower(s);
  if (l == "nti") return Transition::NTI;
  if (l == "itn") return Transition::ITN;
  throw std::invalid_argument("unknown transition '" + s + "' (expected NTI or ITN)");
}

Method parse_method(const std::string& s) {
  const std::string l = lower(s);
  if (l == "step" || l == "step+hfca") return Method::StepHfca;
  if (l == "step-oca" || l == "step+hfca+oca") return Method::StepHfcaOca;
  if (l == "minsnap-oca" || l == "minsnap" || l == "minsnap+hfca+oca") return Method::MinSnapHfcaOca;
  if (l == "policy-oca" || l == "policy" || l == "policy+hfca+oca") return Method::PolicyHfcaOca;
  throw std::invalid_argument("unknown method '" + s + "' (expected step, step-oca, minsnap-oca or policy-oca)");
}

InitialSpread InitialSpread::none() {
  InitialSpread s;
  s.position.setZero();
  s.velocity_std = 0.0;
  s.rate_std = 0.0;
  s.yaw_range = 0.0;
  s.tilt = 0.0;
  return s;
}

QuadState reset_distribution(std::mt19937_64& rng, int posture, const InitialSpread& spread) {
  auto uniform = [&rng](double half) {
    return half > 0.0 ? std::uniform_real_distribution<double>(-half, half)(rng) : 0.0;
  };
  auto normal = [&rng](double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0; };

  QuadState x;
  for (int i = 0; i < 3; ++i) x.position[i] = uniform(spread.position[i]);
  for (int i = 0; i < 3; ++i) x.velocity[i] = normal(spread.velocity_std);
  const double yaw = uniform(spread.yaw_range);
  const double pitch = uniform(spread.tilt);
  const double roll = uniform(spread.tilt);
  Mat3 r = so3::from_euler_zyx(yaw, pitch, roll);
  if (posture < 0) r = r * so3::rot_x(std::numbers::pi);
  x.attitude = Quaternion(r).normalized();
  for (int i = 0; i < 3; ++i) x.body_rates[i] = normal(spread.rate_std);
  return x;
}

HfcaConfig SimConfig::hfca_config() const {
  HfcaConfig h;
  h.gains = Gains::from_normalized(gains.position, gains.velocity, gains.attitude, gains.rate, quad.inertia);
  h.charts = charts;
  h.mass = quad.mass;
  h.gravity = quad.gravity;
  h.cm_offset = quad.cm_offset;
  h.feedforward_jump = feedforward_jump;
  return h;
}

AllocationConfig SimConfig::allocation_config() const {
  return AllocationConfig::with_actuator_bounds(actuator.steady, allocation);
}

int SimConfig::substeps() const { return delay_steps(dt_env, dt); }

void SimConfig::validate() const {
  quad.validate();
  actuator.steady.validate();
  actuator.transient.validate();
  randomization.validate();
  gains.validate();
  allocation_config().validate();
  scales.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (position_decimation < 1) throw std::invalid_argument("position_decimation must be >= 1");
  if (substeps() < 1) throw std::invalid_argument("dt_env must be a positive multiple of dt");
  delay_steps(policy_delay, dt);
  if (!(action_limit >= 0.0)) throw std::invalid_argument("action_limit must be non-negative");
  if (!(step_flip_time >= 0.0)) throw std::invalid_argument("step_flip_time must be non-negative");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  min_snap.validate();
}

Vec4 hover_thrusts(const SimConfig& cfg, int posture) {
  const double sign = posture >= 0 ? 1.0 : -1.0;
  const Mat4 m = mixer(MotorRates::Constant(sign), cfg.quad, cfg.actuator.steady);
  ControlWrench u;
  u.collective = sign * cfg.quad.mass * cfg.quad.gravity;
  return direct_inversion(u, m);
}

FlightStack::FlightStack(const SimConfig& cfg, bool use_allocation)
    : cfg_(cfg), use_allocation_(use_allocation), alloc_(cfg.allocation_config()), ctrl_(cfg.hfca_config()),
      plant_(cfg.actuator) {}

void FlightStack::reset(const QuadState& x0, const ActuatorParams& plant, int posture) {
  plant_ = plant;
  x_ = x0;
  t_prev_ = hover_thrusts(cfg_, posture);
  for (int i = 0; i < kNumRotors; ++i) x_.motors[i] = rate_of_thrust(t_prev_[i], cfg_.actuator.steady, i).omega;
  ctrl_.reset(x_, posture);
  accel_ = linear_acceleration(x_.attitude, thrusts_of_rates(x_.motors, plant_.steady).sum(), cfg_.quad);
  t_ = 0.0;
  ticks_ = 0;
  last_ = TickRecord{};
  last_.state = x_;
  last_.posture = posture;
}

const TickRecord& FlightStack::tick(const FlatReference& ref, const std::optional<Vec3>& modulation) {
  if (ticks_ % cfg_.position_decimation == 0) ctrl_.update_position(x_, accel_, ref, modulation);
  const ControlWrench u = ctrl_.update_attitude(x_, cfg_.dt);
  // the controller only knows the nominal thrust model
  const Mat4 m = mixer(x_.motors, cfg_.quad, cfg_.actuator.steady);
  const Vec4 cmd = use_allocation_ ? allocate(u, m, alloc_, t_prev_).thrusts : direct_inversion(u, m);
  const StepResult r = step(x_, cmd, cfg_.quad, plant_, cfg_.dt);

  x_ = r.state;
  t_prev_ = cmd;
  accel_ = linear_acceleration(x_.attitude, r.wrench.collective, cfg_.quad);
  ++ticks_;
  t_ = static_cast<double>(ticks_) * cfg_.dt;

  last_.t = t_;
  last_.state = x_;
  last_.thrust_commands = cmd;
  last_.thrusts = r.thrusts;
  last_.command = u;
  last_.chart = ctrl_.chart_state().chart;
  last_.posture = ctrl_.posture();
  return last_;
}

PolicyDriver::PolicyDriver(const GaussianPolicy<float>& policy, const SimConfig& cfg)
    : policy_(&policy), cfg_(cfg), delay_(delay_steps(cfg.policy_delay, cfg.dt)) {}

void PolicyDriver::reset() {
  history_.clear();
  delay_.reset();
}

RawAction PolicyDriver::decide(const QuadState& x) {
  const Observation obs = build_observation(x, history_, cfg_.scales);
  const Eigen::VectorXf out = policy_->mean.forward(obs.cast<float>());
  const RawAction a = out.cast<double>().cwiseMax(-1.0).cwiseMin(1.0);
  history_.push(a);
  return a;
}

}  // namespace flipquad
