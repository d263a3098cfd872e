#include "flipquad/actuator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

namespace flipquad {

namespace {

double regime_thrust(double omega, const RegimeCoeffs& c) {
  return c.c2 * omega * std::abs(omega) + c.c1 * omega + c.c0;
}

double regime_slope(double omega, const RegimeCoeffs& c) { return 2.0 * c.c2 * std::abs(omega) + c.c1; }

void require_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) throw std::invalid_argument(std::string("randomization range '") + name + "' has lo > hi");
}

}  // namespace

SteadyStateParams SteadyStateParams::uniform(const RotorCoeffs& coeffs, double omega_max) {
  SteadyStateParams p;
  p.rotors.fill(coeffs);
  p.omega_max = omega_max;
  return p;
}

void SteadyStateParams::validate() const {
  if (!(omega_max > 0.0)) throw std::invalid_argument("omega_max must be positive");
  for (int i = 0; i < kNumRotors; ++i) {
    const auto& r = rotors[static_cast<std::size_t>(i)];
    if (!(r.pos.c2 > 0.0) || !(r.neg.c2 > 0.0))
      throw std::invalid_argument("rotor " + std::to_string(i) + ": c2 must be positive in both regimes");
    constexpr int kSamples = 64;
    for (const Regime regime : {Regime::Positive, Regime::Negative}) {
      const double sign = regime == Regime::Positive ? 1.0 : -1.0;
      double prev = regime_thrust(0.0, r.of(regime));
      for (int k = 1; k <= kSamples; ++k) {
        const double omega = sign * omega_max * k / kSamples;
        const double t = regime_thrust(omega, r.of(regime));
        if (!(sign * (t - prev) > 0.0))
          throw std::invalid_argument("rotor " + std::to_string(i) + ": thrust curve not strictly increasing");
        prev = t;
      }
    }
  }
}

void TransientParams::validate() const {
  if (!(alpha_pos > 0.0) || !(alpha_neg > 0.0)) throw std::invalid_argument("slew rates must be positive");
  if (!(dead_zone >= 0.0)) throw std::invalid_argument("dead-zone width must be non-negative");
}

RandomizationRanges RandomizationRanges::none(const TransientParams& nominal) {
  RandomizationRanges r;
  r.alpha_scale = {1.0, 1.0};
  r.thrust_coeff_scale = {1.0, 1.0};
  r.omega_switch = {nominal.omega_switch, nominal.omega_switch};
  r.dead_zone = {nominal.dead_zone, nominal.dead_zone};
  return r;
}

void RandomizationRanges::validate() const {
  require_range(alpha_scale, "alpha_scale");
  require_range(thrust_coeff_scale, "thrust_coeff_scale");
  require_range(omega_switch, "omega_switch");
  require_range(dead_zone, "dead_zone");
}

double thrust_of_rate(double omega, const SteadyStateParams& p, int rotor) {
  return regime_thrust(omega, p.rotors[static_cast<std::size_t>(rotor)].of(regime_of(omega)));
}

double torque_of_rate(double omega, const SteadyStateParams& p, int rotor) {
  const auto& c = p.rotors[static_cast<std::size_t>(rotor)].of(regime_of(omega));
  return c.moment_scale * regime_thrust(omega, c);
}

Vec4 thrusts_of_rates(const MotorRates& omega, const SteadyStateParams& p) {
  Vec4 t;
  for (int i = 0; i < kNumRotors; ++i) t[i] = thrust_of_rate(omega[i], p, i);
  return t;
}

Range thrust_range(const SteadyStateParams& p, int rotor) {
  return {thrust_of_rate(-p.omega_max, p, rotor), thrust_of_rate(p.omega_max, p, rotor)};
}

RateCommand rate_of_thrust(double thrust, const SteadyStateParams& p, int rotor) {
  const auto& coeffs = p.rotors[static_cast<std::size_t>(rotor)];
  const Range range = thrust_range(p, rotor);
  RateCommand out;
  double target = thrust;
  if (target > range.hi) {
    target = range.hi;
    out.clamped = true;
  } else if (target < range.lo) {
    target = range.lo;
    out.clamped = true;
  }

  if (target >= coeffs.pos.c0) {
    // c2 w^2 + c1 w - (T - c0) = 0, w >= 0; cancellation-free root
    const auto& c = coeffs.pos;
    const double d = target - c.c0;
    const double den = c.c1 + std::sqrt(c.c1 * c.c1 + 4.0 * c.c2 * d);
    out.omega = den > 0.0 ? 2.0 * d / den : 0.0;
  } else if (target < coeffs.neg.c0) {
    // u = -w > 0: c2 u^2 + c1 u - (c0 - T) = 0
    const auto& c = coeffs.neg;
    const double d = c.c0 - target;
    const double den = c.c1 + std::sqrt(c.c1 * c.c1 + 4.0 * c.c2 * d);
    out.omega = den > 0.0 ? -2.0 * d / den : 0.0;
  } else {
    // between T(0-) and T(0+): no rate produces this thrust
    out.omega = 0.0;
    out.clamped = true;
    return out;
  }

  // One Newton polish removes the last bits of rounding in the closed form.
  const auto& c = coeffs.of(regime_of(out.omega));
  const double slope = regime_slope(out.omega, c);
  if (slope > 0.0) {
    const double polished = out.omega - (regime_thrust(out.omega, c) - target) / slope;
    if (regime_of(polished) == regime_of(out.omega)) out.omega = polished;
  }
  if (out.omega > p.omega_max) out.omega = p.omega_max;
  if (out.omega < -p.omega_max) out.omega = -p.omega_max;
  return out;
}

bool reversal_pending(double omega, double omega_desired, const TransientParams& t) {
  return (omega > t.omega_switch + t.dead_zone && omega_desired < t.omega_switch) ||
         (omega < t.omega_switch - t.dead_zone && omega_desired > t.omega_switch);
}

double motor_step(double omega, double omega_desired, const TransientParams& t, double dt) {
  const double setpoint = reversal_pending(omega, omega_desired, t) ? t.omega_switch : omega_desired;
  const double alpha = omega >= t.omega_switch ? t.alpha_pos : t.alpha_neg;
  return omega + alpha * (setpoint - omega) * dt;
}

MotorRates motor_step(const MotorRates& omega, const MotorRates& omega_desired, const TransientParams& t, double dt) {
  MotorRates out;
  for (int i = 0; i < kNumRotors; ++i) out[i] = motor_step(omega[i], omega_desired[i], t, dt);
  return out;
}

ActuatorParams sample_params(std::mt19937_64& rng, const ActuatorParams& nominal, const RandomizationRanges& ranges) {
  auto draw = [&rng](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  ActuatorParams out = nominal;
  out.transient.alpha_pos = nominal.transient.alpha_pos * draw(ranges.alpha_scale);
  out.transient.alpha_neg = nominal.transient.alpha_neg * draw(ranges.alpha_scale);
  out.transient.omega_switch = draw(ranges.omega_switch);
  out.transient.dead_zone = draw(ranges.dead_zone);
  for (auto& rotor : out.steady.rotors) {
    for (RegimeCoeffs* c : {&rotor.pos, &rotor.neg}) {
      c->c2 *= draw(ranges.thrust_coeff_scale);
      c->c1 *= draw(ranges.thrust_coeff_scale);
      c->c0 *= draw(ranges.thrust_coeff_scale);
    }
  }
  return out;
}

namespace {

RegimeFit fit_regime(const std::vector<ThrustSample>& samples, const RegimeCoeffs& nominal) {
  RegimeFit fit;
  fit.coeffs = nominal;
  fit.samples = samples.size();
  if (samples.size() < 3) return fit;

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd thrust(n), torque(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    a(i, 0) = s.omega * std::abs(s.omega);
    a(i, 1) = s.omega;
    a(i, 2) = 1.0;
    thrust[i] = s.thrust;
    torque[i] = s.torque;
  }
  // Column scaling keeps the rank test meaningful when |Ω| is in the thousands.
  const Eigen::Vector3d scale = a.colwise().norm().transpose().cwiseMax(1e-300);
  const Eigen::MatrixXd a_scaled = a * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw std::runtime_error("fit_steady_state: rank-deficient design matrix (need 3 distinct rates)");
  const Eigen::Vector3d coeffs = qr.solve(thrust).cwiseQuotient(scale);

  fit.coeffs.c2 = coeffs[0];
  fit.coeffs.c1 = coeffs[1];
  fit.coeffs.c0 = coeffs[2];
  const double tt = thrust.squaredNorm();
  if (tt > 0.0) fit.coeffs.moment_scale = thrust.dot(torque) / tt;
  fit.thrust_rms = std::sqrt((a * coeffs - thrust).squaredNorm() / static_cast<double>(n));
  fit.torque_rms = std::sqrt((fit.coeffs.moment_scale * thrust - torque).squaredNorm() / static_cast<double>(n));
  fit.fitted = true;
  return fit;
}

}  // namespace

SteadyStateFit fit_steady_state(const std::vector<ThrustSample>& samples, const RotorCoeffs& nominal) {
  std::vector<ThrustSample> pos, neg;
  for (const auto& s : samples) {
    if (!std::isfinite(s.omega) || !std::isfinite(s.thrust) || !std::isfinite(s.torque))
      throw std::invalid_argument("fit_steady_state: non-finite sample");
    (regime_of(s.omega) == Regime::Positive ? pos : neg).push_back(s);
  }
  if (pos.size() < 3 && neg.size() < 3)
    throw std::invalid_argument("fit_steady_state: need at least 3 samples in one regime");
  SteadyStateFit out;
  out.pos = fit_regime(pos, nominal.pos);
  out.neg = fit_regime(neg, nominal.neg);
  out.partial = !(out.pos.fitted && out.neg.fitted);
  return out;
}

std::vector<ThrustSample> read_thrust_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open thrust sample file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty thrust sample file: " + path);
  std::vector<ThrustSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    ThrustSample s;
    if (!(row >> s.omega >> s.thrust >> s.torque))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected omega,thrust,torque");
    out.push_back(s);
  }
  return out;
}

}  // namespace flipquad
