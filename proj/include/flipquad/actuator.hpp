#pragma once

// Bidirectional rotor model: asymmetric steady-state thrust/torque curves,
// first-order motor-rate transients with a reversal dead-zone, and the
// domain-randomization sampler used during training.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flipquad {

inline constexpr int kNumRotors = 4;

using Vec4 = Eigen::Vector4d;
using MotorRates = Eigen::Vector4d;  ///< rad/s, signed; negative is the (-) regime

enum class Regime { Positive, Negative };

/// Ω >= 0 selects the (+) regime.
inline Regime regime_of(double omega) { return omega >= 0.0 ? Regime::Positive : Regime::Negative; }

/// Second-order thrust coefficients of one operating regime.
struct RegimeCoeffs {
  double c2 = 0.0;            ///< N s^2/rad^2
  double c1 = 0.0;            ///< N s/rad
  double c0 = 0.0;            ///< N
  double moment_scale = 0.0;  ///< m, reaction torque per unit thrust
};

struct RotorCoeffs {
  RegimeCoeffs pos;
  RegimeCoeffs neg;

  const RegimeCoeffs& of(Regime r) const { return r == Regime::Positive ? pos : neg; }
  RegimeCoeffs& of(Regime r) { return r == Regime::Positive ? pos : neg; }
};

/// Placeholder coefficients for a ~1 kg vehicle with 5-inch bidirectional
/// props: about 14.7 N at +3000 rad/s and -7.5 N at -3000 rad/s.
inline RotorCoeffs nominal_rotor_coeffs() {
  RotorCoeffs c;
  c.pos = {1.6667e-6, 1.0e-4, 0.0, 0.015};
  c.neg = {0.8333e-6, 1.0e-4, 0.0, 0.025};
  return c;
}

struct SteadyStateParams {
  std::array<RotorCoeffs, kNumRotors> rotors{nominal_rotor_coeffs(), nominal_rotor_coeffs(), nominal_rotor_coeffs(),
                                             nominal_rotor_coeffs()};
  double omega_max = 3000.0;  ///< |Ω| limit in both regimes, rad/s

  /// Same coefficients on every rotor.
  static SteadyStateParams uniform(const RotorCoeffs& coeffs, double omega_max);

  /// Throws std::invalid_argument unless c2 > 0 in both regimes and the
  /// thrust curve is strictly increasing over [-omega_max, omega_max].
  void validate() const;
};

struct TransientParams {
  double alpha_pos = 40.0;    ///< slew rate above the switching threshold, 1/s
  double alpha_neg = 30.0;    ///< slew rate below the switching threshold, 1/s
  double omega_switch = 0.0;  ///< Ω_0, rad/s
  double dead_zone = 300.0;   ///< Δ_Ω, rad/s

  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct RandomizationRanges {
  Range alpha_scale{0.75, 1.25};
  Range thrust_coeff_scale{0.9, 1.1};
  Range omega_switch{-50.0, 50.0};
  Range dead_zone{200.0, 400.0};

  /// No randomization: unit scales and the given absolute values.
  static RandomizationRanges none(const TransientParams& nominal);

  void validate() const;
};

struct ActuatorParams {
  SteadyStateParams steady;
  TransientParams transient;
};

/// T = c2 Ω|Ω| + c1 Ω + c0 with the coefficients of Ω's regime.
double thrust_of_rate(double omega, const SteadyStateParams& p, int rotor);

/// Reaction torque magnitude m_s T for Ω's regime. The sign convention of the
/// body yaw torque is applied by the mixer.
double torque_of_rate(double omega, const SteadyStateParams& p, int rotor);

Vec4 thrusts_of_rates(const MotorRates& omega, const SteadyStateParams& p);

struct RateCommand {
  double omega = 0.0;
  bool clamped = false;  ///< requested thrust was outside the achievable range
};

/// Inverse of thrust_of_rate on [-omega_max, omega_max].
///
/// The regime is chosen by the sign of T_d - T(0); thrust requests that fall
/// into the gap between the two regimes' zero-rate thrust map to Ω = 0.
RateCommand rate_of_thrust(double thrust, const SteadyStateParams& p, int rotor);

/// Thrust range reachable by a rotor, [T(-omega_max), T(omega_max)].
Range thrust_range(const SteadyStateParams& p, int rotor);

/// Switching predicate S for one rotor.
bool reversal_pending(double omega, double omega_desired, const TransientParams& t);

/// One explicit-Euler step of the switched first-order motor model.
double motor_step(double omega, double omega_desired, const TransientParams& t, double dt);
MotorRates motor_step(const MotorRates& omega, const MotorRates& omega_desired, const TransientParams& t, double dt);

/// Draw one randomized actuator parameter set around the nominal values.
ActuatorParams sample_params(std::mt19937_64& rng, const ActuatorParams& nominal, const RandomizationRanges& ranges);

struct ThrustSample {
  double omega = 0.0;
  double thrust = 0.0;
  double torque = 0.0;
};

struct RegimeFit {
  RegimeCoeffs coeffs;
  bool fitted = false;
  std::size_t samples = 0;
  double thrust_rms = 0.0;  ///< residual RMS, N
  double torque_rms = 0.0;  ///< residual RMS, N m
};

struct SteadyStateFit {
  RegimeFit pos;
  RegimeFit neg;
  bool partial = false;  ///< one regime had no usable data and kept its nominal value
};

/// Per-regime least-squares fit of (c2, c1, c0) and the moment scale.
///
/// A regime with fewer than 3 samples keeps the nominal coefficients and the
/// fit is flagged partial. Throws std::invalid_argument if neither regime can
/// be fitted and std::runtime_error on a rank-deficient design matrix.
SteadyStateFit fit_steady_state(const std::vector<ThrustSample>& samples, const RotorCoeffs& nominal = nominal_rotor_coeffs());

/// Reads omega,thrust,torque rows (header required).
std::vector<ThrustSample> read_thrust_samples_csv(const std::string& path);

}  // namespace flipquad
