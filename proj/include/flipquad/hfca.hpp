#pragma once

// Hopf-fibration-based geometric controller for bidirectional-thrust flight.
//
// The desired attitude is built from the desired body z-axis b3d = η s on
// one of two base charts of S² (north / south), composed with a yaw rotation.
// Together with the thrust posture η ∈ {+1, -1} this gives four charts that
// cover all of SO(3) and both hover equilibria.

#include <optional>
#include <stdexcept>

#include "flipquad/dynamics.hpp"
#include "flipquad/so3.hpp"

namespace flipquad {

/// Differentially flat reference sample.
struct FlatReference {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  double yaw = 0.0;       ///< rad
  double yaw_rate = 0.0;  ///< rad/s
  int posture = 1;        ///< η, +1 upright thrust, -1 inverted thrust
};

/// Diagonal feedback gains. Position gains act on acceleration; attitude
/// gains are torque gains (N m/rad and N m s/rad).
struct Gains {
  Vec3 position = Vec3::Constant(10.0);
  Vec3 velocity = Vec3::Constant(6.0);
  Vec3 attitude = Vec3(120.0, 120.0, 30.0);
  Vec3 rate = Vec3(16.0, 16.0, 8.0);

  /// Attitude gains given per unit inertia (1/s^2 and 1/s) and scaled by the
  /// diagonal of the inertia matrix.
  static Gains from_normalized(const Vec3& position, const Vec3& velocity, const Vec3& attitude_per_inertia,
                               const Vec3& rate_per_inertia, const Mat3& inertia);

  void validate() const;
};

enum class Chart { North, South };

struct ChartState {
  Chart chart = Chart::North;
  int posture = 1;
  double yaw_offset = 0.0;  ///< always 0 on the north chart

  /// Chart for the hemisphere of b3d, no offset.
  static ChartState for_direction(const Vec3& b3d, int posture);

  friend bool operator==(const ChartState&, const ChartState&) = default;
};

struct ChartConfig {
  double hysteresis = 0.1;        ///< switch N->S below c = -h, S->N above c = +h
  double offset_epsilon = 1e-6;   ///< minimum |(a, b)| for a meaningful yaw offset
};

/// ‖r̈_d‖ too small to define a thrust direction.
class DegenerateThrust : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PositionCommand {
  Vec3 acceleration = Vec3::Zero();  ///< r̈_d, world
  Vec3 jerk = Vec3::Zero();          ///< r⃛_d, world
  double collective = 0.0;           ///< f_c = m b3 · r̈_d
};

inline constexpr double kMinThrustNorm = 1e-6;

/// Position loop. `acceleration` is the vehicle's current world-frame linear
/// acceleration; `modulation` shifts the position reference when present.
/// Throws DegenerateThrust when ‖r̈_d‖ < kMinThrustNorm.
PositionCommand position_feedback(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                                  const std::optional<Vec3>& modulation, const Gains& gains, double mass,
                                  double gravity);

struct ThrustAxis {
  Vec3 direction = Vec3::UnitZ();  ///< s
  Vec3 rate = Vec3::Zero();        ///< ṡ, orthogonal to s
};

/// s = r̈_d/‖r̈_d‖ and ṡ = (I - s sᵀ) r⃛_d / ‖r̈_d‖.
ThrustAxis thrust_axis(const Vec3& acceleration, const Vec3& jerk);

struct DesiredAttitude {
  Quaternion attitude;
  double yaw = 0.0;  ///< yaw angle fed to the yaw quaternion on the active chart
};

/// Attitude whose body z-axis is η s on the chart in `cs`. Throws
/// std::logic_error when the chart does not cover b3d.
DesiredAttitude desired_attitude(const Vec3& s, int posture, double yaw_ref, const ChartState& cs);

/// ω_d = 2 vec(q_d⁻¹ ⊗ q̇_d); q̇_d given as [w, x, y, z].
Vec3 desired_angular_velocity(const Quaternion& qd, const Vec4& qd_dot);

/// Hysteretic chart selection for b3d = (a, b, c).
///
/// Entering the south chart saves the offset 2 atan2(a, b), except when the
/// switch is caused by a posture change or (a, b) is ill-conditioned, in which
/// case no offset is applied.
ChartState chart_switch(const ChartState& cs, const Vec3& b3d, int posture, const ChartConfig& cfg = {});

struct AttitudeError {
  Vec3 rotation;  ///< e_R = Log(q_d⁻¹ ⊗ q)
  Vec3 rate;      ///< e_ω = ω - R(q_d⁻¹ ⊗ q)ᵀ ω_d
};

AttitudeError attitude_error(const Quaternion& q, const Vec3& w, const Quaternion& qd, const Vec3& wd);

/// τ = -J_r⁻ᵀ(e_R) K_R e_R - K_ω e_ω + r_off × [0, 0, f_c].
Vec3 attitude_feedback(const Quaternion& q, const Vec3& w, const Quaternion& qd, const Vec3& wd, const Gains& gains,
                       const Vec3& cm_offset, double collective);

struct HfcaConfig {
  Gains gains;
  ChartConfig charts;
  double mass = 1.0;
  double gravity = 9.81;
  Vec3 cm_offset = Vec3::Zero();
  /// q_d jumps larger than this between attitude ticks are treated as
  /// discontinuities and produce no angular-velocity feedforward.
  double feedforward_jump = 0.5;
};

/// Stateful controller: chart state, the last thrust axis, and the previous
/// desired attitude used for the finite-difference q̇_d.
class HfcaController {
 public:
  explicit HfcaController(HfcaConfig cfg);

  /// Start on the chart matching the current body z-axis and `posture`.
  void reset(const QuadState& x, int posture);

  /// Position loop; holds the previous thrust axis if r̈_d is degenerate.
  void update_position(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                       const std::optional<Vec3>& modulation = std::nullopt);

  /// Attitude loop, `dt` seconds after the previous attitude tick.
  ControlWrench update_attitude(const QuadState& x, double dt);

  /// Both loops back to back.
  ControlWrench step(const QuadState& x, const Vec3& acceleration, const FlatReference& ref,
                     const std::optional<Vec3>& modulation, double dt);

  const ChartState& chart_state() const { return chart_; }
  const PositionCommand& position_command() const { return command_; }
  const Quaternion& desired_attitude_quat() const { return qd_prev_; }
  const Vec3& desired_rates() const { return wd_; }
  int posture() const { return posture_; }
  const HfcaConfig& config() const { return cfg_; }

 private:
  HfcaConfig cfg_;
  ChartState chart_;
  PositionCommand command_;
  ThrustAxis axis_;
  double yaw_ = 0.0;
  double yaw_rate_ = 0.0;
  int posture_ = 1;
  double since_position_ = 0.0;
  Quaternion qd_prev_ = Quaternion::Identity();
  bool have_prev_ = false;
  Vec3 wd_ = Vec3::Zero();
};

}  // namespace flipquad
