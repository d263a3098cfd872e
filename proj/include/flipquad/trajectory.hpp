#pragma once

// Flat reference generators: constant hover, step posture, three-waypoint
// minimum snap with a posture switch, and circles.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "flipquad/hfca.hpp"

namespace flipquad {

class ReferenceSource {
 public:
  virtual ~ReferenceSource() = default;
  virtual FlatReference sample(double t) const = 0;
};

class ConstantReference final : public ReferenceSource {
 public:
  ConstantReference(const Vec3& position, double yaw, int posture);
  FlatReference sample(double t) const override;

 private:
  FlatReference ref_;
};

/// Constant position; η = initial for t < t_flip and -initial from t_flip on.
class StepPostureReference final : public ReferenceSource {
 public:
  StepPostureReference(int initial_posture, double t_flip, const Vec3& position = Vec3::Zero(), double yaw = 0.0);
  FlatReference sample(double t) const override;
  double flip_time() const { return t_flip_; }

 private:
  FlatReference ref_;
  int initial_;
  double t_flip_;
};

/// Piecewise-constant η. Before the first entry the first η applies.
struct PostureSchedule {
  std::vector<std::pair<double, int>> entries{{0.0, 1}};

  int at(double t) const;
  void validate() const;
};

/// Monomial coefficients per segment, columns (x, y, z, yaw), local time
/// τ ∈ [0, T_i].
class PiecewisePolynomial {
 public:
  static constexpr int kOrder = 7;
  using Coeffs = Eigen::Matrix<double, kOrder + 1, 4>;

  PiecewisePolynomial(std::vector<Coeffs> segments, std::vector<double> durations);

  /// d-th time derivative of (x, y, z, yaw). Times outside [0, total] are
  /// clamped to the ends.
  Vec4 evaluate(double t, int derivative = 0) const;

  /// Value of segment i at local time τ (no clamping).
  Vec4 evaluate_segment(std::size_t i, double tau, int derivative) const;

  double total_duration() const;
  const std::vector<double>& durations() const { return durations_; }
  const std::vector<Coeffs>& segments() const { return segments_; }

  /// ∫ ‖r⁽⁴⁾‖² dt over the position channels, exact.
  double snap_cost() const;

 private:
  std::vector<Coeffs> segments_;
  std::vector<double> durations_;
};

/// Equality-constrained QP of one channel: minimize cᵀ Q c subject to A c = b
/// over the 16 stacked coefficients of the two segments.
struct SnapQp {
  Eigen::MatrixXd q;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

/// Rest-to-rest through (w0, w1, w2) with C⁴ continuity at the knot and,
/// when given, a fixed acceleration at the knot.
SnapQp min_snap_qp(double w0, double w1, double w2, double t1, double t2, std::optional<double> knot_acceleration);

/// Solves the KKT system; throws std::runtime_error when it is singular.
Eigen::VectorXd solve_snap_qp(const SnapQp& qp);

struct MinSnapSpec {
  std::array<Vec3, 3> waypoints{Vec3::Zero(), Vec3(0.0, 0.0, 0.45), Vec3::Zero()};
  std::array<double, 2> durations{1.0, 1.0};
  std::array<double, 3> yaw{0.0, 0.0, 0.0};
  PostureSchedule posture{{{0.0, 1}, {1.0, -1}}};
  /// r̈ = -g e3 at the second waypoint when the posture changes there.
  bool free_fall = true;
  double gravity = 9.81;

  /// Default spec for a transition starting from posture η.
  static MinSnapSpec for_transition(int initial_posture);
  void validate() const;
};

PiecewisePolynomial min_snap(const MinSnapSpec& spec);

/// Max |A c - b| over all channels of a min-snap solution.
double min_snap_residual(const MinSnapSpec& spec, const PiecewisePolynomial& poly);

class MinSnapReference final : public ReferenceSource {
 public:
  explicit MinSnapReference(const MinSnapSpec& spec);
  FlatReference sample(double t) const override;
  const PiecewisePolynomial& polynomial() const { return poly_; }
  const MinSnapSpec& spec() const { return spec_; }

 private:
  MinSnapSpec spec_;
  PiecewisePolynomial poly_;
};

enum class YawMode { Fixed, Tangent };

/// Horizontal circle about `center`; Tangent yaw follows the direction of
/// travel (falls back to Fixed for a zero radius).
class CircleReference final : public ReferenceSource {
 public:
  CircleReference(double radius, double period, const Vec3& center, int posture, YawMode yaw_mode = YawMode::Fixed,
                  double yaw = 0.0);
  FlatReference sample(double t) const override;

 private:
  double radius_;
  double period_;
  Vec3 center_;
  int posture_;
  YawMode yaw_mode_;
  double yaw_;
};

/// Reads a min-snap spec from JSON: waypoints, durations, posture, optional
/// yaw, free_fall, gravity.
MinSnapSpec read_min_snap_spec(const std::string& path);

/// Tidy CSV of a reference sampled every dt over [0, duration].
void write_reference_csv(const ReferenceSource& src, double duration, double dt, const std::string& path);

}  // namespace flipquad
