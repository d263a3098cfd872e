#pragma once

// Quaternion and rotation helpers used by the controller and simulator.
//
// Quaternions follow the Hamilton convention (ij = k) and are stored as
// Eigen::Quaterniond. Written out as 4-vectors they are ordered [w, x, y, z].
// A quaternion q maps body-frame vectors into the world frame.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace flipquad {

using Quaternion = Eigen::Quaterniond;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

namespace so3 {

/// Tolerance used for "is this unit" checks on incoming quaternions.
inline constexpr double kUnitTolerance = 1e-6;
/// Distance from a pole below which a Hopf chart is considered singular.
inline constexpr double kPoleMargin = 1e-9;
/// Below this rotation angle the inverse right Jacobian uses its Taylor series.
inline constexpr double kJacobianSeriesThreshold = 1e-4;

inline Quaternion make_quat(double w, double x, double y, double z) { return Quaternion(w, x, y, z); }

/// [w, x, y, z] ordering, matching the written convention.
inline Vec4 to_wxyz(const Quaternion& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }
inline Quaternion from_wxyz(const Vec4& v) { return Quaternion(v[0], v[1], v[2], v[3]); }

/// Hamilton product q1 ⊗ q2.
Quaternion multiply(const Quaternion& q1, const Quaternion& q2);

Quaternion conjugate(const Quaternion& q);

/// Quaternion with zero scalar part and vector part v.
inline Quaternion pure(const Vec3& v) { return Quaternion(0.0, v.x(), v.y(), v.z()); }

/// Rotation by psi about the body z-axis: [cos(psi/2), 0, 0, sin(psi/2)].
Quaternion yaw_quat(double psi);

/// Result of a checked rotation conversion.
struct RotationResult {
  Mat3 matrix;
  bool renormalized = false;  ///< input norm was off by more than kUnitTolerance
};

/// Body-to-world rotation matrix of a unit quaternion.
Mat3 to_rotation(const Quaternion& q);

/// Like to_rotation, but normalizes an off-unit input and reports it.
RotationResult to_rotation_checked(const Quaternion& q);

/// Hopf map q -> Im(q ⊗ k ⊗ q̄), i.e. the world direction of the body z-axis.
Vec3 hopf_project(const Quaternion& q);

/// Base quaternion of the north chart for thrust direction s = (a, b, c):
/// (1/sqrt(2(1+c))) [1+c, -b, a, 0]. Throws std::domain_error near the south pole.
Quaternion chart_north(const Vec3& s);

/// Base quaternion of the south chart for thrust direction s = (a, b, c):
/// (1/sqrt(2(1-c))) [-b, 1-c, 0, a]. Throws std::domain_error near the north pole.
Quaternion chart_south(const Vec3& s);

/// Rotation vector (axis * angle) with angle in [0, pi].
///
/// At exactly pi the axis sign is fixed so that its largest-magnitude
/// component is positive.
Vec3 log(const Quaternion& q);

/// Inverse of log: unit quaternion with non-negative scalar part for |phi| <= pi.
Quaternion exp(const Vec3& phi);

/// Geodesic angle between two attitudes, in [0, pi].
double angle_between(const Quaternion& a, const Quaternion& b);

Mat3 skew(const Vec3& v);

/// Right Jacobian of SO(3): Exp(phi + d) ≈ Exp(phi) Exp(J_r(phi) d).
Mat3 right_jacobian(const Vec3& phi);

/// Closed-form inverse of right_jacobian, valid for |phi| < pi.
Mat3 inv_right_jacobian(const Vec3& phi);

/// Elementary rotations.
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// ZYX Euler composition R_z(yaw) R_y(pitch) R_x(roll).
Mat3 from_euler_zyx(double yaw, double pitch, double roll);

/// Equality up to the double-cover sign ambiguity.
bool equal_up_to_sign(const Quaternion& a, const Quaternion& b, double tol);

}  // namespace so3
}  // namespace flipquad
