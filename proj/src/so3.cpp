#include "flipquad/so3.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flipquad::so3 {

Quaternion multiply(const Quaternion& q1, const Quaternion& q2) {
  const double w = q1.w() * q2.w() - q1.x() * q2.x() - q1.y() * q2.y() - q1.z() * q2.z();
  const double x = q1.w() * q2.x() + q1.x() * q2.w() + q1.y() * q2.z() - q1.z() * q2.y();
  const double y = q1.w() * q2.y() - q1.x() * q2.z() + q1.y() * q2.w() + q1.z() * q2.x();
  const double z = q1.w() * q2.z() + q1.x() * q2.y() - q1.y() * q2.x() + q1.z() * q2.w();
  return Quaternion(w, x, y, z);
}

Quaternion conjugate(const Quaternion& q) { return Quaternion(q.w(), -q.x(), -q.y(), -q.z()); }

Quaternion yaw_quat(double psi) { return Quaternion(std::cos(0.5 * psi), 0.0, 0.0, std::sin(0.5 * psi)); }

Mat3 to_rotation(const Quaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

RotationResult to_rotation_checked(const Quaternion& q) {
  const double n = q.norm();
  if (std::abs(n - 1.0) > kUnitTolerance) {
    if (n == 0.0 || !std::isfinite(n)) throw std::domain_error("to_rotation: quaternion has zero or non-finite norm");
    return {to_rotation(q.normalized()), true};
  }
  return {to_rotation(q), false};
}

Vec3 hopf_project(const Quaternion& q) {
  // Im(q k q̄) expands to the third column of R(q).
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  return Vec3(2 * (x * z + w * y), 2 * (y * z - w * x), w * w - x * x - y * y + z * z);
}

Quaternion chart_north(const Vec3& s) {
  const double a = s.x(), b = s.y(), c = s.z();
  if (c <= -1.0 + kPoleMargin) throw std::domain_error("chart_north: direction at the south pole singularity");
  const double k = 1.0 / std::sqrt(2.0 * (1.0 + c));
  return Quaternion(k * (1.0 + c), -k * b, k * a, 0.0);
}

Quaternion chart_south(const Vec3& s) {
  const double a = s.x(), b = s.y(), c = s.z();
  if (c >= 1.0 - kPoleMargin) throw std::domain_error("chart_south: direction at the north pole singularity");
  const double k = 1.0 / std::sqrt(2.0 * (1.0 - c));
  return Quaternion(-k * b, k * (1.0 - c), 0.0, k * a);
}

Vec3 log(const Quaternion& q_in) {
  Quaternion q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  Vec3 v(q.x(), q.y(), q.z());
  const double vn = v.norm();
  if (vn < 1e-12) {
    // angle ≈ 2|v|/w; first-order term is exact to machine precision here
    return 2.0 * v / q.w();
  }
  if (std::abs(q.w()) < 1e-9) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0.0) v = -v;
    return std::numbers::pi * v / vn;
  }
  const double angle = 2.0 * std::atan2(vn, q.w());
  return angle * v / vn;
}

Quaternion exp(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) return Quaternion(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()).normalized();
  const double s = std::sin(0.5 * angle) / angle;
  return Quaternion(std::cos(0.5 * angle), s * phi.x(), s * phi.y(), s * phi.z());
}

double angle_between(const Quaternion& a, const Quaternion& b) {
  return log(multiply(conjugate(a), b)).norm();
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 right_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kJacobianSeriesThreshold) return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  const double t2 = theta * theta;
  return Mat3::Identity() - (1.0 - std::cos(theta)) / t2 * k + (theta - std::sin(theta)) / (t2 * theta) * k * k;
}

Mat3 inv_right_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kJacobianSeriesThreshold) return Mat3::Identity() + 0.5 * k + (1.0 / 12.0) * k * k;
  const double coeff = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * k + coeff * k * k;
}

Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 from_euler_zyx(double yaw, double pitch, double roll) { return rot_z(yaw) * rot_y(pitch) * rot_x(roll); }

bool equal_up_to_sign(const Quaternion& a, const Quaternion& b, double tol) {
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff() <= tol ||
         (a.coeffs() + b.coeffs()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace flipquad::so3
