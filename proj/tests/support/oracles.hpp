#pragma once

// Independent reference implementations used only by tests.

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace oracle {

struct BoxQpSolution {
  Eigen::Vector4d x;
  double objective = std::numeric_limits<double>::infinity();
};

/// Exact minimizer of ½xᵀHx + fᵀx over lo ≤ x ≤ hi by enumerating every
/// free / at-lower / at-upper pattern (3⁴ = 81) and keeping the best
/// feasible stationary point.
inline BoxQpSolution box_qp_enumerate(const Eigen::Matrix4d& h, const Eigen::Vector4d& f, const Eigen::Vector4d& lo,
                                      const Eigen::Vector4d& hi) {
  BoxQpSolution best;
  for (int code = 0; code < 81; ++code) {
    int c = code;
    int state[4];
    for (int i = 0; i < 4; ++i) {
      state[i] = c % 3;
      c /= 3;
    }
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    int free_idx[4];
    int nf = 0;
    for (int i = 0; i < 4; ++i) {
      if (state[i] == 1)
        x[i] = lo[i];
      else if (state[i] == 2)
        x[i] = hi[i];
      else
        free_idx[nf++] = i;
    }
    if (nf > 0) {
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        double r = -f[free_idx[a]];
        for (int j = 0; j < 4; ++j)
          if (state[j] != 0) r -= h(free_idx[a], j) * x[j];
        rhs[a] = r;
        for (int b = 0; b < nf; ++b) hff(a, b) = h(free_idx[a], free_idx[b]);
      }
      const Eigen::VectorXd xf = hff.fullPivLu().solve(rhs);
      for (int a = 0; a < nf; ++a) x[free_idx[a]] = xf[a];
    }
    bool feasible = true;
    for (int i = 0; i < 4; ++i)
      if (x[i] < lo[i] - 1e-12 || x[i] > hi[i] + 1e-12) feasible = false;
    if (!feasible) continue;
    const double obj = 0.5 * x.dot(h * x) + f.dot(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
    }
  }
  return best;
}

struct BoxQp {
  Eigen::Matrix4d h;
  Eigen::Vector4d f, lo, hi;
};

/// Random box QP: H = Q diag(λ) Qᵀ with Q from the QR of a Gaussian matrix and
/// λ log-uniform in [0.1, 1]; f ~ N(0, 1); each box has centre U(-1, 1) and
/// half-width 0.1 + |U(-1, 1)|.
inline BoxQp random_box_qp(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0), log_eig(std::log(0.1), 0.0);
  Eigen::Matrix4d a;
  for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = n(rng);
  const Eigen::Matrix4d q = Eigen::HouseholderQR<Eigen::Matrix4d>(a).householderQ();
  Eigen::Vector4d e;
  for (int i = 0; i < 4; ++i) e[i] = std::exp(log_eig(rng));
  BoxQp p;
  p.h = q * e.asDiagonal() * q.transpose();
  p.h = 0.5 * (p.h + p.h.transpose()).eval();
  for (int i = 0; i < 4; ++i) {
    p.f[i] = n(rng);
    const double c = u(rng), w = 0.1 + std::abs(u(rng));
    p.lo[i] = c - w;
    p.hi[i] = c + w;
  }
  return p;
}

/// Central difference of a scalar function along coordinate i.
template <typename Vec>
double central_diff(const std::function<double(const Vec&)>& fn, Vec x, int i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = fn(x);
  x[i] = x0 - h;
  const double fm = fn(x);
  return (fp - fm) / (2.0 * h);
}

/// Rotation of angle θ about unit axis u (Rodrigues), independent of the
/// quaternion code paths.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double theta) {
  const Eigen::Vector3d u = axis.normalized();
  Eigen::Matrix3d k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

}  // namespace oracle
