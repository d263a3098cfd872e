#pragma once

// Box-constrained control allocation: Tikhonov-regularized weighted least
// squares solved with a fixed number of projected-gradient iterations.

#include <array>
#include <vector>

#include "flipquad/dynamics.hpp"

namespace flipquad {

enum class StepRule { Trace, PowerIteration };

struct AllocationConfig {
  /// Row weights on [collective, roll, pitch, yaw] wrench residuals.
  Mat4 weight = Vec4(1.0, 10.0, 10.0, 1.0).asDiagonal();
  double tikhonov = 1e-3;  ///< λ
  int iterations = 50;     ///< k
  StepRule step_rule = StepRule::Trace;
  int power_iterations = 20;
  Vec4 t_min = Vec4::Constant(-7.0);  ///< N
  Vec4 t_max = Vec4::Constant(15.0);  ///< N

  /// Bounds taken from the thrust model's range at ±omega_max.
  static AllocationConfig with_actuator_bounds(const SteadyStateParams& ss, AllocationConfig base);

  void validate() const;
};

struct QpProblem {
  Mat4 h;  ///< symmetric positive (semi)definite
  Vec4 f;
  Vec4 lo;
  Vec4 hi;

  /// ½ Tᵀ H T + fᵀ T
  double objective(const Vec4& t) const { return 0.5 * t.dot(h * t) + f.dot(t); }
  Vec4 gradient(const Vec4& t) const { return h * t + f; }
  Vec4 project(const Vec4& t) const { return t.cwiseMax(lo).cwiseMin(hi); }
};

/// T = M⁻¹ u, no bounds. Throws std::domain_error for a singular mixer.
Vec4 direct_inversion(const ControlWrench& u, const Mat4& mixer);

/// H = MᵀWᵀWM + λI, f = -(MᵀWᵀWu + λ T_prev).
QpProblem build_qp(const ControlWrench& u, const Mat4& mixer, const AllocationConfig& cfg, const Vec4& t_prev);

/// Upper bound on the largest eigenvalue of H for the chosen step rule.
double lipschitz_bound(const Mat4& h, StepRule rule, int power_iterations = 20);

/// k iterations of T ← Π(T - γ (H T + f)), γ = 1/L, started from the
/// projection of `start`. When `history` is given it receives the objective
/// at the start and after every iteration.
Vec4 pgd_solve(const QpProblem& p, int iterations, const Vec4& start, StepRule rule = StepRule::Trace,
               std::vector<double>* history = nullptr, int power_iterations = 20);

struct Allocation {
  Vec4 thrusts = Vec4::Zero();
  std::array<bool, kNumRotors> at_lower{};
  std::array<bool, kNumRotors> at_upper{};

  bool saturated() const;
};

/// build_qp + pgd_solve warm-started from T_prev.
Allocation allocate(const ControlWrench& u, const Mat4& mixer, const AllocationConfig& cfg, const Vec4& t_prev);

}  // namespace flipquad
