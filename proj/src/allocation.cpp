#include "flipquad/allocation.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace flipquad {

namespace {
constexpr double kActiveTol = 1e-9;
}

AllocationConfig AllocationConfig::with_actuator_bounds(const SteadyStateParams& ss, AllocationConfig base) {
  for (int i = 0; i < kNumRotors; ++i) {
    const Range r = thrust_range(ss, i);
    base.t_min[i] = r.lo;
    base.t_max[i] = r.hi;
  }
  return base;
}

void AllocationConfig::validate() const {
  if (!weight.allFinite() || std::abs(weight.determinant()) < 1e-14)
    throw std::invalid_argument("allocation weight matrix must be nonsingular");
  if (!(tikhonov >= 0.0)) throw std::invalid_argument("tikhonov weight must be non-negative");
  if (iterations < 1) throw std::invalid_argument("allocation iterations must be >= 1");
  if (power_iterations < 1) throw std::invalid_argument("power iterations must be >= 1");
  if (!((t_min.array() < t_max.array()).all())) throw std::invalid_argument("thrust bounds need t_min < t_max");
}

Vec4 direct_inversion(const ControlWrench& u, const Mat4& mixer) {
  Eigen::FullPivLU<Mat4> lu(mixer);
  if (!lu.isInvertible()) throw std::domain_error("direct_inversion: singular mixer");
  return lu.solve(u.as_vector());
}

QpProblem build_qp(const ControlWrench& u, const Mat4& mixer, const AllocationConfig& cfg, const Vec4& t_prev) {
  const Mat4 wm = cfg.weight * mixer;
  QpProblem p;
  p.h = wm.transpose() * wm + cfg.tikhonov * Mat4::Identity();
  p.h = 0.5 * (p.h + p.h.transpose());
  p.f = -(wm.transpose() * (cfg.weight * u.as_vector()) + cfg.tikhonov * t_prev);
  p.lo = cfg.t_min;
  p.hi = cfg.t_max;
  return p;
}

double lipschitz_bound(const Mat4& h, StepRule rule, int power_iterations) {
  if (rule == StepRule::Trace) return h.trace();
  // Power iteration, then inflate slightly so the estimate stays an upper bound.
  Vec4 v = Vec4::Constant(0.5);
  double est = 0.0;
  for (int i = 0; i < power_iterations; ++i) {
    const Vec4 w = h * v;
    const double n = w.norm();
    if (n == 0.0) return h.trace();
    est = n;
    v = w / n;
  }
  return std::min(1.01 * est, h.trace());
}

Vec4 pgd_solve(const QpProblem& p, int iterations, const Vec4& start, StepRule rule, std::vector<double>* history,
               int power_iterations) {
  const double l = lipschitz_bound(p.h, rule, power_iterations);
  Vec4 t = p.project(start);
  if (history) {
    history->clear();
    history->push_back(p.objective(t));
  }
  if (!(l > 0.0)) return t;
  const double gamma = 1.0 / l;
  for (int k = 0; k < iterations; ++k) {
    t = p.project(t - gamma * p.gradient(t));
    if (history) history->push_back(p.objective(t));
  }
  return t;
}

bool Allocation::saturated() const {
  for (int i = 0; i < kNumRotors; ++i)
    if (at_lower[static_cast<std::size_t>(i)] || at_upper[static_cast<std::size_t>(i)]) return true;
  return false;
}

Allocation allocate(const ControlWrench& u, const Mat4& mixer, const AllocationConfig& cfg, const Vec4& t_prev) {
  const QpProblem p = build_qp(u, mixer, cfg, t_prev);
  Allocation out;
  out.thrusts = pgd_solve(p, cfg.iterations, t_prev, cfg.step_rule, nullptr, cfg.power_iterations);
  for (int i = 0; i < kNumRotors; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out.at_lower[idx] = out.thrusts[i] <= p.lo[i] + kActiveTol;
    out.at_upper[idx] = out.thrusts[i] >= p.hi[i] - kActiveTol;
  }
  return out;
}

}  // namespace flipquad
