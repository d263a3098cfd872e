// Randomized invariant sweeps across modules, seeded for reproducibility.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flipquad/allocation.hpp"
#include "flipquad/experiment.hpp"
#include "flipquad/hfca.hpp"
#include "flipquad/metrics.hpp"
#include "flipquad/policy.hpp"
#include "flipquad/trajectory.hpp"
#include "oracles.hpp"

using namespace flipquad;
namespace {

constexpr double kPi = 3.14159265358979323846;

Quaternion random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

TEST(Properties, FiberInvariance) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> psi(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const Quaternion q = random_unit(rng);
    EXPECT_LT((so3::hopf_project(so3::multiply(q, so3::yaw_quat(psi(rng)))) - so3::hopf_project(q)).norm(), 1e-9);
  }
}

TEST(Properties, RotationHomomorphismAndOrthonormality) {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 1000; ++k) {
    const Quaternion a = random_unit(rng), b = random_unit(rng);
    const Mat3 ra = so3::to_rotation(a);
    EXPECT_LT((ra.transpose() * ra - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(ra.determinant(), 1.0, 1e-12);
    EXPECT_LT((so3::to_rotation(so3::multiply(a, b)) - ra * so3::to_rotation(b)).norm(), 1e-9);
    EXPECT_NEAR(so3::multiply(a, b).norm(), 1.0, 1e-12);
  }
}

TEST(Properties, ChartRoundTrip) {
  std::mt19937_64 rng(102);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 s = random_direction(rng);
    if (s.z() > -0.99) EXPECT_LT((so3::hopf_project(so3::chart_north(s)) - s).norm(), 1e-9);
    if (s.z() < 0.99) EXPECT_LT((so3::hopf_project(so3::chart_south(s)) - s).norm(), 1e-9);
  }
}

TEST(Properties, EquatorChartContinuity) {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const double th = u(rng), psi = u(rng);
    const Vec3 s(std::cos(th), std::sin(th), 0.0);
    const Quaternion qn = so3::multiply(so3::chart_north(s), so3::yaw_quat(psi));
    const Quaternion qs = so3::multiply(so3::chart_south(s), so3::yaw_quat(psi + 2.0 * std::atan2(s.x(), s.y())));
    EXPECT_TRUE(so3::equal_up_to_sign(qn, qs, 1e-9));
  }
}

TEST(Properties, DesiredAttitudeChartConsistency) {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 s = random_direction(rng);
    for (int eta : {1, -1}) {
      const Vec3 b3d = eta * s;
      ChartState cs = ChartState::for_direction(b3d, eta);
      cs.yaw_offset = cs.chart == Chart::South ? u(rng) : 0.0;
      const Quaternion q = desired_attitude(s, eta, u(rng), cs).attitude;
      EXPECT_LT((so3::hopf_project(q) - b3d).norm(), 1e-9);
    }
  }
}

TEST(Properties, YawOffsetContinuityAcrossSwitch) {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  const ChartConfig cfg;
  for (int k = 0; k < 200; ++k) {
    const double th = u(rng), psi = u(rng);
    ChartState cs;
    Quaternion prev;
    bool have = false;
    for (double c = 0.0; c > -0.3; c -= 1e-4) {
      const double r = std::sqrt(1.0 - c * c);
      const Vec3 s(r * std::cos(th), r * std::sin(th), c);
      const ChartState next = chart_switch(cs, s, 1, cfg);
      const Quaternion q = desired_attitude(s, 1, psi, next).attitude;
      if (have && next.chart != cs.chart) {
        const Quaternion before = desired_attitude(s, 1, psi, cs).attitude;
        EXPECT_TRUE(so3::equal_up_to_sign(before, q, 1e-6));
        EXPECT_LT(so3::angle_between(prev, q), 1e-3);
      }
      cs = next;
      prev = q;
      have = true;
    }
    EXPECT_EQ(cs.chart, Chart::South);
  }
}

TEST(Properties, ThrustAxisRateOrthogonal) {
  std::mt19937_64 rng(106);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 a(n(rng), n(rng), n(rng)), j(n(rng), n(rng), n(rng));
    const ThrustAxis ax = thrust_axis(a, j);
    EXPECT_NEAR(ax.direction.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(ax.direction.dot(ax.rate)), 1e-12);
  }
}

TEST(Properties, ZeroErrorGivesZeroTorque) {
  std::mt19937_64 rng(107);
  for (int k = 0; k < 200; ++k) {
    const Quaternion q = random_unit(rng);
    const Vec3 w = random_direction(rng);
    EXPECT_LT(attitude_feedback(q, w, q, w, Gains{}, Vec3::Zero(), 5.0).norm(), 1e-12);
  }
}

TEST(Properties, MotorStepContraction) {
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> u(-3000.0, 3000.0);
  const TransientParams t;
  for (int k = 0; k < 1000; ++k) {
    const double w = u(rng), wd = u(rng);
    const double set = reversal_pending(w, wd, t) ? t.omega_switch : wd;
    const double next = motor_step(w, wd, t, 0.001);
    EXPECT_LE(std::abs(next - set), std::abs(w - set) + 1e-12);
  }
}

TEST(Properties, DeadZoneTransitFollowsLnRatio) {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> start(800.0, 3000.0), dz(100.0, 400.0), a(20.0, 60.0);
  for (int k = 0; k < 50; ++k) {
    TransientParams t;
    t.alpha_pos = t.alpha_neg = a(rng);
    t.dead_zone = dz(rng);
    double w = start(rng);
    const double w0 = w;
    const double dt = 0.001;
    int steps = 0;
    while (w > t.omega_switch + t.dead_zone) {
      w = motor_step(w, -1000.0, t, dt);
      ++steps;
    }
    // explicit Euler contracts by (1 - α dt) per step
    const double predicted = std::log(t.dead_zone / w0) / std::log(1.0 - t.alpha_pos * dt);
    EXPECT_EQ(steps, static_cast<int>(std::ceil(predicted)));
    EXPECT_NEAR(steps * dt, std::log(w0 / t.dead_zone) / t.alpha_pos, 0.05 * std::log(w0 / t.dead_zone) / t.alpha_pos + dt);
  }
}

TEST(Properties, RegimeConsistency) {
  const SteadyStateParams p;
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> u(-3000.0, 3000.0);
  for (int k = 0; k < 1000; ++k) {
    const double w = u(rng);
    const RegimeCoeffs& c = w >= 0.0 ? p.rotors[0].pos : p.rotors[0].neg;
    EXPECT_EQ(thrust_of_rate(w, p, 0), c.c2 * w * std::abs(w) + c.c1 * w + c.c0);
  }
  EXPECT_EQ(regime_of(0.0), Regime::Positive);
}

TEST(Properties, StepKeepsUnitQuaternionAndReplaysExactly) {
  QuadParams p;
  ActuatorParams act;
  std::mt19937_64 rng(111);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  QuadState a, b;
  a.body_rates = b.body_rates = Vec3(1.0, -2.0, 0.5);
  for (int k = 0; k < 500; ++k) {
    const Vec4 t(u(rng), u(rng), u(rng), u(rng));
    a = step(a, t, p, act, 0.001).state;
    b = step(b, t, p, act, 0.001).state;
    EXPECT_NEAR(a.attitude.norm(), 1.0, 1e-9);
  }
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.attitude.coeffs(), b.attitude.coeffs());
}

TEST(Properties, YawTorqueExactWithPositiveThrusts) {
  QuadParams p;
  SteadyStateParams ss;
  std::mt19937_64 rng(112);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const double ms = ss.rotors[0].pos.moment_scale;
  for (int k = 0; k < 100; ++k) {
    const Vec4 t(u(rng), u(rng), u(rng), u(rng));
    const ControlWrench w = wrench_from_thrusts(t, mixer(MotorRates::Constant(100.0), p, ss));
    EXPECT_NEAR(w.torque.z(), ms * -t[0] + ms * -t[1] + ms * t[2] + ms * t[3], 1e-14);
  }
}

TEST(Properties, GyroscopicTermDoesNoWork) {
  QuadParams p;
  p.inertia = Vec3(0.004, 0.006, 0.009).asDiagonal();
  std::mt19937_64 rng(113);
  for (int k = 0; k < 100; ++k) {
    QuadState x;
    x.body_rates = random_direction(rng) * 5.0;
    const Vec3 tau = random_direction(rng) * 0.01;
    const auto d = dynamics_deriv(x, ControlWrench{0.0, tau}, p);
    EXPECT_NEAR(x.body_rates.dot(p.inertia * d.body_rates), x.body_rates.dot(tau), 1e-12);
  }
}

QpProblem random_qp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat4 a;
  for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = u(rng);
  QpProblem p;
  p.h = a.transpose() * a + 0.05 * Mat4::Identity();
  for (int i = 0; i < 4; ++i) {
    p.f[i] = 2.0 * u(rng);
    const double c = u(rng), w = 0.1 + std::abs(u(rng));
    p.lo[i] = c - w;
    p.hi[i] = c + w;
  }
  return p;
}

TEST(Properties, PgdFeasibleAndMonotone) {
  std::mt19937_64 rng(114);
  for (int k = 0; k < 300; ++k) {
    const QpProblem p = random_qp(rng);
    std::vector<double> hist;
    const Vec4 t = pgd_solve(p, 50, Vec4::Random() * 3.0, StepRule::Trace, &hist);
    EXPECT_TRUE(((t - p.lo).array() >= 0.0).all());
    EXPECT_TRUE(((p.hi - t).array() >= 0.0).all());
    for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] + 1e-12);
  }
}

TEST(Properties, PgdKktAtConvergence) {
  std::mt19937_64 rng(115);
  for (int k = 0; k < 200; ++k) {
    const QpProblem p = random_qp(rng);
    const Vec4 t = pgd_solve(p, 5000, Vec4::Zero());
    const Vec4 g = p.gradient(t);
    for (int i = 0; i < 4; ++i) {
      if (t[i] <= p.lo[i] + 1e-9)
        EXPECT_GE(g[i], -1e-6);
      else if (t[i] >= p.hi[i] - 1e-9)
        EXPECT_LE(g[i], 1e-6);
      else
        EXPECT_LT(std::abs(g[i]), 1e-6);
    }
  }
}

TEST(Properties, PgdFixedPointInsideBox) {
  std::mt19937_64 rng(116);
  for (int k = 0; k < 100; ++k) {
    QpProblem p = random_qp(rng);
    p.h += Mat4::Identity();
    const Vec4 x = -p.h.ldlt().solve(p.f);
    p.lo = x - Vec4::Constant(1.0);
    p.hi = x + Vec4::Constant(1.0);
    EXPECT_LT((pgd_solve(p, 2000, Vec4::Zero()) - x).norm(), 1e-6);
  }
}

TEST(Properties, SaturatedAllocationPrioritizesRollPitch) {
  // saturating wrench: the returned point is the weighted optimum, so no
  // feasible point does better on the roll/pitch rows without losing on the others
  const Mat4 m = mixer(MotorRates::Constant(1.0), QuadParams{}, SteadyStateParams{});
  AllocationConfig cfg;
  cfg.iterations = 5000;
  cfg.tikhonov = 0.0;
  const ControlWrench u{40.0, Vec3(1.5, -1.0, 0.05)};
  const Allocation a = allocate(u, m, cfg, Vec4::Zero());
  ASSERT_TRUE(a.saturated());
  const QpProblem qp = build_qp(u, m, cfg, Vec4::Zero());
  const auto best = oracle::box_qp_enumerate(qp.h, qp.f, qp.lo, qp.hi);
  EXPECT_NEAR(qp.objective(a.thrusts), best.objective, 1e-6);
  const Vec4 r_alloc = m * a.thrusts - u.as_vector();
  std::mt19937_64 rng(117);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    Vec4 t;
    for (int i = 0; i < 4; ++i) t[i] = cfg.t_min[i] + uu(rng) * (cfg.t_max[i] - cfg.t_min[i]);
    const Vec4 r = m * t - u.as_vector();
    const bool others_no_worse = std::abs(r[0]) <= std::abs(r_alloc[0]) && std::abs(r[3]) <= std::abs(r_alloc[3]);
    if (others_no_worse) EXPECT_GE(r.segment<2>(1).norm(), r_alloc.segment<2>(1).norm() - 1e-6);
  }
}

TEST(Properties, MinSnapResidualOnRandomSpecs) {
  std::mt19937_64 rng(118);
  std::uniform_real_distribution<double> u(-1.0, 1.0), d(0.5, 2.0);
  for (int k = 0; k < 50; ++k) {
    MinSnapSpec spec;
    spec.waypoints = {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    spec.durations = {d(rng), d(rng)};
    spec.yaw = {u(rng), u(rng), u(rng)};
    spec.posture.entries = {{0.0, 1}, {spec.durations[0], -1}};
    const PiecewisePolynomial p = min_snap(spec);
    EXPECT_LT(min_snap_residual(spec, p), 1e-8);
    const MinSnapReference ref(spec);
    for (double t = 0.0; t < 4.0; t += 0.1) EXPECT_EQ(ref.sample(t).posture, spec.posture.at(t));
  }
}

TEST(Properties, SettlingMonotoneUnderFrontTruncation) {
  std::mt19937_64 rng(119);
  std::uniform_real_distribution<double> ang(0.0, 0.4);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> t;
    std::vector<Vec3> g;
    for (int i = 0; i < 200; ++i) {
      t.push_back(i * 0.01);
      const double a = ang(rng) * (i < 150 ? 1.0 : 0.3);
      g.emplace_back(std::sin(a), 0.0, std::cos(a));
    }
    const auto full = settling_time(t, g, Vec3::UnitZ(), 10.0);
    if (!full) continue;
    for (std::size_t cut = 1; cut < 200; cut += 17) {
      std::vector<double> tt(t.begin() + static_cast<long>(cut), t.end());
      std::vector<Vec3> gg(g.begin() + static_cast<long>(cut), g.end());
      const auto part = settling_time(tt, gg, Vec3::UnitZ(), 10.0);
      ASSERT_TRUE(part.has_value());
      EXPECT_GE(*part, *full - 1e-12);
    }
  }
}

TEST(Properties, PositionMetricsTranslationInvariant) {
  std::mt19937_64 rng(120);
  for (int k = 0; k < 100; ++k) {
    std::vector<Vec3> r, rs;
    const Vec3 shift = random_direction(rng) * 3.0;
    for (int i = 0; i < 50; ++i) {
      r.push_back(random_direction(rng) * 0.2);
      rs.push_back(r.back() + shift);
    }
    const PositionMetrics a = position_metrics(r), b = position_metrics(rs, shift);
    EXPECT_NEAR(a.rmse, b.rmse, 1e-12);
    EXPECT_LT((a.max_deviation - b.max_deviation).norm(), 1e-12);
  }
}

TEST(Properties, PolicyForwardIsBitDeterministic) {
  std::mt19937_64 rng(121);
  const auto p = GaussianPolicy<float>::make({64, 64}, rng);
  const Eigen::MatrixXf x = Eigen::MatrixXf::Random(kObsDim, 7);
  EXPECT_EQ(p.mean.forward(x), p.mean.forward(x));
  for (int k = 0; k < 100; ++k) {
    const PolicyAction a = interpret_action(RawAction::Random() * 3.0, 2.0);
    EXPECT_TRUE(a.posture() == 1 || a.posture() == -1);
    EXPECT_LE(a.modulation.cwiseAbs().maxCoeff(), 2.0);
  }
}

}  // namespace
