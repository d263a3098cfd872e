#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flipquad/policy.hpp"

using namespace flipquad;
namespace {

TEST(Policy, HoverObservationLayout) {
  const Observation o = build_observation(QuadState{}, ActionHistory{}, ObservationScales{});
  EXPECT_EQ(o.segment<3>(0), Vec3::Zero());
  EXPECT_EQ(o.segment<3>(3), Vec3::Zero());
  Eigen::Matrix<double, 9, 1> eye;
  eye << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  EXPECT_EQ(o.segment<9>(6), eye);
  EXPECT_EQ(o.segment<3>(15), Vec3::Zero());
  EXPECT_EQ(o.segment<12>(18), (Eigen::Matrix<double, 12, 1>::Zero()));
}

TEST(Policy, HistoryOnlyChangesHistoryBlock) {
  QuadState x;
  x.position = Vec3(0.1, -0.2, 0.3);
  ActionHistory a, b;
  b.push(RawAction(0.5, 0, 0, -1));
  const Observation oa = build_observation(x, a, ObservationScales{});
  const Observation ob = build_observation(x, b, ObservationScales{});
  EXPECT_EQ(oa.head<18>(), ob.head<18>());
  EXPECT_NE(oa.tail<12>(), ob.tail<12>());
  EXPECT_EQ(ob.segment<4>(18), RawAction(0.5, 0, 0, -1));
}

TEST(Policy, ObservationRoundTrip) {
  QuadState x;
  x.position = Vec3(0.11, -0.37, 1.9);
  x.velocity = Vec3(3.3, 0.01, -2.2);
  x.attitude = so3::exp(Vec3(0.4, 2.0, -1.0));
  x.body_rates = Vec3(7.7, -13.1, 0.3);
  ActionHistory h;
  h.push(RawAction(0.1, 0.2, 0.3, 0.4));
  const ObservationScales s;
  const DecodedObservation d = decode_observation(build_observation(x, h, s), s);
  EXPECT_EQ(d.position, x.position);
  EXPECT_EQ(d.velocity, x.velocity);
  EXPECT_EQ(d.body_rates, x.body_rates);
  EXPECT_LT((d.rotation - so3::to_rotation(x.attitude)).norm(), 1e-15);
  EXPECT_EQ(d.history[0], RawAction(0.1, 0.2, 0.3, 0.4));
}

TEST(Policy, HistoryIsFifoOfThree) {
  ActionHistory h;
  for (int i = 1; i <= 4; ++i) h.push(RawAction::Constant(i));
  EXPECT_EQ(h[0], RawAction::Constant(4));
  EXPECT_EQ(h[1], RawAction::Constant(3));
  EXPECT_EQ(h[2], RawAction::Constant(2));
}

TEST(Policy, InterpretActionExamples) {
  PolicyAction a = interpret_action(RawAction::Zero(), 2.0);
  EXPECT_EQ(a.modulation, Vec3::Zero());
  EXPECT_EQ(a.posture(), 1);
  a = interpret_action(RawAction(1, -1, 0, -0.9), 2.0);
  EXPECT_EQ(a.modulation, Vec3(2, -2, 0));
  EXPECT_EQ(a.posture(), -1);
  a = interpret_action(RawAction(3, -5, 0.5, 2), 2.0);
  EXPECT_EQ(a.modulation, Vec3(2, -2, 1));
  EXPECT_EQ(a.eta_raw, 1.0);
}

TEST(Policy, InterpretActionIdempotentAndInvertible) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const RawAction r(u(rng), u(rng), u(rng), u(rng));
    const PolicyAction a = interpret_action(r, 2.0);
    const PolicyAction b = interpret_action(to_raw(a, 2.0), 2.0);
    EXPECT_LT((a.modulation - b.modulation).norm(), 1e-15);
    EXPECT_EQ(a.eta_raw, b.eta_raw);
    EXPECT_TRUE(a.posture() == 1 || a.posture() == -1);
  }
}

TEST(Policy, ZeroNetworkGivesZeroMean) {
  Mlp<double> net({kObsDim, 8, kActDim}, true);
  net = net.zeros_like();
  const Eigen::MatrixXd out = net.forward(Eigen::MatrixXd::Random(kObsDim, 3));
  EXPECT_EQ(out, Eigen::MatrixXd::Zero(kActDim, 3));
}

TEST(Policy, HandComputedTwoLayerNetwork) {
  Mlp<double> net({1, 1, 1}, false);
  net.layers()[0].w(0, 0) = 2.0;
  net.layers()[0].b(0) = 0.5;
  net.layers()[1].w(0, 0) = -3.0;
  net.layers()[1].b(0) = 0.25;
  Eigen::MatrixXd x(1, 1);
  x(0, 0) = 0.3;
  EXPECT_NEAR(net.forward(x)(0, 0), -3.0 * std::tanh(1.1) + 0.25, 1e-15);
}

TEST(Policy, BatchedForwardMatchesSingle) {
  std::mt19937_64 rng(18);
  Mlp<float> net({kObsDim, 32, 32, kActDim}, true);
  net.init(rng, 1.0f);
  const Eigen::MatrixXf x = Eigen::MatrixXf::Random(kObsDim, 5);
  const Eigen::MatrixXf all = net.forward(x);
  for (int i = 0; i < 5; ++i) EXPECT_LT((net.forward(x.col(i)) - all.col(i)).norm(), 1e-6f);
  EXPECT_EQ(net.forward(x), all);
}

TEST(Policy, OrthogonalInitGain) {
  std::mt19937_64 rng(19);
  Mlp<double> net({16, 16, 4}, false);
  net.init(rng, 0.01);
  const Eigen::MatrixXd w = net.layers()[0].w;
  EXPECT_LT((w.transpose() * w - 2.0 * Eigen::MatrixXd::Identity(16, 16)).norm(), 1e-9);
  EXPECT_EQ(net.layers()[0].b.norm(), 0.0);
  const Eigen::MatrixXd wo = net.layers()[1].w;
  EXPECT_LT((wo * wo.transpose() - 1e-4 * Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
}

TEST(Policy, BackpropMatchesFiniteDifferences) {
  std::mt19937_64 rng(20);
  Mlp<double> net({6, 16, 16, 3}, true);
  net.init(rng, 1.0);
  for (auto& l : net.layers()) l.b.setRandom();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 4);
  const Eigen::MatrixXd gout = Eigen::MatrixXd::Random(3, 4);
  auto loss = [&](const Mlp<double>& n) { return (n.forward(x).array() * gout.array()).sum(); };
  Mlp<double>::Cache cache;
  net.forward(x, cache);
  Mlp<double> grads = net.zeros_like();
  net.backward(cache, gout, grads);
  const Eigen::VectorXd g = grads.flat(), theta = net.flat();
  for (Eigen::Index i = 0; i < theta.size(); i += 7) {
    Mlp<double> p = net, m = net;
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += 1e-6;
    tm[i] -= 1e-6;
    p.set_flat(tp);
    m.set_flat(tm);
    const double fd = (loss(p) - loss(m)) / 2e-6;
    EXPECT_NEAR(g[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Policy, GaussianLogProb) {
  const RawAction mu(0.1, -0.2, 0.0, 0.5), ls = RawAction::Constant(std::log(0.25));
  const double lp = gaussian_log_prob(mu, mu, ls);
  EXPECT_NEAR(lp, 4 * (-std::log(0.25) - 0.5 * std::log(2 * 3.14159265358979323846)), 1e-12);
}

TEST(Policy, SaveLoadRoundTrip) {
  std::mt19937_64 rng(21);
  const auto p = GaussianPolicy<float>::make({32, 32}, rng);
  const std::string path = ::testing::TempDir() + "policy.bin";
  save_policy(p, path);
  const auto q = load_policy(path);
  EXPECT_EQ(p.mean.flat(), q.mean.flat());
  EXPECT_EQ(p.log_std, q.log_std);
  EXPECT_EQ(q.mean.widths(), (std::vector<int>{kObsDim, 32, 32, kActDim}));
  EXPECT_THROW(load_policy(::testing::TempDir() + "missing.bin"), std::runtime_error);
}

TEST(Policy, DelayLine) {
  EXPECT_EQ(delay_steps(0.006, 0.001), 6);
  EXPECT_EQ(delay_steps(0.0, 0.001), 0);
  EXPECT_THROW(delay_steps(0.0065, 0.001), std::invalid_argument);
  std::vector<RawAction> s;
  for (int i = 1; i <= 10; ++i) s.push_back(RawAction::Constant(i));
  EXPECT_EQ(delayed_apply(s, 0), s);
  const auto d = delayed_apply(s, 6);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(d[static_cast<std::size_t>(i)], RawAction::Zero());
  for (int i = 6; i < 10; ++i) EXPECT_EQ(d[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(i - 6)]);
}

}  // namespace
