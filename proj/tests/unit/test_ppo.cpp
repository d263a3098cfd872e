#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "flipquad/ppo.hpp"

using namespace flipquad;
namespace {

constexpr double kPi = 3.14159265358979323846;

TEST(Ppo, RewardWeightColumns) {
  const RewardWeights n = RewardWeights::for_transition(Transition::NTI);
  EXPECT_EQ(n.position, 5.0);
  EXPECT_EQ(n.velocity, 0.005);
  EXPECT_EQ(n.rates, 0.2);
  const RewardWeights i = RewardWeights::for_transition(Transition::ITN);
  EXPECT_EQ(i.velocity, 0.0);
  EXPECT_EQ(i.rates, 0.75);
}

TEST(Ppo, HuberBranches) {
  EXPECT_EQ(huber(Vec3::Zero()), 0.0);
  EXPECT_NEAR(huber(Vec3(1.0, 0, 0), 1.0), 0.5, 1e-15);
  EXPECT_NEAR(huber(Vec3(0, 0.6, 0.8), 1.0), 0.5, 1e-15);
  EXPECT_NEAR(huber(Vec3(0, 0, 2.0), 1.0), 1.5, 1e-15);
  EXPECT_NEAR(huber(Vec3(0, 0, 1.4), 0.7), 1.5 * 0.49, 1e-15);
}

TEST(Ppo, StepCostExamples) {
  const RewardWeights w = RewardWeights::nti();
  const Vec3 g_inv = Vec3::UnitZ();
  QuadState goal;
  goal.attitude = Quaternion(0, 1, 0, 0);
  PolicyAction a;
  a.eta_raw = -1.0;
  EXPECT_NEAR(step_cost(goal, a, a, w, g_inv), 0.0, 1e-15);

  QuadState off = goal;
  off.position = Vec3(0.1, 0, 0);
  EXPECT_NEAR(step_cost(off, a, a, w, g_inv), 0.5, 1e-15);

  QuadState upright;
  const double c = step_cost(upright, a, a, w, g_inv);
  EXPECT_NEAR(c, 6.0, 1e-15);
  EXPECT_EQ(step_reward(upright, a, a, w, g_inv), -c);
}

TEST(Ppo, StepCostPostureAndActionRate) {
  const RewardWeights w = RewardWeights::nti();
  QuadState x;
  PolicyAction a, b;
  a.eta_raw = 0.5;
  b.eta_raw = 0.5;
  b.modulation = Vec3(0.3, -0.4, 0.0);
  EXPECT_NEAR(step_cost(x, a, a, w, -Vec3::UnitZ()), w.posture * 0.75, 1e-15);
  EXPECT_NEAR(step_cost(x, b, a, w, -Vec3::UnitZ()), w.posture * 0.75 + w.action_rate * 0.5, 1e-15);
}

TEST(Ppo, StepCostClipsState) {
  const RewardWeights w = RewardWeights::nti();
  QuadState far;
  far.position = Vec3(100, 0, 0);
  PolicyAction a;
  a.eta_raw = 1.0;
  EXPECT_NEAR(step_cost(far, a, a, w, -Vec3::UnitZ()), 5.0 * 5.0, 1e-12);
}

TEST(Ppo, GaeExamples) {
  GaeResult r = gae({1.0}, {0.0, 0.0}, 0.99, 0.95);
  EXPECT_EQ(r.advantages[0], 1.0);
  const std::vector<double> rew{1.0, -0.5, 2.0, 0.3, -1.0}, val{0.2, -0.1, 0.5, 0.4, 0.0, 0.7};
  const double g = 0.9;
  r = gae(rew, val, g, 0.0);
  for (std::size_t t = 0; t < rew.size(); ++t)
    EXPECT_NEAR(r.advantages[t], rew[t] + g * val[t + 1] - val[t], 1e-15);
  r = gae(rew, val, g, 1.0);
  for (std::size_t t = 0; t < rew.size(); ++t) {
    double ret = 0.0, disc = 1.0;
    for (std::size_t k = t; k < rew.size(); ++k, disc *= g) ret += disc * rew[k];
    ret += disc * val.back();
    EXPECT_NEAR(r.advantages[t], ret - val[t], 1e-12);
    EXPECT_NEAR(r.returns[t], ret, 1e-12);
  }
}

TEST(Ppo, GaeUndiscountedIsRewardToGoMinusValue) {
  const std::vector<double> rew{0.5, 1.5, -2.0}, val{1.0, 2.0, 3.0, 9.0};
  const GaeResult r = gae(rew, val, 1.0, 1.0, {false, false, true});
  EXPECT_EQ(r.advantages[0], 0.0 - 1.0);
  EXPECT_EQ(r.advantages[1], -0.5 - 2.0);
  EXPECT_EQ(r.advantages[2], -2.0 - 3.0);
}

TEST(Ppo, ClippedSurrogate) {
  EXPECT_NEAR(clipped_surrogate(1.5, 2.0, 0.2), 1.2 * 2.0, 1e-15);
  EXPECT_EQ(clipped_surrogate_grad(1.5, 2.0, 0.2), 0.0);
  EXPECT_NEAR(clipped_surrogate(1.5, -2.0, 0.2), -3.0, 1e-15);
  EXPECT_EQ(clipped_surrogate_grad(1.5, -2.0, 0.2), -2.0);
  EXPECT_NEAR(clipped_surrogate(0.5, -1.0, 0.2), -0.8, 1e-15);
  EXPECT_EQ(clipped_surrogate(1.0, 0.0, 0.2), 0.0);
}

TEST(Ppo, BanditSurrogateGradientMatchesFiniteDifference) {
  // one-parameter policy: mean of channel 0 is θ, the other channels and log std are fixed
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  const int b = 16;
  const RawAction log_std = RawAction::Constant(std::log(0.3));
  Eigen::MatrixXd actions(kActDim, b);
  Eigen::VectorXd logp_old(b), adv(b);
  const double theta_old = 0.1;
  for (int i = 0; i < b; ++i) {
    for (int c = 0; c < kActDim; ++c) actions(c, i) = (c == 0 ? theta_old : 0.0) + 0.3 * n(rng);
    RawAction mu = RawAction::Zero();
    mu[0] = theta_old;
    logp_old[i] = gaussian_log_prob(actions.col(i), mu, log_std);
    adv[i] = n(rng);
  }
  auto loss_at = [&](double theta, PolicyLoss* out) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(kActDim, b);
    mean.row(0).setConstant(theta);
    PolicyLoss l = policy_loss(mean, log_std, actions, logp_old, adv, 0.2, 0.01);
    if (out) *out = l;
    return l.loss;
  };
  for (double theta : {0.1, 0.12, 0.05}) {
    PolicyLoss l;
    loss_at(theta, &l);
    const double analytic = l.grad_mean.row(0).sum();
    const double h = 1e-6;
    const double fd = (loss_at(theta + h, nullptr) - loss_at(theta - h, nullptr)) / (2 * h);
    EXPECT_NEAR(analytic, fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Ppo, LogStdGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(23);
  const int b = 8;
  const Eigen::MatrixXd mean = Eigen::MatrixXd::Random(kActDim, b) * 0.3;
  const Eigen::MatrixXd actions = mean + Eigen::MatrixXd::Random(kActDim, b) * 0.2;
  RawAction ls = RawAction::Constant(std::log(0.25));
  Eigen::VectorXd logp_old(b), adv = Eigen::VectorXd::Random(b);
  for (int i = 0; i < b; ++i) logp_old[i] = gaussian_log_prob(actions.col(i), mean.col(i), ls) + 0.05;
  const PolicyLoss l = policy_loss(mean, ls, actions, logp_old, adv, 0.2, 0.01);
  for (int c = 0; c < kActDim; ++c) {
    RawAction p = ls, m = ls;
    p[c] += 1e-6;
    m[c] -= 1e-6;
    const double fd = (policy_loss(mean, p, actions, logp_old, adv, 0.2, 0.01).loss -
                       policy_loss(mean, m, actions, logp_old, adv, 0.2, 0.01).loss) /
                      2e-6;
    EXPECT_NEAR(l.grad_log_std[c], fd, 1e-6);
  }
}

TEST(Ppo, ZeroAdvantagesGiveNoMeanGradient) {
  const int b = 6;
  const Eigen::MatrixXd mean = Eigen::MatrixXd::Random(kActDim, b);
  const Eigen::MatrixXd actions = Eigen::MatrixXd::Random(kActDim, b);
  const RawAction ls = RawAction::Constant(-1.0);
  Eigen::VectorXd logp_old(b);
  for (int i = 0; i < b; ++i) logp_old[i] = gaussian_log_prob(actions.col(i), mean.col(i), ls);
  const PolicyLoss l = policy_loss(mean, ls, actions, logp_old, Eigen::VectorXd::Zero(b), 0.2, 0.01);
  EXPECT_EQ(l.grad_mean.norm(), 0.0);
  for (int c = 0; c < kActDim; ++c) EXPECT_NEAR(l.grad_log_std[c], -0.01, 1e-15);
}

TEST(Ppo, GaussianEntropy) {
  const RawAction ls = RawAction::Constant(std::log(0.25));
  EXPECT_NEAR(gaussian_entropy(ls), 4 * (0.5 * std::log(2 * kPi * std::exp(1.0)) + std::log(0.25)), 1e-12);
}

TEST(Ppo, ResetDistributionRanges) {
  std::mt19937_64 rng(24);
  const InitialSpread spread;
  double yaw_min = 10, yaw_max = -10;
  for (int k = 0; k < 100000; ++k) {
    const QuadState x = reset_distribution(rng, 1, spread);
    EXPECT_LE(x.position.cwiseAbs().maxCoeff(), 0.1);
    const Mat3 r = so3::to_rotation(x.attitude);
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    yaw_min = std::min(yaw_min, yaw);
    yaw_max = std::max(yaw_max, yaw);
  }
  EXPECT_LT(yaw_min, -3.1);
  EXPECT_GT(yaw_max, 3.1);
}

TEST(Ppo, ResetDistributionInverted) {
  std::mt19937_64 rng(25);
  for (int k = 0; k < 1000; ++k) {
    const QuadState x = reset_distribution(rng, -1, InitialSpread{});
    const double angle = std::acos(std::clamp(-so3::hopf_project(x.attitude).z(), -1.0, 1.0));
    EXPECT_LT(angle, 0.2);
  }
}

TEST(Ppo, ResetDistributionZeroSpread) {
  std::mt19937_64 rng(26);
  const QuadState up = reset_distribution(rng, 1, InitialSpread::none());
  EXPECT_EQ(up.position, Vec3::Zero());
  EXPECT_EQ(up.velocity, Vec3::Zero());
  EXPECT_TRUE(so3::equal_up_to_sign(up.attitude, Quaternion::Identity(), 1e-15));
  const QuadState inv = reset_distribution(rng, -1, InitialSpread::none());
  EXPECT_LT((so3::hopf_project(inv.attitude) + Vec3::UnitZ()).norm(), 1e-15);
}

TEST(Ppo, EnvironmentDrawsWithinRandomization) {
  SimConfig sim;
  QuadEnv env(sim, Transition::NTI, RewardWeights::nti(), 27);
  for (int k = 0; k < 20; ++k) {
    env.reset();
    EXPECT_TRUE(within_randomization(env.plant(), sim.actuator, sim.randomization));
  }
  ActuatorParams bad = sim.actuator;
  bad.transient.alpha_pos *= 2.0;
  EXPECT_FALSE(within_randomization(bad, sim.actuator, sim.randomization));
  EXPECT_EQ(env.steps_per_episode(3.0), 150);
}

TEST(Ppo, EnvironmentIsDeterministic) {
  SimConfig sim;
  QuadEnv a(sim, Transition::ITN, RewardWeights::itn(), 28), b(sim, Transition::ITN, RewardWeights::itn(), 28);
  const Observation oa = a.reset(), ob = b.reset();
  EXPECT_EQ(oa, ob);
  for (int k = 0; k < 20; ++k) {
    const RawAction act(0.1, -0.2, 0.0, 1.0);
    EXPECT_EQ(a.step(act), b.step(act));
  }
  EXPECT_EQ(a.observation(), b.observation());
}

PpoConfig tiny_config() {
  PpoConfig cfg;
  cfg.num_envs = 4;
  cfg.epochs = 3;
  cfg.episode_length = 0.2;
  cfg.minibatches = 2;
  cfg.update_epochs = 2;
  cfg.hidden = {16, 16};
  cfg.seed = 5;
  cfg.checkpoint_every = 2;
  return cfg;
}

TEST(Ppo, TrainingIsReproducibleAndWritesArtifacts) {
  SimConfig sim;
  const std::string dir = ::testing::TempDir() + "ppo_run";
  std::filesystem::remove_all(dir);
  const TrainResult a = train(sim, tiny_config(), dir);
  const TrainResult b = train(sim, tiny_config());
  EXPECT_EQ(a.policy.mean.flat(), b.policy.mean.flat());
  ASSERT_EQ(a.curve.size(), 3u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].mean_cost, b.curve[i].mean_cost);
  for (const char* f : {"policy.bin", "policy.bin.json", "best.bin", "value.bin", "training_curve.csv",
                        "checkpoints/epoch_0002.bin"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / f)) << f;
  EXPECT_EQ(load_policy(dir + "/policy.bin").mean.flat(), a.policy.mean.flat());
}

TEST(Ppo, ConfigValidation) {
  SimConfig sim;
  PpoConfig cfg = tiny_config();
  cfg.episode_length = 0.203;
  EXPECT_THROW(cfg.validate(sim), std::invalid_argument);
  cfg = tiny_config();
  cfg.clip = 0.0;
  EXPECT_THROW(cfg.validate(sim), std::invalid_argument);
}

}  // namespace
