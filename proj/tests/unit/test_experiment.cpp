#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "flipquad/experiment.hpp"

using namespace flipquad;
namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

MetricsReport synthetic_report(Method m, std::vector<double> rmse, std::vector<std::optional<double>> settle) {
  MetricsReport r;
  r.method = m;
  r.duration = 3.0;
  for (std::size_t i = 0; i < rmse.size(); ++i) {
    RolloutMetrics rm;
    rm.index = static_cast<int>(i);
    rm.position.rmse = rmse[i];
    rm.position.samples = 100;
    rm.position.sum_squared = rmse[i] * rmse[i] * 100;
    rm.position.max_deviation = Vec3::Constant(rmse[i]);
    rm.settling = settle[i];
    r.rollouts.push_back(rm);
  }
  return r;
}

TEST(Experiment, Aggregation) {
  const MetricsReport r = synthetic_report(Method::StepHfca, {0.1, 0.3}, {1.0, std::nullopt});
  EXPECT_NEAR(r.pooled_rmse(), std::sqrt((0.01 + 0.09) / 2), 1e-15);
  EXPECT_NEAR(r.mean_rmse(), 0.2, 1e-15);
  EXPECT_NEAR(r.mean_settling(), 2.0, 1e-15);
  EXPECT_EQ(r.settled_count(), 1);
  EXPECT_NEAR(r.mean_max_deviation().x(), 0.2, 1e-15);
}

TEST(Experiment, CompareMarksBestAndSecond) {
  std::vector<MetricsReport> reps{synthetic_report(Method::StepHfca, {0.69}, {0.6}),
                                  synthetic_report(Method::StepHfcaOca, {0.52}, {0.6}),
                                  synthetic_report(Method::MinSnapHfcaOca, {0.31}, {1.4}),
                                  synthetic_report(Method::PolicyHfcaOca, {0.1492}, {0.9})};
  const ComparisonTable t = compare(reps);
  EXPECT_EQ(t.rows[3].ranks[0], Rank::Best);
  EXPECT_EQ(t.rows[2].ranks[0], Rank::Second);
  EXPECT_EQ(t.rows[0].ranks[0], Rank::None);
  // tie on settling: both step rows best, policy second
  EXPECT_EQ(t.rows[0].ranks[1], Rank::Best);
  EXPECT_EQ(t.rows[1].ranks[1], Rank::Best);
  EXPECT_EQ(t.rows[3].ranks[1], Rank::Second);
  EXPECT_EQ(t.rows[2].ranks[1], Rank::None);
}

TEST(Experiment, CompareTiesAfterRounding) {
  std::vector<MetricsReport> reps{synthetic_report(Method::StepHfca, {0.123401}, {0.5}),
                                  synthetic_report(Method::StepHfcaOca, {0.123399}, {0.6})};
  const ComparisonTable t = compare(reps);
  EXPECT_EQ(t.rows[0].ranks[0], Rank::Best);
  EXPECT_EQ(t.rows[1].ranks[0], Rank::Best);
}

TEST(Experiment, CompareRejectsMixedTransitions) {
  MetricsReport a = synthetic_report(Method::StepHfca, {0.1}, {0.5});
  MetricsReport b = a;
  b.transition = Transition::ITN;
  EXPECT_THROW(compare({a, b}), std::invalid_argument);
  EXPECT_THROW(compare({a}), std::invalid_argument);
}

TEST(Experiment, RunIsPureFunctionOfSeed) {
  SimConfig sim;
  ExperimentConfig ec;
  ec.n = 2;
  ec.seed = 3;
  ec.duration = 0.5;
  const MetricsReport a = run_experiment(sim, ec), b = run_experiment(sim, ec);
  ASSERT_EQ(a.rollouts.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.rollouts[i].position.rmse, b.rollouts[i].position.rmse);
    EXPECT_EQ(a.rollouts[i].settling, b.rollouts[i].settling);
  }
  ec.seed = 4;
  EXPECT_NE(run_experiment(sim, ec).rollouts[0].position.rmse, a.rollouts[0].position.rmse);
}

TEST(Experiment, ReportCsvLayout) {
  const MetricsReport r = synthetic_report(Method::StepHfcaOca, {0.1, 0.2}, {0.5, std::nullopt});
  const std::string path = ::testing::TempDir() + "report.csv";
  write_report_csv(r, path);
  const std::string s = slurp(path);
  EXPECT_EQ(s.rfind("method,transition,rollout,rmse,dx,dy,dz,settling_time,settled\n", 0), 0u);
  EXPECT_NE(s.find("step+hfca+oca,NTI,1,0.200000,0.200000,0.200000,0.200000,,0\n"), std::string::npos);
  EXPECT_NE(s.find("step+hfca+oca,NTI,pooled,"), std::string::npos);
  EXPECT_NE(s.find("step+hfca+oca,NTI,mean,"), std::string::npos);
}

TEST(Experiment, ZeroSpreadSingleRolloutIsDeterministic) {
  SimConfig sim;
  ExperimentConfig ec;
  ec.n = 1;
  ec.zero_spread = true;
  ec.duration = 0.3;
  ec.seed = 1;
  const MetricsReport a = run_experiment(sim, ec);
  ec.seed = 2;
  const MetricsReport b = run_experiment(sim, ec);
  EXPECT_EQ(a.rollouts[0].position.rmse, b.rollouts[0].position.rmse);
}

TEST(Experiment, PolicyMethodNeedsWeights) {
  SimConfig sim;
  ExperimentConfig ec;
  ec.method = Method::PolicyHfcaOca;
  ec.n = 1;
  EXPECT_THROW(run_experiment(sim, ec), std::invalid_argument);
  ec.n = 0;
  EXPECT_THROW(ec.validate(), std::invalid_argument);
}

TEST(Experiment, TraceCsvHasHeaderAndRows) {
  SimConfig sim;
  ExperimentConfig ec;
  ec.duration = 0.01;
  auto rng = rollout_rng(0, 0);
  const Trace t = simulate_rollout(sim, ec, rng);
  EXPECT_EQ(t.samples.size(), 11u);
  const std::string path = ::testing::TempDir() + "trace.csv";
  write_trace_csv(t, path);
  const std::string s = slurp(path);
  EXPECT_EQ(s.rfind("t,x,y,z,", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 12);
}

}  // namespace
