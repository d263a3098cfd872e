#pragma once

// Randomized rollout harness, reports and method comparison tables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flipquad/flight_stack.hpp"
#include "flipquad/metrics.hpp"
#include "flipquad/trace.hpp"

namespace flipquad {

struct ExperimentConfig {
  Method method = Method::StepHfcaOca;
  Transition transition = Transition::NTI;
  int n = 20;
  std::uint64_t seed = 0;
  double duration = 3.0;     ///< s
  double cone_deg = 10.0;
  bool zero_spread = false;  ///< start every rollout from ideal hover
  bool randomize_actuators = false;
  std::string policy_path;   ///< required for Method::PolicyHfcaOca

  void validate() const;
};

struct RolloutMetrics {
  int index = 0;
  PositionMetrics position;
  std::optional<double> settling;
};

struct MetricsReport {
  Method method = Method::StepHfcaOca;
  Transition transition = Transition::NTI;
  double duration = 0.0;
  std::vector<RolloutMetrics> rollouts;

  double pooled_rmse() const;
  double mean_rmse() const;
  /// Mean of the per-rollout maxima.
  Vec3 mean_max_deviation() const;
  /// Mean settling time with unsettled rollouts counted as the duration.
  double mean_settling() const;
  int settled_count() const;
};

/// One rollout. `rng` supplies the initial state (and the actuator draw when
/// randomized). `policy` must be set for the policy method.
Trace simulate_rollout(const SimConfig& sim, const ExperimentConfig& cfg, std::mt19937_64& rng,
                       const GaussianPolicy<float>* policy = nullptr);

/// RNG of rollout `index` under `seed`.
std::mt19937_64 rollout_rng(std::uint64_t seed, int index);

RolloutMetrics rollout_metrics(const Trace& trace, Transition transition, double cone_deg, int index = 0);

/// n seeded rollouts. Loads cfg.policy_path when `policy` is null and the
/// method needs one. Traces are returned through `traces` when given.
MetricsReport run_experiment(const SimConfig& sim, const ExperimentConfig& cfg,
                             const GaussianPolicy<float>* policy = nullptr, std::vector<Trace>* traces = nullptr);

void write_report_csv(const MetricsReport& report, const std::string& path);
std::string report_text(const MetricsReport& report);

enum class Rank { None, Second, Best };

struct ComparisonRow {
  std::string method;
  std::string transition;
  std::vector<double> values;  ///< pooled RMSE, settling, δx, δy, δz
  std::vector<Rank> ranks;
};

struct ComparisonTable {
  std::vector<std::string> metrics{"rmse", "settling", "dx", "dy", "dz"};
  std::vector<ComparisonRow> rows;
};

/// Lower is better in every column. Equal values share a rank, so a tie for
/// the minimum marks every tied row best and the next value second.
ComparisonTable compare(const std::vector<MetricsReport>& reports);

/// Same ranking over raw rows (values already filled in).
void rank_rows(ComparisonTable& table);

void write_comparison_csv(const ComparisonTable& table, const std::string& path);
std::string comparison_text(const ComparisonTable& table);

}  // namespace flipquad
