#pragma once

// PPO training of posture-transition policies: cost function, batched
// environments, GAE, clipped-surrogate updates with Adam, and the training
// loop with checkpoints and a training curve.

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flipquad/flight_stack.hpp"
#include "flipquad/policy.hpp"

namespace flipquad {

struct RewardWeights {
  double position = 5.0;      ///< w_r
  double velocity = 0.005;    ///< w_ṙ
  double gravity = 3.0;       ///< w_gb
  double rates = 0.2;         ///< w_ω
  double posture = 0.1;       ///< w_η
  double action_rate = 0.2;   ///< w_Δa

  static RewardWeights nti();
  static RewardWeights itn();
  static RewardWeights for_transition(Transition t);
  void validate() const;
};

/// Huber loss of ‖v‖: ½‖v‖² below δ, δ(‖v‖ - δ/2) above.
double huber(const Vec3& v, double delta = 1.0);

/// State magnitudes are clipped to these before entering the cost.
struct CostClip {
  double position = 5.0;   ///< m, per axis
  double velocity = 20.0;  ///< m/s, per axis
  double rates = 50.0;     ///< rad/s, per axis
};

/// C = w_r‖r‖₁ + w_ṙ L_H(ṙ) + w_gb‖g_b - g_bd‖ + w_ω L_H(ω) + w_η(1 - η²) + w_Δa‖r_δκ - r_δκ,prev‖.
double step_cost(const QuadState& x, const PolicyAction& a, const PolicyAction& a_prev, const RewardWeights& w,
                 const Vec3& g_bd, double huber_delta = 1.0, const CostClip& clip = {});

inline double step_reward(const QuadState& x, const PolicyAction& a, const PolicyAction& a_prev,
                          const RewardWeights& w, const Vec3& g_bd) {
  return -step_cost(x, a, a_prev, w, g_bd);
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// `values` has one more entry than `rewards` (the bootstrap value). A true
/// entry in `terminal` stops bootstrapping after that step.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma, double lambda,
              const std::vector<bool>& terminal = {});

/// min(r A, clip(r, 1-ε, 1+ε) A) and its derivative with respect to r.
double clipped_surrogate(double ratio, double advantage, double clip);
double clipped_surrogate_grad(double ratio, double advantage, double clip);

struct PolicyLoss {
  double loss = 0.0;             ///< -mean surrogate - c_e entropy
  Eigen::MatrixXd grad_mean;     ///< dL/dμ, kActDim x B
  RawAction grad_log_std = RawAction::Zero();
  double clip_fraction = 0.0;
  double approx_kl = 0.0;        ///< mean((r - 1) - log r)
  double entropy = 0.0;
};

/// Clipped-surrogate loss with entropy bonus over one minibatch.
PolicyLoss policy_loss(const Eigen::MatrixXd& mean, const RawAction& log_std, const Eigen::MatrixXd& actions,
                       const Eigen::VectorXd& logp_old, const Eigen::VectorXd& advantages, double clip,
                       double entropy_coef);

/// Entropy of the diagonal Gaussian.
double gaussian_entropy(const RawAction& log_std);

struct PpoConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int update_epochs = 4;
  int minibatches = 20;
  int num_envs = 2048;
  int epochs = 750;
  double episode_length = 3.0;  ///< s
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool normalize_advantages = true;
  double reward_scale = 0.1;  ///< rewards are multiplied by this before GAE
  std::vector<int> hidden = kDefaultHidden;
  double init_log_std = -1.3862943611198906;  ///< log 0.25
  std::uint64_t seed = 0;
  int checkpoint_every = 50;  ///< epochs, 0 disables periodic checkpoints
  Transition transition = Transition::NTI;
  RewardWeights weights = RewardWeights::nti();

  void validate(const SimConfig& sim) const;
};

/// Single-vehicle training environment. Actuator parameters are redrawn on
/// every reset.
class QuadEnv {
 public:
  QuadEnv(const SimConfig& sim, Transition transition, const RewardWeights& weights, std::uint64_t seed);

  Observation reset();
  /// Applies `raw` for one policy step; returns the step cost.
  double step(const RawAction& raw);
  Observation observation() const;

  const QuadState& state() const { return stack_.state(); }
  const ActuatorParams& plant() const { return stack_.plant(); }
  int steps_per_episode(double episode_length) const;

 private:
  SimConfig sim_;
  Transition transition_;
  RewardWeights weights_;
  std::mt19937_64 rng_;
  FlightStack stack_;
  ConstantReference ref_;
  ActionHistory history_;
  DelayLine delay_;
  PolicyAction prev_;
  int substeps_;
};

/// True when every randomized field of `p` lies in `ranges` around `nominal`.
bool within_randomization(const ActuatorParams& p, const ActuatorParams& nominal, const RandomizationRanges& ranges);

/// Adam moments for one network plus the log std vector.
template <typename Scalar>
struct AdamState {
  Mlp<Scalar> m, v;
  RawAction m_log_std = RawAction::Zero(), v_log_std = RawAction::Zero();
  long t = 0;
};

struct PpoBatch {
  Eigen::MatrixXf observations;  ///< kObsDim x N
  Eigen::MatrixXd actions;       ///< kActDim x N (unclamped samples)
  Eigen::VectorXd log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PpoLearner {
  GaussianPolicy<float> policy;
  Mlp<float> value;
  AdamState<float> policy_opt;
  AdamState<float> value_opt;

  static PpoLearner make(const PpoConfig& cfg, std::mt19937_64& rng);
};

/// update_epochs passes of `minibatches` shuffled minibatches.
PpoDiagnostics ppo_update(PpoLearner& learner, const PpoBatch& batch, const PpoConfig& cfg, std::mt19937_64& rng);

struct EpochLog {
  int epoch = 0;
  double mean_cost = 0.0;  ///< mean undiscounted episode cost over environments
  PpoDiagnostics diag;
};

struct TrainResult {
  GaussianPolicy<float> policy;  ///< final weights
  GaussianPolicy<float> best;    ///< weights of the epoch with the lowest mean cost
  std::vector<EpochLog> curve;
};

/// Full training run. When `out_dir` is non-empty it receives policy.bin,
/// best.bin, value.bin, checkpoints/ and training_curve.csv. `progress` is
/// called after every epoch.
TrainResult train(const SimConfig& sim, const PpoConfig& cfg, const std::string& out_dir = "",
                  const std::function<void(const EpochLog&)>& progress = {});

void write_training_curve(const std::vector<EpochLog>& curve, const std::string& path);

}  // namespace flipquad
