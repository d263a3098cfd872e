#pragma once

// Policy runtime: observation layout, action interpretation, action history,
// a small dense MLP with manual backprop, and the inference-delay line.

#include <array>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flipquad/dynamics.hpp"

namespace flipquad {

inline constexpr int kObsDim = 30;
inline constexpr int kActDim = 4;
inline constexpr int kHistoryLength = 3;

using Observation = Eigen::Matrix<double, kObsDim, 1>;
using RawAction = Eigen::Vector4d;

/// Observation entries are value / scale. Powers of two keep decoding exact.
struct ObservationScales {
  double position = 1.0;  ///< m
  double velocity = 2.0;  ///< m/s
  double rates = 8.0;     ///< rad/s
  double action = 1.0;

  void validate() const;
};

struct PolicyAction {
  Vec3 modulation = Vec3::Zero();  ///< r_δκ, m
  double eta_raw = 0.0;            ///< continuous posture channel in [-1, 1]

  /// sign(η_raw), with 0 mapped to +1.
  int posture() const { return eta_raw >= 0.0 ? 1 : -1; }
};

/// Clamp every channel to [-1, 1]; channels 0-2 scale to ±limit metres.
PolicyAction interpret_action(const RawAction& raw, double limit);

/// Inverse of interpret_action on clamped inputs.
RawAction to_raw(const PolicyAction& a, double limit);

/// FIFO of the last three raw actions, newest first, zero-padded.
class ActionHistory {
 public:
  void clear();
  void push(const RawAction& a);
  const RawAction& operator[](int i) const { return items_[static_cast<std::size_t>(i)]; }
  Eigen::Matrix<double, kHistoryLength * kActDim, 1> flattened() const;

 private:
  std::array<RawAction, kHistoryLength> items_{RawAction::Zero(), RawAction::Zero(), RawAction::Zero()};
};

/// Layout: r (3), v (3), row-major R (9), ω (3), history newest first (12).
Observation build_observation(const QuadState& x, const ActionHistory& hist, const ObservationScales& scales);

struct DecodedObservation {
  Vec3 position;
  Vec3 velocity;
  Mat3 rotation;
  Vec3 body_rates;
  std::array<RawAction, kHistoryLength> history;
};

DecodedObservation decode_observation(const Observation& obs, const ObservationScales& scales);

/// Dense network with tanh hidden layers. The output layer is linear, or tanh
/// when `squash_output` is set. Batches are stored one sample per column.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix w;  ///< out x in
    Vector b;
  };

  /// Post-activation values of every layer; act[0] is the input.
  struct Cache {
    std::vector<Matrix> act;
  };

  Mlp() = default;
  Mlp(const std::vector<int>& widths, bool squash_output);

  /// Orthogonal initialization: hidden gain √2, output gain `output_gain`,
  /// zero biases.
  void init(std::mt19937_64& rng, Scalar output_gain);

  /// Same shapes, all zeros.
  Mlp zeros_like() const;

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Cache& cache) const;

  /// Accumulates dL/dθ into `grads` given dL/d(output) for the cached batch.
  /// Returns dL/d(input).
  Matrix backward(const Cache& cache, const Matrix& grad_out, Mlp& grads) const;

  std::vector<int> widths() const;
  bool squash_output() const { return squash_; }
  int input_dim() const;
  int output_dim() const;
  Eigen::Index num_params() const;
  Vector flat() const;
  void set_flat(const Vector& v);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(widths(), squash_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.layers()[i].w = layers_[i].w.template cast<Other>();
      out.layers()[i].b = layers_[i].b.template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<Layer> layers_;
  bool squash_ = false;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

/// Gaussian policy with tanh-squashed mean and state-independent log std.
template <typename Scalar>
struct GaussianPolicy {
  Mlp<Scalar> mean;
  Eigen::Matrix<Scalar, kActDim, 1> log_std = Eigen::Matrix<Scalar, kActDim, 1>::Constant(Scalar(std::log(0.25)));

  static GaussianPolicy make(const std::vector<int>& hidden, std::mt19937_64& rng, double init_log_std = std::log(0.25));
};

/// Default hidden widths.
inline const std::vector<int> kDefaultHidden{512, 512};

/// log N(a; μ, σ) summed over action channels.
double gaussian_log_prob(const RawAction& a, const RawAction& mean, const RawAction& log_std);

/// Writes `<path>` (float32 little-endian) and `<path>.json` (shapes).
void save_policy(const GaussianPolicy<float>& p, const std::string& path, const ObservationScales& scales = {});
GaussianPolicy<float> load_policy(const std::string& path);

/// Same format for a plain network (value function checkpoints).
void save_mlp(const Mlp<float>& net, const std::string& path);
Mlp<float> load_mlp(const std::string& path);

/// Zero-order hold with a fixed delay in dynamics steps.
class DelayLine {
 public:
  explicit DelayLine(int steps = 0, const RawAction& initial = RawAction::Zero());
  void reset(const RawAction& initial = RawAction::Zero());
  /// Feed the value computed this step; returns the value in effect.
  RawAction push(const RawAction& v);
  int steps() const { return steps_; }

 private:
  int steps_;
  std::deque<RawAction> queue_;
};

/// Delay in whole dynamics steps; throws unless delay is a multiple of dt.
int delay_steps(double delay, double dt);

/// Applies a DelayLine to a whole sequence.
std::vector<RawAction> delayed_apply(const std::vector<RawAction>& stream, int steps);

}  // namespace flipquad
