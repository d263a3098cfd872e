#include "flipquad/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

namespace flipquad {

RewardWeights RewardWeights::nti() { return RewardWeights{}; }

RewardWeights RewardWeights::itn() {
  RewardWeights w;
  w.velocity = 0.0;
  w.rates = 0.75;
  w.action_rate = 0.25;
  return w;
}

RewardWeights RewardWeights::for_transition(Transition t) { return t == Transition::NTI ? nti() : itn(); }

void RewardWeights::validate() const {
  for (double v : {position, velocity, gravity, rates, posture, action_rate})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("reward weights must be finite and >= 0");
}

double huber(const Vec3& v, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("huber: delta must be positive");
  const double n = v.norm();
  return n <= delta ? 0.5 * n * n : delta * (n - 0.5 * delta);
}

double step_cost(const QuadState& x, const PolicyAction& a, const PolicyAction& a_prev, const RewardWeights& w,
                 const Vec3& g_bd, double huber_delta, const CostClip& clip) {
  const Vec3 r = x.position.cwiseMax(-clip.position).cwiseMin(clip.position);
  const Vec3 v = x.velocity.cwiseMax(-clip.velocity).cwiseMin(clip.velocity);
  const Vec3 om = x.body_rates.cwiseMax(-clip.rates).cwiseMin(clip.rates);
  const double eta = std::clamp(a.eta_raw, -1.0, 1.0);
  return w.position * r.lpNorm<1>() + w.velocity * huber(v, huber_delta) +
         w.gravity * (body_gravity(x.attitude) - g_bd).norm() + w.rates * huber(om, huber_delta) +
         w.posture * (1.0 - eta * eta) + w.action_rate * (a.modulation - a_prev.modulation).norm();
}

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma, double lambda,
              const std::vector<bool>& terminal) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1) throw std::invalid_argument("gae: values needs one bootstrap entry");
  if (!terminal.empty() && terminal.size() != n) throw std::invalid_argument("gae: terminal flags misaligned");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = (!terminal.empty() && terminal[k]) ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * live * values[k + 1] - values[k];
    acc = delta + gamma * lambda * live * acc;
    out.advantages[k] = acc;
    out.returns[k] = acc + values[k];
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double rc = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, rc * advantage);
}

double clipped_surrogate_grad(double ratio, double advantage, double clip) {
  const double rc = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return ratio * advantage <= rc * advantage ? advantage : 0.0;
}

double gaussian_entropy(const RawAction& log_std) {
  return log_std.sum() + 0.5 * kActDim * (1.0 + std::log(2.0 * std::numbers::pi));
}

PolicyLoss policy_loss(const Eigen::MatrixXd& mean, const RawAction& log_std, const Eigen::MatrixXd& actions,
                       const Eigen::VectorXd& logp_old, const Eigen::VectorXd& advantages, double clip,
                       double entropy_coef) {
  const Eigen::Index b = mean.cols();
  const RawAction inv_var = (-2.0 * log_std).array().exp();
  PolicyLoss out;
  out.grad_mean = Eigen::MatrixXd::Zero(kActDim, b);
  double surrogate = 0.0, clipped = 0.0, kl = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const RawAction d = actions.col(i) - mean.col(i);
    const double logp = gaussian_log_prob(actions.col(i), mean.col(i), log_std);
    const double ratio = std::exp(logp - logp_old[i]);
    const double adv = advantages[i];
    surrogate += clipped_surrogate(ratio, adv, clip);
    if (std::abs(ratio - 1.0) > clip) clipped += 1.0;
    kl += (ratio - 1.0) - (logp - logp_old[i]);
    // dL/dlogp for L = -mean(surrogate)
    const double g = -clipped_surrogate_grad(ratio, adv, clip) * ratio / static_cast<double>(b);
    out.grad_mean.col(i) = g * d.cwiseProduct(inv_var);
    out.grad_log_std += g * (d.array().square() * inv_var.array() - 1.0).matrix();
  }
  out.entropy = gaussian_entropy(log_std);
  out.grad_log_std -= entropy_coef * RawAction::Ones();
  const double nb = static_cast<double>(b);
  out.loss = -surrogate / nb - entropy_coef * out.entropy;
  out.clip_fraction = clipped / nb;
  out.approx_kl = kl / nb;
  return out;
}

void PpoConfig::validate(const SimConfig& sim) const {
  if (!(learning_rate > 0.0) || !(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda >= 0.0 && gae_lambda <= 1.0) ||
      !(clip > 0.0) || !(entropy_coef >= 0.0) || !(value_coef > 0.0) || update_epochs < 1 || minibatches < 1 ||
      num_envs < 1 || epochs < 1 || !(episode_length > 0.0) || !(max_grad_norm > 0.0) || !(reward_scale > 0.0))
    throw std::invalid_argument("invalid PPO configuration");
  if (hidden.empty()) throw std::invalid_argument("PPO: at least one hidden layer required");
  weights.validate();
  delay_steps(episode_length, sim.dt_env);
  sim.validate();
}

// ---------------------------------------------------------------- environment

bool within_randomization(const ActuatorParams& p, const ActuatorParams& nominal, const RandomizationRanges& r) {
  auto in = [](double v, const Range& range) { return v >= range.lo && v <= range.hi; };
  auto scale_ok = [&](double value, double nom, const Range& range) {
    if (nom == 0.0) return value == 0.0;
    const double s = value / nom;
    return s >= range.lo * (1.0 - 1e-12) && s <= range.hi * (1.0 + 1e-12);
  };
  if (!scale_ok(p.transient.alpha_pos, nominal.transient.alpha_pos, r.alpha_scale)) return false;
  if (!scale_ok(p.transient.alpha_neg, nominal.transient.alpha_neg, r.alpha_scale)) return false;
  if (!in(p.transient.omega_switch, r.omega_switch) || !in(p.transient.dead_zone, r.dead_zone)) return false;
  for (std::size_t i = 0; i < p.steady.rotors.size(); ++i)
    for (const Regime g : {Regime::Positive, Regime::Negative}) {
      const auto& c = p.steady.rotors[i].of(g);
      const auto& n = nominal.steady.rotors[i].of(g);
      if (!scale_ok(c.c2, n.c2, r.thrust_coeff_scale) || !scale_ok(c.c1, n.c1, r.thrust_coeff_scale) ||
          !scale_ok(c.c0, n.c0, r.thrust_coeff_scale))
        return false;
    }
  return true;
}

QuadEnv::QuadEnv(const SimConfig& sim, Transition transition, const RewardWeights& weights, std::uint64_t seed)
    : sim_(sim), transition_(transition), weights_(weights), rng_(seed), stack_(sim, true),
      ref_(Vec3::Zero(), 0.0, initial_posture(transition)), delay_(delay_steps(sim.policy_delay, sim.dt)),
      substeps_(sim.substeps()) {}

Observation QuadEnv::reset() {
  const int eta0 = initial_posture(transition_);
  const QuadState x0 = reset_distribution(rng_, eta0, sim_.spread);
  const ActuatorParams plant = sample_params(rng_, sim_.actuator, sim_.randomization);
  if (!within_randomization(plant, sim_.actuator, sim_.randomization))
    throw std::logic_error("actuator draw outside the randomization ranges");
  stack_.reset(x0, plant, eta0);
  history_.clear();
  delay_.reset();
  prev_ = PolicyAction{};
  return observation();
}

Observation QuadEnv::observation() const { return build_observation(stack_.state(), history_, sim_.scales); }

int QuadEnv::steps_per_episode(double episode_length) const { return delay_steps(episode_length, sim_.dt_env); }

double QuadEnv::step(const RawAction& raw) {
  const RawAction clamped = raw.cwiseMax(-1.0).cwiseMin(1.0);
  const PolicyAction a = interpret_action(clamped, sim_.action_limit);
  double penalty = 0.0;
  try {
    for (int k = 0; k < substeps_; ++k) {
      const PolicyAction applied = interpret_action(delay_.push(clamped), sim_.action_limit);
      FlatReference r = ref_.sample(stack_.time());
      r.posture = applied.posture();
      stack_.tick(r, applied.modulation);
    }
  } catch (const SimulationFault&) {
    // restart the vehicle; the step is charged at the clipped worst case
    stack_.reset(reset_distribution(rng_, initial_posture(transition_), sim_.spread), stack_.plant(),
                 initial_posture(transition_));
    penalty = 100.0;
  }
  history_.push(clamped);
  const double c = step_cost(stack_.state(), a, prev_, weights_, target_body_gravity(transition_)) + penalty;
  prev_ = a;
  return c;
}

// ---------------------------------------------------------------- optimization

template <typename Scalar>
static void adam_apply(Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> p,
                       const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& g,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& v, const PpoConfig& cfg, double scale,
                       double bc1, double bc2) {
  const auto b1 = static_cast<Scalar>(cfg.adam_beta1), b2 = static_cast<Scalar>(cfg.adam_beta2);
  const auto s = static_cast<Scalar>(scale);
  m = b1 * m + (Scalar(1) - b1) * s * g;
  v = (b2 * v.array() + (Scalar(1) - b2) * (s * g.array()).square()).matrix();
  const auto lr = static_cast<Scalar>(cfg.learning_rate / bc1);
  const auto eps = static_cast<Scalar>(cfg.adam_eps);
  const auto denom = (v.array() / static_cast<Scalar>(bc2)).sqrt() + eps;
  p.array() -= lr * m.array() / denom;
}

namespace {

template <typename Scalar>
double squared_norm(const Mlp<Scalar>& g) {
  double s = 0.0;
  for (const auto& l : g.layers()) s += static_cast<double>(l.w.squaredNorm()) + static_cast<double>(l.b.squaredNorm());
  return s;
}

template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const Mlp<Scalar>& grads, AdamState<Scalar>& st, const PpoConfig& cfg, double scale,
               double bc1, double bc2) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& p = net.layers()[i];
    const auto& g = grads.layers()[i];
    auto& m = st.m.layers()[i];
    auto& v = st.v.layers()[i];
    adam_apply<Scalar>(p.w, g.w, m.w, v.w, cfg, scale, bc1, bc2);
    M pb = p.b, gb = g.b, mb = m.b, vb = v.b;
    adam_apply<Scalar>(pb, gb, mb, vb, cfg, scale, bc1, bc2);
    p.b = pb;
    m.b = mb;
    v.b = vb;
  }
}

}  // namespace

PpoLearner PpoLearner::make(const PpoConfig& cfg, std::mt19937_64& rng) {
  PpoLearner l;
  l.policy = GaussianPolicy<float>::make(cfg.hidden, rng, cfg.init_log_std);
  std::vector<int> widths{kObsDim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  l.value = Mlp<float>(widths, false);
  l.value.init(rng, 1.0f);
  l.policy_opt.m = l.policy.mean.zeros_like();
  l.policy_opt.v = l.policy.mean.zeros_like();
  l.value_opt.m = l.value.zeros_like();
  l.value_opt.v = l.value.zeros_like();
  return l;
}

PpoDiagnostics ppo_update(PpoLearner& learner, const PpoBatch& batch, const PpoConfig& cfg, std::mt19937_64& rng) {
  const Eigen::Index n = batch.observations.cols();
  if (batch.actions.cols() != n || batch.log_probs.size() != n || batch.advantages.size() != n ||
      batch.returns.size() != n)
    throw std::invalid_argument("ppo_update: misaligned batch");
  const Eigen::Index mb = std::max<Eigen::Index>(1, n / cfg.minibatches);

  Eigen::VectorXd adv = batch.advantages;
  if (cfg.normalize_advantages && n > 1) {
    const double mu = adv.mean();
    const double sd = std::sqrt((adv.array() - mu).square().sum() / static_cast<double>(n - 1));
    adv = (adv.array() - mu) / (sd + 1e-8);
  }

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});

  PpoDiagnostics diag;
  int updates = 0;
  Mlp<float>::Cache pc, vc;
  for (int e = 0; e < cfg.update_epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < cfg.minibatches; ++k) {
      const Eigen::Index start = k * mb;
      const Eigen::Index len = k + 1 == cfg.minibatches ? n - start : mb;
      if (len <= 0) continue;
      Eigen::MatrixXf obs(kObsDim, len);
      Eigen::MatrixXd act(kActDim, len);
      Eigen::VectorXd lp(len), a(len), ret(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const Eigen::Index s = idx[static_cast<std::size_t>(start + j)];
        obs.col(j) = batch.observations.col(s);
        act.col(j) = batch.actions.col(s);
        lp[j] = batch.log_probs[s];
        a[j] = adv[s];
        ret[j] = batch.returns[s];
      }

      const Eigen::MatrixXf mean = learner.policy.mean.forward(obs, pc);
      const RawAction log_std = learner.policy.log_std.cast<double>();
      const PolicyLoss pl = policy_loss(mean.cast<double>(), log_std, act, lp, a, cfg.clip, cfg.entropy_coef);

      const Eigen::MatrixXf v = learner.value.forward(obs, vc);
      const Eigen::VectorXd err = v.row(0).transpose().cast<double>() - ret;
      const double vloss = 0.5 * err.squaredNorm() / static_cast<double>(len);
      const double total = pl.loss + cfg.value_coef * vloss;
      if (!std::isfinite(total)) throw TrainingDiverged("non-finite PPO loss");

      Mlp<float> pg = learner.policy.mean.zeros_like();
      learner.policy.mean.backward(pc, pl.grad_mean.cast<float>(), pg);
      Mlp<float> vg = learner.value.zeros_like();
      const Eigen::MatrixXf dv = (cfg.value_coef * err / static_cast<double>(len)).transpose().cast<float>();
      learner.value.backward(vc, dv, vg);

      const double gnorm = std::sqrt(squared_norm(pg) + squared_norm(vg) + pl.grad_log_std.squaredNorm());
      if (!std::isfinite(gnorm)) throw TrainingDiverged("non-finite PPO gradient");
      const double scale = gnorm > cfg.max_grad_norm ? cfg.max_grad_norm / gnorm : 1.0;

      for (AdamState<float>* st : {&learner.policy_opt, &learner.value_opt}) ++st->t;
      const double t = static_cast<double>(learner.policy_opt.t);
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t), bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
      adam_step(learner.policy.mean, pg, learner.policy_opt, cfg, scale, bc1, bc2);
      adam_step(learner.value, vg, learner.value_opt, cfg, scale, bc1, bc2);
      {
        auto& st = learner.policy_opt;
        const RawAction g = scale * pl.grad_log_std;
        st.m_log_std = cfg.adam_beta1 * st.m_log_std + (1.0 - cfg.adam_beta1) * g;
        st.v_log_std = cfg.adam_beta2 * st.v_log_std + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
        const RawAction step = (cfg.learning_rate / bc1) * st.m_log_std.array() /
                               ((st.v_log_std.array() / bc2).sqrt() + cfg.adam_eps);
        learner.policy.log_std -= step.cast<float>();
      }

      diag.policy_loss += pl.loss;
      diag.value_loss += vloss;
      diag.entropy += pl.entropy;
      diag.clip_fraction += pl.clip_fraction;
      diag.approx_kl += pl.approx_kl;
      diag.grad_norm += gnorm;
      ++updates;
    }
  }
  if (updates > 0) {
    const double u = updates;
    diag.policy_loss /= u;
    diag.value_loss /= u;
    diag.entropy /= u;
    diag.clip_fraction /= u;
    diag.approx_kl /= u;
    diag.grad_norm /= u;
  }
  return diag;
}

// ---------------------------------------------------------------- training loop

void write_training_curve(const std::vector<EpochLog>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,mean_cost,clip_fraction,kl,policy_loss,value_loss,entropy,grad_norm\n";
  out.precision(8);
  for (const auto& e : curve)
    out << e.epoch << ',' << e.mean_cost << ',' << e.diag.clip_fraction << ',' << e.diag.approx_kl << ','
        << e.diag.policy_loss << ',' << e.diag.value_loss << ',' << e.diag.entropy << ',' << e.diag.grad_norm << '\n';
}

TrainResult train(const SimConfig& sim, const PpoConfig& cfg, const std::string& out_dir,
                  const std::function<void(const EpochLog&)>& progress) {
  cfg.validate(sim);
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(fs::path(out_dir) / "checkpoints");

  std::mt19937_64 master(cfg.seed);
  PpoLearner learner = PpoLearner::make(cfg, master);

  std::vector<QuadEnv> envs;
  envs.reserve(static_cast<std::size_t>(cfg.num_envs));
  for (int i = 0; i < cfg.num_envs; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i), 0x5eedu};
    std::mt19937_64 env_rng(seq);
    envs.emplace_back(sim, cfg.transition, cfg.weights, env_rng());
  }
  const int horizon = envs.front().steps_per_episode(cfg.episode_length);
  const Eigen::Index ne = cfg.num_envs;
  const Eigen::Index total = ne * horizon;
  std::normal_distribution<double> normal(0.0, 1.0);

  TrainResult result;
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::MatrixXf obs(kObsDim, ne);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    PpoBatch batch;
    batch.observations.resize(kObsDim, total);
    batch.actions.resize(kActDim, total);
    batch.log_probs.resize(total);
    Eigen::MatrixXd rewards(horizon, ne), values(horizon + 1, ne);

    for (Eigen::Index i = 0; i < ne; ++i) obs.col(i) = envs[static_cast<std::size_t>(i)].reset().cast<float>();
    const RawAction log_std = learner.policy.log_std.cast<double>();
    const RawAction std_dev = log_std.array().exp();
    double episode_cost = 0.0;

    for (int t = 0; t < horizon; ++t) {
      const Eigen::MatrixXf mean = learner.policy.mean.forward(obs);
      const Eigen::MatrixXf v = learner.value.forward(obs);
      batch.observations.middleCols(t * ne, ne) = obs;
      for (Eigen::Index i = 0; i < ne; ++i) {
        const RawAction mu = mean.col(i).cast<double>();
        RawAction a;
        for (int j = 0; j < kActDim; ++j) a[j] = mu[j] + std_dev[j] * normal(master);
        const Eigen::Index col = t * ne + i;
        batch.actions.col(col) = a;
        batch.log_probs[col] = gaussian_log_prob(a, mu, log_std);
        values(t, i) = v(0, i);
        auto& env = envs[static_cast<std::size_t>(i)];
        const double c = env.step(a);
        rewards(t, i) = -c * cfg.reward_scale;
        episode_cost += c;
        obs.col(i) = env.observation().cast<float>();
      }
    }
    values.row(horizon) = learner.value.forward(obs).row(0).cast<double>();

    batch.advantages.resize(total);
    batch.returns.resize(total);
    for (Eigen::Index i = 0; i < ne; ++i) {
      std::vector<double> r(static_cast<std::size_t>(horizon)), v(static_cast<std::size_t>(horizon + 1));
      for (int t = 0; t < horizon; ++t) r[static_cast<std::size_t>(t)] = rewards(t, i);
      for (int t = 0; t <= horizon; ++t) v[static_cast<std::size_t>(t)] = values(t, i);
      const GaeResult g = gae(r, v, cfg.gamma, cfg.gae_lambda);
      for (int t = 0; t < horizon; ++t) {
        batch.advantages[t * ne + i] = g.advantages[static_cast<std::size_t>(t)];
        batch.returns[t * ne + i] = g.returns[static_cast<std::size_t>(t)];
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_cost = episode_cost / static_cast<double>(ne);
    if (log.mean_cost < best_cost) {
      best_cost = log.mean_cost;
      result.best = learner.policy;
    }

    try {
      log.diag = ppo_update(learner, batch, cfg, master);
    } catch (const TrainingDiverged& e) {
      if (!out_dir.empty()) write_training_curve(result.curve, (fs::path(out_dir) / "training_curve.csv").string());
      throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    }
    result.curve.push_back(log);
    if (progress) progress(log);

    if (!out_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.bin", epoch);
      save_policy(learner.policy, (fs::path(out_dir) / "checkpoints" / name).string(), sim.scales);
    }
  }

  result.policy = learner.policy;
  if (!out_dir.empty()) {
    const fs::path d(out_dir);
    save_policy(result.policy, (d / "policy.bin").string(), sim.scales);
    save_policy(result.best, (d / "best.bin").string(), sim.scales);
    save_mlp(learner.value, (d / "value.bin").string());
    write_training_curve(result.curve, (d / "training_curve.csv").string());
  }
  return result;
}

}  // namespace flipquad
