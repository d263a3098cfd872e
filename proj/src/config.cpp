#include "flipquad/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

namespace flipquad {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string("config section '") + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(std::string("unknown key '") + k + "' in config section '" + section + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec3(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (a.is_number()) {
    out.setConstant(a.get<double>());
    return;
  }
  if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("'") + key + "' must be a number or 3 numbers");
  for (int i = 0; i < 3; ++i) out[i] = a[static_cast<std::size_t>(i)].get<double>();
}

void read_range(const json& j, const char* key, Range& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw ConfigError(std::string("'") + key + "' must be [lo, hi]");
  out = {a[0].get<double>(), a[1].get<double>()};
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void read_regime(const json& j, RegimeCoeffs& c) {
  check_keys(j, "actuator regime", {"c2", "c1", "c0", "moment_scale"});
  read(j, "c2", c.c2);
  read(j, "c1", c.c1);
  read(j, "c0", c.c0);
  read(j, "moment_scale", c.moment_scale);
}

json regime_json(const RegimeCoeffs& c) {
  return {{"c2", c.c2}, {"c1", c.c1}, {"c0", c.c0}, {"moment_scale", c.moment_scale}};
}

void read_weights(const json& j, RewardWeights& w) {
  check_keys(j, "reward_weights", {"position", "velocity", "gravity", "rates", "posture", "action_rate"});
  read(j, "position", w.position);
  read(j, "velocity", w.velocity);
  read(j, "gravity", w.gravity);
  read(j, "rates", w.rates);
  read(j, "posture", w.posture);
  read(j, "action_rate", w.action_rate);
}

json weights_json(const RewardWeights& w) {
  return {{"position", w.position}, {"velocity", w.velocity}, {"gravity", w.gravity},
          {"rates", w.rates},       {"posture", w.posture},   {"action_rate", w.action_rate}};
}

}  // namespace

AppConfig config_from_json(const json& j) {
  AppConfig c;
  SimConfig& s = c.sim;
  try {
    check_keys(j, "root", {"quad", "actuator", "randomization", "controller", "allocation", "simulation", "policy",
                           "initial_conditions", "min_snap", "ppo", "reward_weights"});
    if (j.contains("quad")) {
      const auto& q = j.at("quad");
      check_keys(q, "quad", {"mass", "inertia", "rotor_xy", "cm_offset", "gravity"});
      read(q, "mass", s.quad.mass);
      read(q, "gravity", s.quad.gravity);
      read_vec3(q, "cm_offset", s.quad.cm_offset);
      if (q.contains("inertia")) {
        const auto& in = q.at("inertia");
        if (in.size() == 3 && in[0].is_number()) {
          Vec3 d;
          read_vec3(q, "inertia", d);
          s.quad.inertia = d.asDiagonal();
        } else if (in.size() == 3) {
          for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k)
              s.quad.inertia(r, k) = in[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)].get<double>();
        } else {
          throw ConfigError("'inertia' must be a diagonal (3 numbers) or a 3x3 matrix");
        }
      }
      if (q.contains("rotor_xy")) {
        const auto& r = q.at("rotor_xy");
        if (r.size() != kNumRotors) throw ConfigError("'rotor_xy' needs 4 [x, y] pairs");
        for (std::size_t i = 0; i < kNumRotors; ++i)
          s.quad.rotor_xy[i] = Eigen::Vector2d(r[i].at(0).get<double>(), r[i].at(1).get<double>());
      }
    }
    if (j.contains("actuator")) {
      const auto& a = j.at("actuator");
      check_keys(a, "actuator", {"omega_max", "positive", "negative", "alpha_pos", "alpha_neg", "omega_switch",
                                 "dead_zone"});
      read(a, "omega_max", s.actuator.steady.omega_max);
      RotorCoeffs rc = s.actuator.steady.rotors[0];
      if (a.contains("positive")) read_regime(a.at("positive"), rc.pos);
      if (a.contains("negative")) read_regime(a.at("negative"), rc.neg);
      s.actuator.steady.rotors.fill(rc);
      read(a, "alpha_pos", s.actuator.transient.alpha_pos);
      read(a, "alpha_neg", s.actuator.transient.alpha_neg);
      read(a, "omega_switch", s.actuator.transient.omega_switch);
      read(a, "dead_zone", s.actuator.transient.dead_zone);
    }
    if (j.contains("randomization")) {
      const auto& r = j.at("randomization");
      check_keys(r, "randomization", {"alpha_scale", "thrust_coeff_scale", "omega_switch", "dead_zone"});
      read_range(r, "alpha_scale", s.randomization.alpha_scale);
      read_range(r, "thrust_coeff_scale", s.randomization.thrust_coeff_scale);
      read_range(r, "omega_switch", s.randomization.omega_switch);
      read_range(r, "dead_zone", s.randomization.dead_zone);
    }
    if (j.contains("controller")) {
      const auto& k = j.at("controller");
      check_keys(k, "controller", {"position", "velocity", "attitude_per_inertia", "rate_per_inertia",
                                   "chart_hysteresis", "offset_epsilon", "feedforward_jump"});
      read_vec3(k, "position", s.gains.position);
      read_vec3(k, "velocity", s.gains.velocity);
      read_vec3(k, "attitude_per_inertia", s.gains.attitude);
      read_vec3(k, "rate_per_inertia", s.gains.rate);
      read(k, "chart_hysteresis", s.charts.hysteresis);
      read(k, "offset_epsilon", s.charts.offset_epsilon);
      read(k, "feedforward_jump", s.feedforward_jump);
    }
    if (j.contains("allocation")) {
      const auto& a = j.at("allocation");
      check_keys(a, "allocation", {"weight_diag", "tikhonov", "iterations", "step_rule", "power_iterations"});
      if (a.contains("weight_diag")) {
        const auto& w = a.at("weight_diag");
        if (w.size() != 4) throw ConfigError("'weight_diag' needs 4 numbers");
        Vec4 d;
        for (std::size_t i = 0; i < 4; ++i) d[static_cast<Eigen::Index>(i)] = w[i].get<double>();
        s.allocation.weight = d.asDiagonal();
      }
      read(a, "tikhonov", s.allocation.tikhonov);
      read(a, "iterations", s.allocation.iterations);
      read(a, "power_iterations", s.allocation.power_iterations);
      if (a.contains("step_rule")) {
        const auto rule = a.at("step_rule").get<std::string>();
        if (rule == "trace")
          s.allocation.step_rule = StepRule::Trace;
        else if (rule == "power")
          s.allocation.step_rule = StepRule::PowerIteration;
        else
          throw ConfigError("'step_rule' must be \"trace\" or \"power\"");
      }
    }
    if (j.contains("simulation")) {
      const auto& m = j.at("simulation");
      check_keys(m, "simulation", {"dt", "position_decimation", "dt_env", "policy_delay", "duration",
                                   "step_flip_time"});
      read(m, "dt", s.dt);
      read(m, "position_decimation", s.position_decimation);
      read(m, "dt_env", s.dt_env);
      read(m, "policy_delay", s.policy_delay);
      read(m, "duration", s.duration);
      read(m, "step_flip_time", s.step_flip_time);
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      check_keys(p, "policy", {"action_limit", "observation_scales"});
      read(p, "action_limit", s.action_limit);
      if (p.contains("observation_scales")) {
        const auto& o = p.at("observation_scales");
        check_keys(o, "observation_scales", {"position", "velocity", "rates", "action"});
        read(o, "position", s.scales.position);
        read(o, "velocity", s.scales.velocity);
        read(o, "rates", s.scales.rates);
        read(o, "action", s.scales.action);
      }
    }
    if (j.contains("initial_conditions")) {
      const auto& ic = j.at("initial_conditions");
      check_keys(ic, "initial_conditions", {"position", "velocity_std", "rate_std", "yaw_range", "tilt"});
      read_vec3(ic, "position", s.spread.position);
      read(ic, "velocity_std", s.spread.velocity_std);
      read(ic, "rate_std", s.spread.rate_std);
      read(ic, "yaw_range", s.spread.yaw_range);
      read(ic, "tilt", s.spread.tilt);
    }
    if (j.contains("min_snap")) {
      const auto& m = j.at("min_snap");
      check_keys(m, "min_snap", {"waypoints", "durations", "yaw", "free_fall"});
      if (m.contains("waypoints")) {
        const auto& w = m.at("waypoints");
        if (w.size() != 3) throw ConfigError("min_snap needs 3 waypoints");
        for (std::size_t i = 0; i < 3; ++i)
          s.min_snap.waypoints[i] = Vec3(w[i].at(0).get<double>(), w[i].at(1).get<double>(), w[i].at(2).get<double>());
      }
      if (m.contains("durations")) {
        const auto& d = m.at("durations");
        if (d.size() != 2) throw ConfigError("min_snap needs 2 durations");
        s.min_snap.durations = {d[0].get<double>(), d[1].get<double>()};
      }
      if (m.contains("yaw")) {
        const auto& y = m.at("yaw");
        if (y.size() != 3) throw ConfigError("min_snap needs 3 yaw values");
        s.min_snap.yaw = {y[0].get<double>(), y[1].get<double>(), y[2].get<double>()};
      }
      read(m, "free_fall", s.min_snap.free_fall);
    }
    s.min_snap.gravity = s.quad.gravity;
    s.min_snap.posture.entries = {{0.0, 1}, {s.min_snap.durations[0], -1}};

    if (j.contains("ppo")) {
      const auto& p = j.at("ppo");
      check_keys(p, "ppo", {"learning_rate", "gamma", "gae_lambda", "clip", "entropy_coef", "value_coef",
                            "update_epochs", "minibatches", "num_envs", "epochs", "episode_length", "max_grad_norm",
                            "adam_beta1", "adam_beta2", "adam_eps", "normalize_advantages", "reward_scale", "hidden",
                            "init_log_std", "seed", "checkpoint_every"});
      PpoConfig& o = c.ppo;
      read(p, "learning_rate", o.learning_rate);
      read(p, "gamma", o.gamma);
      read(p, "gae_lambda", o.gae_lambda);
      read(p, "clip", o.clip);
      read(p, "entropy_coef", o.entropy_coef);
      read(p, "value_coef", o.value_coef);
      read(p, "update_epochs", o.update_epochs);
      read(p, "minibatches", o.minibatches);
      read(p, "num_envs", o.num_envs);
      read(p, "epochs", o.epochs);
      read(p, "episode_length", o.episode_length);
      read(p, "max_grad_norm", o.max_grad_norm);
      read(p, "adam_beta1", o.adam_beta1);
      read(p, "adam_beta2", o.adam_beta2);
      read(p, "adam_eps", o.adam_eps);
      read(p, "normalize_advantages", o.normalize_advantages);
      read(p, "reward_scale", o.reward_scale);
      read(p, "hidden", o.hidden);
      read(p, "init_log_std", o.init_log_std);
      read(p, "seed", o.seed);
      read(p, "checkpoint_every", o.checkpoint_every);
    }
    if (j.contains("reward_weights")) {
      const auto& w = j.at("reward_weights");
      check_keys(w, "reward_weights", {"nti", "itn"});
      if (w.contains("nti")) read_weights(w.at("nti"), c.nti);
      if (w.contains("itn")) read_weights(w.at("itn"), c.itn);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    s.validate();
    c.nti.validate();
    c.itn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

json config_to_json(const AppConfig& c) {
  const SimConfig& s = c.sim;
  json rotor_xy = json::array();
  for (const auto& r : s.quad.rotor_xy) rotor_xy.push_back({r.x(), r.y()});
  json inertia = json::array();
  for (int r = 0; r < 3; ++r) inertia.push_back({s.quad.inertia(r, 0), s.quad.inertia(r, 1), s.quad.inertia(r, 2)});
  const auto& rc = s.actuator.steady.rotors[0];
  const Vec4 wd = s.allocation.weight.diagonal();
  json ms_way = json::array();
  for (const auto& w : s.min_snap.waypoints) ms_way.push_back(vec(w));
  return {
      {"quad",
       {{"mass", s.quad.mass}, {"inertia", inertia}, {"rotor_xy", rotor_xy}, {"cm_offset", vec(s.quad.cm_offset)},
        {"gravity", s.quad.gravity}}},
      {"actuator",
       {{"omega_max", s.actuator.steady.omega_max},
        {"positive", regime_json(rc.pos)},
        {"negative", regime_json(rc.neg)},
        {"alpha_pos", s.actuator.transient.alpha_pos},
        {"alpha_neg", s.actuator.transient.alpha_neg},
        {"omega_switch", s.actuator.transient.omega_switch},
        {"dead_zone", s.actuator.transient.dead_zone}}},
      {"randomization",
       {{"alpha_scale", {s.randomization.alpha_scale.lo, s.randomization.alpha_scale.hi}},
        {"thrust_coeff_scale", {s.randomization.thrust_coeff_scale.lo, s.randomization.thrust_coeff_scale.hi}},
        {"omega_switch", {s.randomization.omega_switch.lo, s.randomization.omega_switch.hi}},
        {"dead_zone", {s.randomization.dead_zone.lo, s.randomization.dead_zone.hi}}}},
      {"controller",
       {{"position", vec(s.gains.position)},
        {"velocity", vec(s.gains.velocity)},
        {"attitude_per_inertia", vec(s.gains.attitude)},
        {"rate_per_inertia", vec(s.gains.rate)},
        {"chart_hysteresis", s.charts.hysteresis},
        {"offset_epsilon", s.charts.offset_epsilon},
        {"feedforward_jump", s.feedforward_jump}}},
      {"allocation",
       {{"weight_diag", {wd[0], wd[1], wd[2], wd[3]}},
        {"tikhonov", s.allocation.tikhonov},
        {"iterations", s.allocation.iterations},
        {"step_rule", s.allocation.step_rule == StepRule::Trace ? "trace" : "power"},
        {"power_iterations", s.allocation.power_iterations}}},
      {"simulation",
       {{"dt", s.dt},
        {"position_decimation", s.position_decimation},
        {"dt_env", s.dt_env},
        {"policy_delay", s.policy_delay},
        {"duration", s.duration},
        {"step_flip_time", s.step_flip_time}}},
      {"policy",
       {{"action_limit", s.action_limit},
        {"observation_scales",
         {{"position", s.scales.position},
          {"velocity", s.scales.velocity},
          {"rates", s.scales.rates},
          {"action", s.scales.action}}}}},
      {"initial_conditions",
       {{"position", vec(s.spread.position)},
        {"velocity_std", s.spread.velocity_std},
        {"rate_std", s.spread.rate_std},
        {"yaw_range", s.spread.yaw_range},
        {"tilt", s.spread.tilt}}},
      {"min_snap",
       {{"waypoints", ms_way},
        {"durations", {s.min_snap.durations[0], s.min_snap.durations[1]}},
        {"yaw", {s.min_snap.yaw[0], s.min_snap.yaw[1], s.min_snap.yaw[2]}},
        {"free_fall", s.min_snap.free_fall}}},
      {"ppo",
       {{"learning_rate", c.ppo.learning_rate},
        {"gamma", c.ppo.gamma},
        {"gae_lambda", c.ppo.gae_lambda},
        {"clip", c.ppo.clip},
        {"entropy_coef", c.ppo.entropy_coef},
        {"value_coef", c.ppo.value_coef},
        {"update_epochs", c.ppo.update_epochs},
        {"minibatches", c.ppo.minibatches},
        {"num_envs", c.ppo.num_envs},
        {"epochs", c.ppo.epochs},
        {"episode_length", c.ppo.episode_length},
        {"max_grad_norm", c.ppo.max_grad_norm},
        {"adam_beta1", c.ppo.adam_beta1},
        {"adam_beta2", c.ppo.adam_beta2},
        {"adam_eps", c.ppo.adam_eps},
        {"normalize_advantages", c.ppo.normalize_advantages},
        {"reward_scale", c.ppo.reward_scale},
        {"hidden", c.ppo.hidden},
        {"init_log_std", c.ppo.init_log_std},
        {"seed", c.ppo.seed},
        {"checkpoint_every", c.ppo.checkpoint_every}}},
      {"reward_weights", {{"nti", weights_json(c.nti)}, {"itn", weights_json(c.itn)}}}};
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace flipquad
