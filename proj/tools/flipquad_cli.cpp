// flipquad command-line interface: simulate, evaluate, compare, train, fit-thrust.
//
// Failures print one JSON line {"error": <kind>, "message": <text>} to stderr
// and exit nonzero: 2 usage, 3 configuration, 4 runtime.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flipquad/actuator.hpp"
#include "flipquad/config.hpp"
#include "flipquad/experiment.hpp"
#include "flipquad/ppo.hpp"
#include "flipquad/trace.hpp"

namespace fs = std::filesystem;
using namespace flipquad;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kConfig = 3, kRuntime = 4 };

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

struct CommonOptions {
  std::string config;
  std::string method = "step-oca";
  std::string transition = "nti";
  std::uint64_t seed = 0;
  int n = 20;
  double duration = 3.0;
  double cone_deg = 10.0;
  std::string out = ".";
  std::string policy;
  bool zero_spread = false;
  bool randomize_actuators = false;
};

AppConfig app_config(const CommonOptions& o) { return o.config.empty() ? AppConfig{} : load_config(o.config); }

ExperimentConfig experiment_config(const CommonOptions& o, const std::string& method) {
  ExperimentConfig ec;
  ec.method = parse_method(method);
  ec.transition = parse_transition(o.transition);
  ec.n = o.n;
  ec.seed = o.seed;
  ec.duration = o.duration;
  ec.cone_deg = o.cone_deg;
  ec.zero_spread = o.zero_spread;
  ec.randomize_actuators = o.randomize_actuators;
  ec.policy_path = o.policy;
  ec.validate();
  return ec;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_n, bool with_method) {
  cmd->add_option("--config", o.config, "Vehicle and simulation config (JSON)")->check(CLI::ExistingFile);
  if (with_method) cmd->add_option("--method", o.method, "step | step-oca | minsnap-oca | policy-oca");
  cmd->add_option("--transition", o.transition, "nti | itn");
  cmd->add_option("--seed", o.seed, "Base seed");
  if (with_n) cmd->add_option("--n", o.n, "Number of rollouts")->check(CLI::PositiveNumber);
  cmd->add_option("--duration", o.duration, "Rollout duration [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--cone-deg", o.cone_deg, "Settling cone half-angle [deg]")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--policy", o.policy, "Policy weights for policy-oca")->check(CLI::ExistingFile);
  cmd->add_flag("--zero-spread", o.zero_spread, "Start every rollout from ideal hover");
  cmd->add_flag("--randomize-actuators", o.randomize_actuators, "Draw randomized actuator parameters per rollout");
}

int run_simulate(const CommonOptions& o) {
  const AppConfig app = app_config(o);
  ExperimentConfig ec = experiment_config(o, o.method);
  ec.n = 1;
  std::optional<GaussianPolicy<float>> policy;
  if (ec.method == Method::PolicyHfcaOca) {
    if (ec.policy_path.empty()) throw ConfigError("policy-oca requires --policy");
    policy = load_policy(ec.policy_path);
  }
  auto rng = rollout_rng(ec.seed, 0);
  const Trace trace = simulate_rollout(app.sim, ec, rng, policy ? &*policy : nullptr);
  fs::create_directories(o.out);
  const std::string path = (fs::path(o.out) / "trace.csv").string();
  write_trace_csv(trace, path);
  const RolloutMetrics m = rollout_metrics(trace, ec.transition, ec.cone_deg);
  std::printf("%s %s rmse %.6f settling %s -> %s\n", to_string(ec.method).c_str(), to_string(ec.transition).c_str(),
              m.position.rmse, m.settling ? std::to_string(*m.settling).c_str() : "unsettled", path.c_str());
  return kOk;
}

int run_evaluate(const CommonOptions& o) {
  const AppConfig app = app_config(o);
  const ExperimentConfig ec = experiment_config(o, o.method);
  const MetricsReport report = run_experiment(app.sim, ec);
  fs::create_directories(o.out);
  const std::string path = (fs::path(o.out) / "report.csv").string();
  write_report_csv(report, path);
  std::printf("%s", report_text(report).c_str());
  return kOk;
}

int run_compare(const CommonOptions& o, std::vector<std::string> methods) {
  const AppConfig app = app_config(o);
  if (methods.empty()) {
    methods = {"step", "step-oca", "minsnap-oca"};
    if (!o.policy.empty()) methods.push_back("policy-oca");
  }
  if (methods.size() < 2) throw ConfigError("compare needs at least two methods");
  fs::create_directories(o.out);
  std::vector<MetricsReport> reports;
  for (const auto& m : methods) {
    const ExperimentConfig ec = experiment_config(o, m);
    reports.push_back(run_experiment(app.sim, ec));
    write_report_csv(reports.back(), (fs::path(o.out) / ("report_" + to_string(ec.method) + ".csv")).string());
  }
  const ComparisonTable table = compare(reports);
  write_comparison_csv(table, (fs::path(o.out) / "comparison.csv").string());
  std::printf("%s", comparison_text(table).c_str());
  return kOk;
}

struct TrainOptions {
  int envs = 0;
  int epochs = 0;
  int checkpoint_every = -1;
};

int run_train(const CommonOptions& o, const TrainOptions& t) {
  const AppConfig app = app_config(o);
  PpoConfig cfg = app.ppo;
  cfg.transition = parse_transition(o.transition);
  cfg.weights = app.weights(cfg.transition);
  cfg.seed = o.seed;
  cfg.episode_length = o.duration;
  if (t.envs > 0) cfg.num_envs = t.envs;
  if (t.epochs > 0) cfg.epochs = t.epochs;
  if (t.checkpoint_every >= 0) cfg.checkpoint_every = t.checkpoint_every;
  cfg.validate(app.sim);
  fs::create_directories(o.out);
  const TrainResult res = train(app.sim, cfg, o.out, [](const EpochLog& e) {
    std::printf("epoch %4d cost %10.3f kl %.4f clip %.3f entropy %.3f\n", e.epoch, e.mean_cost, e.diag.approx_kl,
                e.diag.clip_fraction, e.diag.entropy);
    std::fflush(stdout);
  });
  std::printf("trained %zu epochs -> %s\n", res.curve.size(), (fs::path(o.out) / "policy.bin").string().c_str());
  return kOk;
}

int run_fit_thrust(const std::string& samples_path, const std::string& out) {
  const auto samples = read_thrust_samples_csv(samples_path);
  const SteadyStateFit fit = fit_steady_state(samples);
  auto regime = [](const RegimeFit& r) {
    return nlohmann::json{{"c2", r.coeffs.c2},
                          {"c1", r.coeffs.c1},
                          {"c0", r.coeffs.c0},
                          {"moment_scale", r.coeffs.moment_scale},
                          {"fitted", r.fitted},
                          {"samples", r.samples},
                          {"thrust_rms", r.thrust_rms},
                          {"torque_rms", r.torque_rms}};
  };
  const nlohmann::json j{{"positive", regime(fit.pos)}, {"negative", regime(fit.neg)}, {"partial", fit.partial}};
  fs::create_directories(out);
  const std::string path = (fs::path(out) / "thrust_fit.json").string();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << '\n';
  std::printf("%s\n", j.dump(2).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bidirectional-thrust quadrotor inversion toolkit"};
  app.require_subcommand(1);

  CommonOptions sim_o, eval_o, cmp_o, train_o;
  auto* sim = app.add_subcommand("simulate", "Single rollout, writes trace.csv");
  add_common(sim, sim_o, false, true);
  auto* eval = app.add_subcommand("evaluate", "n seeded rollouts, writes report.csv");
  add_common(eval, eval_o, true, true);
  auto* cmp = app.add_subcommand("compare", "Evaluate several methods, writes comparison.csv");
  add_common(cmp, cmp_o, true, false);
  std::vector<std::string> cmp_methods;
  cmp->add_option("--method", cmp_methods, "Methods to compare (repeatable); default all available");
  auto* tr = app.add_subcommand("train", "PPO training of the modulation policy");
  add_common(tr, train_o, false, false);
  TrainOptions topt;
  tr->add_option("--envs", topt.envs, "Parallel environments")->check(CLI::PositiveNumber);
  tr->add_option("--epochs", topt.epochs, "Training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--checkpoint-every", topt.checkpoint_every, "Checkpoint period in epochs, 0 disables");
  auto* fit = app.add_subcommand("fit-thrust", "Least-squares steady-state thrust fit");
  std::string samples, fit_out = ".";
  fit->add_option("samples", samples, "CSV with omega,thrust,torque columns")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (*sim) return run_simulate(sim_o);
    if (*eval) return run_evaluate(eval_o);
    if (*cmp) return run_compare(cmp_o, cmp_methods);
    if (*tr) return run_train(train_o, topt);
    if (*fit) return run_fit_thrust(samples, fit_out);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what(), kConfig);
  } catch (const SimulationFault& e) {
    return fail("simulation", e.what(), kRuntime);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), kRuntime);
  }
  return fail("usage", "no subcommand", kUsage);
}
