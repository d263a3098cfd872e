#include "flipquad/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace flipquad {

void ExperimentConfig::validate() const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  if (!(cone_deg > 0.0 && cone_deg < 180.0)) throw std::invalid_argument("cone angle must be in (0, 180) degrees");
}

double MetricsReport::pooled_rmse() const {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& r : rollouts) {
    ss += r.position.sum_squared;
    n += r.position.samples;
  }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

double MetricsReport::mean_rmse() const {
  double s = 0.0;
  for (const auto& r : rollouts) s += r.position.rmse;
  return rollouts.empty() ? 0.0 : s / static_cast<double>(rollouts.size());
}

Vec3 MetricsReport::mean_max_deviation() const {
  Vec3 s = Vec3::Zero();
  for (const auto& r : rollouts) s += r.position.max_deviation;
  return rollouts.empty() ? s : Vec3(s / static_cast<double>(rollouts.size()));
}

double MetricsReport::mean_settling() const {
  double s = 0.0;
  for (const auto& r : rollouts) s += r.settling.value_or(duration);
  return rollouts.empty() ? 0.0 : s / static_cast<double>(rollouts.size());
}

int MetricsReport::settled_count() const {
  return static_cast<int>(std::count_if(rollouts.begin(), rollouts.end(), [](const auto& r) { return r.settling.has_value(); }));
}

std::mt19937_64 rollout_rng(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

Trace simulate_rollout(const SimConfig& sim, const ExperimentConfig& cfg, std::mt19937_64& rng,
                       const GaussianPolicy<float>* policy) {
  const int eta0 = initial_posture(cfg.transition);
  const InitialSpread spread = cfg.zero_spread ? InitialSpread::none() : sim.spread;
  const QuadState x0 = reset_distribution(rng, eta0, spread);
  const ActuatorParams plant =
      cfg.randomize_actuators ? sample_params(rng, sim.actuator, sim.randomization) : sim.actuator;

  const bool oca = cfg.method != Method::StepHfca;
  FlightStack stack(sim, oca);
  stack.reset(x0, plant, eta0);

  std::unique_ptr<ReferenceSource> ref;
  std::optional<PolicyDriver> driver;
  switch (cfg.method) {
    case Method::StepHfca:
    case Method::StepHfcaOca:
      ref = std::make_unique<StepPostureReference>(eta0, sim.step_flip_time);
      break;
    case Method::MinSnapHfcaOca: {
      MinSnapSpec spec = sim.min_snap;
      spec.posture.entries = {{0.0, eta0}, {spec.durations[0], -eta0}};
      ref = std::make_unique<MinSnapReference>(spec);
      break;
    }
    case Method::PolicyHfcaOca:
      if (!policy) throw std::invalid_argument("policy method needs policy weights");
      ref = std::make_unique<ConstantReference>(Vec3::Zero(), 0.0, eta0);
      driver.emplace(*policy, sim);
      driver->reset();
      break;
  }

  Trace trace;
  const auto ticks = static_cast<long>(std::llround(cfg.duration / sim.dt));
  trace.samples.reserve(static_cast<std::size_t>(ticks + 1));
  TickRecord first;
  first.state = stack.state();
  first.posture = eta0;
  first.chart = stack.controller().chart_state().chart;
  trace.samples.push_back(first);

  const int substeps = sim.substeps();
  RawAction latest = RawAction::Zero();
  for (long k = 0; k < ticks; ++k) {
    FlatReference r = ref->sample(stack.time());
    std::optional<Vec3> mod;
    if (driver) {
      if (k % substeps == 0) latest = driver->decide(stack.state());
      const PolicyAction a = interpret_action(driver->applied(latest), sim.action_limit);
      mod = a.modulation;
      r.posture = a.posture();
    }
    trace.samples.push_back(stack.tick(r, mod));
  }
  return trace;
}

RolloutMetrics rollout_metrics(const Trace& trace, Transition transition, double cone_deg, int index) {
  RolloutMetrics m;
  m.index = index;
  m.position = position_metrics(trace.positions());
  m.settling = settling_time(trace.times(), trace.body_gravity(), target_body_gravity(transition), cone_deg);
  return m;
}

MetricsReport run_experiment(const SimConfig& sim, const ExperimentConfig& cfg, const GaussianPolicy<float>* policy,
                             std::vector<Trace>* traces) {
  cfg.validate();
  std::optional<GaussianPolicy<float>> loaded;
  if (cfg.method == Method::PolicyHfcaOca && !policy) {
    if (cfg.policy_path.empty()) throw std::invalid_argument("policy method needs a policy weight file");
    loaded = load_policy(cfg.policy_path);
    policy = &*loaded;
  }
  MetricsReport report;
  report.method = cfg.method;
  report.transition = cfg.transition;
  report.duration = cfg.duration;
  if (traces) traces->clear();
  for (int i = 0; i < cfg.n; ++i) {
    std::mt19937_64 rng = rollout_rng(cfg.seed, i);
    Trace tr = simulate_rollout(sim, cfg, rng, policy);
    report.rollouts.push_back(rollout_metrics(tr, cfg.transition, cfg.cone_deg, i));
    if (traces) traces->push_back(std::move(tr));
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "method,transition,rollout,rmse,dx,dy,dz,settling_time,settled\n";
  const std::string head = to_string(report.method) + "," + to_string(report.transition) + ",";
  for (const auto& r : report.rollouts) {
    out << head << r.index << ',' << fmt(r.position.rmse) << ',' << fmt(r.position.max_deviation.x()) << ','
        << fmt(r.position.max_deviation.y()) << ',' << fmt(r.position.max_deviation.z()) << ','
        << (r.settling ? fmt(*r.settling) : std::string("")) << ',' << (r.settling ? 1 : 0) << '\n';
  }
  const Vec3 dev = report.mean_max_deviation();
  const std::string devs = fmt(dev.x()) + ',' + fmt(dev.y()) + ',' + fmt(dev.z());
  out << head << "pooled," << fmt(report.pooled_rmse()) << ',' << devs << ',' << fmt(report.mean_settling()) << ','
      << report.settled_count() << '\n';
  out << head << "mean," << fmt(report.mean_rmse()) << ',' << devs << ',' << fmt(report.mean_settling()) << ','
      << report.settled_count() << '\n';
}

std::string report_text(const MetricsReport& report) {
  std::ostringstream s;
  const Vec3 dev = report.mean_max_deviation();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %-4s  rmse(pooled) %.4f  rmse(mean) %.4f  t_s %.3f  settled %d/%zu  "
                "dx %.4f  dy %.4f  dz %.4f\n",
                to_string(report.method).c_str(), to_string(report.transition).c_str(), report.pooled_rmse(),
                report.mean_rmse(), report.mean_settling(), report.settled_count(), report.rollouts.size(), dev.x(),
                dev.y(), dev.z());
  s << buf;
  return s.str();
}

void rank_rows(ComparisonTable& table) {
  const std::size_t cols = table.metrics.size();
  for (auto& row : table.rows) row.ranks.assign(cols, Rank::None);
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> vals;
    for (const auto& row : table.rows) vals.push_back(row.values.at(c));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (auto& row : table.rows) {
      if (!vals.empty() && row.values[c] == vals[0])
        row.ranks[c] = Rank::Best;
      else if (vals.size() > 1 && row.values[c] == vals[1])
        row.ranks[c] = Rank::Second;
    }
  }
}

ComparisonTable compare(const std::vector<MetricsReport>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least two reports");
  for (const auto& r : reports)
    if (r.transition != reports.front().transition)
      throw std::invalid_argument("compare needs reports of the same transition");
  ComparisonTable t;
  for (const auto& r : reports) {
    const Vec3 dev = r.mean_max_deviation();
    // rounded to the printed precision so equal-looking numbers tie
    auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };
    t.rows.push_back({to_string(r.method),
                      to_string(r.transition),
                      {round4(r.pooled_rmse()), round4(r.mean_settling()), round4(dev.x()), round4(dev.y()),
                       round4(dev.z())},
                      {}});
  }
  rank_rows(t);
  return t;
}

namespace {

const char* rank_name(Rank r) { return r == Rank::Best ? "best" : r == Rank::Second ? "second" : ""; }

}  // namespace

void write_comparison_csv(const ComparisonTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "method,transition";
  for (const auto& m : table.metrics) out << ',' << m << ',' << m << "_rank";
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.method << ',' << row.transition;
    for (std::size_t c = 0; c < row.values.size(); ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", row.values[c]);
      out << ',' << buf << ',' << rank_name(row.ranks[c]);
    }
    out << '\n';
  }
}

std::string comparison_text(const ComparisonTable& table) {
  std::ostringstream s;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-18s %-4s", "method", "");
  s << buf;
  for (const auto& m : table.metrics) {
    std::snprintf(buf, sizeof buf, " %10s", m.c_str());
    s << buf;
  }
  s << '\n';
  for (const auto& row : table.rows) {
    std::snprintf(buf, sizeof buf, "%-18s %-4s", row.method.c_str(), row.transition.c_str());
    s << buf;
    for (std::size_t c = 0; c < row.values.size(); ++c) {
      const char* mark = row.ranks[c] == Rank::Best ? "**" : row.ranks[c] == Rank::Second ? "*" : "";
      std::snprintf(buf, sizeof buf, " %8.4f%-2s", row.values[c], mark);
      s << buf;
    }
    s << '\n';
  }
  s << "(** best, * second best; lower is better)\n";
  return s.str();
}

}  // namespace flipquad
