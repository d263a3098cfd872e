// Python bindings for the flipquad library.

#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flipquad/allocation.hpp"
#include "flipquad/config.hpp"
#include "flipquad/experiment.hpp"
#include "flipquad/metrics.hpp"
#include "flipquad/trajectory.hpp"

namespace py = pybind11;
using namespace flipquad;

namespace {

Vec4 quat_to_vec(const Quaternion& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }

Quaternion vec_to_quat(const Vec4& v) { return Quaternion(v[0], v[1], v[2], v[3]); }

std::vector<Vec3> rows_to_vec3(const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& m) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

AppConfig app_config(const std::string& path) { return path.empty() ? AppConfig{} : load_config(path); }

ExperimentConfig experiment_config(const std::string& method, const std::string& transition, std::uint64_t seed,
                                   int n, double duration, double cone_deg, bool zero_spread,
                                   bool randomize_actuators, const std::string& policy_path) {
  ExperimentConfig ec;
  ec.method = parse_method(method);
  ec.transition = parse_transition(transition);
  ec.seed = seed;
  ec.n = n;
  ec.duration = duration;
  ec.cone_deg = cone_deg;
  ec.zero_spread = zero_spread;
  ec.randomize_actuators = randomize_actuators;
  ec.policy_path = policy_path;
  ec.validate();
  return ec;
}

py::dict report_dict(const MetricsReport& r) {
  py::list rollouts;
  for (const auto& m : r.rollouts) {
    py::dict d;
    d["index"] = m.index;
    d["rmse"] = m.position.rmse;
    d["max_deviation"] = m.position.max_deviation;
    d["settling_time"] = m.settling ? py::cast(*m.settling) : py::none();
    rollouts.append(d);
  }
  py::dict out;
  out["method"] = to_string(r.method);
  out["transition"] = to_string(r.transition);
  out["pooled_rmse"] = r.pooled_rmse();
  out["mean_rmse"] = r.mean_rmse();
  out["mean_max_deviation"] = r.mean_max_deviation();
  out["mean_settling_time"] = r.mean_settling();
  out["settled"] = r.settled_count();
  out["rollouts"] = rollouts;
  return out;
}

}  // namespace

PYBIND11_MODULE(_flipquad, m) {
  m.doc() = "Flip-capable quadrotor simulation, control and evaluation";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SimulationFault>(m, "SimulationFault", PyExc_RuntimeError);

  m.def("quat_multiply", [](const Vec4& a, const Vec4& b) { return quat_to_vec(so3::multiply(vec_to_quat(a), vec_to_quat(b))); },
        py::arg("a"), py::arg("b"), "Hamilton product of [w, x, y, z] quaternions.");
  m.def("quat_exp", [](const Vec3& v) { return quat_to_vec(so3::exp(v)); }, py::arg("rotation_vector"));
  m.def("quat_log", [](const Vec4& q) -> Vec3 { return so3::log(vec_to_quat(q)); }, py::arg("q"));
  m.def("yaw_quat", [](double psi) { return quat_to_vec(so3::yaw_quat(psi)); }, py::arg("psi"));
  m.def("hopf_project", [](const Vec4& q) -> Vec3 { return so3::hopf_project(vec_to_quat(q)); }, py::arg("q"),
        "Thrust axis R e3 of the attitude q.");
  m.def("chart_north", [](const Vec3& s) { return quat_to_vec(so3::chart_north(s)); }, py::arg("s"));
  m.def("chart_south", [](const Vec3& s) { return quat_to_vec(so3::chart_south(s)); }, py::arg("s"));

  m.def("thrust_of_rate", [](double omega, int rotor) { return thrust_of_rate(omega, SteadyStateParams{}, rotor); },
        py::arg("omega"), py::arg("rotor") = 0, "Steady-state thrust (N) of the default vehicle.");
  m.def(
      "rate_of_thrust",
      [](double thrust, int rotor) {
        const RateCommand c = rate_of_thrust(thrust, SteadyStateParams{}, rotor);
        return py::make_tuple(c.omega, c.clamped);
      },
      py::arg("thrust"), py::arg("rotor") = 0, "Rotor rate for a thrust, and whether it was clamped.");

  m.def(
      "pgd_solve",
      [](const Mat4& h, const Vec4& f, const Vec4& lo, const Vec4& hi, int iterations, std::optional<Vec4> start) {
        const QpProblem p{h, f, lo, hi};
        std::vector<double> history;
        const Vec4 t = pgd_solve(p, iterations, start.value_or(Vec4::Zero()), StepRule::Trace, &history);
        return py::make_tuple(t, history);
      },
      py::arg("h"), py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("iterations") = 50,
      py::arg("start") = py::none(), "Box-constrained QP by projected gradient; returns (solution, objective history).");

  m.def(
      "min_snap",
      [](const std::vector<double>& times, int derivative, double delta_z, double t1, double t2) {
        MinSnapSpec spec;
        spec.waypoints[1] = Vec3(0.0, 0.0, delta_z);
        spec.durations = {t1, t2};
        spec.posture = PostureSchedule{{{0.0, 1}, {t1, -1}}};
        spec.validate();
        const PiecewisePolynomial p = min_snap(spec);
        Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor> out(static_cast<Eigen::Index>(times.size()), 4);
        for (std::size_t i = 0; i < times.size(); ++i)
          out.row(static_cast<Eigen::Index>(i)) = p.evaluate(times[i], derivative).transpose();
        return out;
      },
      py::arg("times"), py::arg("derivative") = 0, py::arg("delta_z") = 0.45, py::arg("t1") = 1.0,
      py::arg("t2") = 1.0, "Samples (x, y, z, yaw) derivatives of the two-segment flip trajectory.");

  m.def(
      "settling_time",
      [](const std::vector<double>& t, const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& g_b,
         const Vec3& g_bd, double cone_deg) { return settling_time(t, rows_to_vec3(g_b), g_bd, cone_deg); },
      py::arg("t"), py::arg("g_b"), py::arg("g_bd"), py::arg("cone_deg") = 10.0);
  m.def(
      "position_metrics",
      [](const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& r, const Vec3& origin) {
        const PositionMetrics pm = position_metrics(rows_to_vec3(r), origin);
        return py::make_tuple(pm.rmse, pm.max_deviation);
      },
      py::arg("r"), py::arg("origin") = Vec3::Zero(), "(RMSE, per-axis max deviation) about origin.");

  m.def("default_config_json", [] { return config_to_json(AppConfig{}).dump(); });
  m.def("load_config_json", [](const std::string& path) { return config_to_json(load_config(path)).dump(); },
        py::arg("path"), "Loads and validates a config file; returns the full config as JSON text.");

  m.def(
      "evaluate",
      [](const std::string& method, const std::string& transition, std::uint64_t seed, int n, double duration,
         double cone_deg, bool zero_spread, bool randomize_actuators, const std::string& policy_path,
         const std::string& config_path) {
        const AppConfig app = app_config(config_path);
        const ExperimentConfig ec = experiment_config(method, transition, seed, n, duration, cone_deg, zero_spread,
                                                      randomize_actuators, policy_path);
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(app.sim, ec);
        }
        return report_dict(r);
      },
      py::arg("method") = "step-oca", py::arg("transition") = "nti", py::arg("seed") = 0, py::arg("n") = 20,
      py::arg("duration") = 3.0, py::arg("cone_deg") = 10.0, py::arg("zero_spread") = false,
      py::arg("randomize_actuators") = false, py::arg("policy_path") = "", py::arg("config_path") = "");

  m.def(
      "simulate",
      [](const std::string& method, const std::string& transition, std::uint64_t seed, double duration,
         bool zero_spread, const std::string& policy_path, const std::string& config_path) {
        const AppConfig app = app_config(config_path);
        const ExperimentConfig ec =
            experiment_config(method, transition, seed, 1, duration, 10.0, zero_spread, false, policy_path);
        std::vector<Trace> traces;
        {
          py::gil_scoped_release release;
          run_experiment(app.sim, ec, nullptr, &traces);
        }
        const Trace& tr = traces.front();
        const auto k = static_cast<Eigen::Index>(tr.samples.size());
        Eigen::VectorXd t(k);
        Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> pos(k, 3), gb(k, 3);
        Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor> quat(k, 4), thrust(k, 4);
        for (Eigen::Index i = 0; i < k; ++i) {
          const TickRecord& s = tr.samples[static_cast<std::size_t>(i)];
          t[i] = s.t;
          pos.row(i) = s.state.position.transpose();
          gb.row(i) = body_gravity(s.state.attitude).transpose();
          quat.row(i) = quat_to_vec(s.state.attitude).transpose();
          thrust.row(i) = s.thrusts.transpose();
        }
        py::dict out;
        out["t"] = t;
        out["position"] = pos;
        out["body_gravity"] = gb;
        out["quaternion"] = quat;
        out["thrust"] = thrust;
        return out;
      },
      py::arg("method") = "step-oca", py::arg("transition") = "nti", py::arg("seed") = 0, py::arg("duration") = 3.0,
      py::arg("zero_spread") = false, py::arg("policy_path") = "", py::arg("config_path") = "",
      "One closed-loop rollout as numpy arrays.");
}
