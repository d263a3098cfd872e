#include "flipquad/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/LU>
#include <nlohmann/json.hpp>

namespace flipquad {

namespace {

constexpr int kCoeffs = PiecewisePolynomial::kOrder + 1;

// d-th derivative of τ^k, as a coefficient row.
Eigen::Matrix<double, 1, kCoeffs> basis_row(double tau, int d) {
  Eigen::Matrix<double, 1, kCoeffs> row = Eigen::Matrix<double, 1, kCoeffs>::Zero();
  for (int k = d; k < kCoeffs; ++k) {
    double f = 1.0;
    for (int j = 0; j < d; ++j) f *= static_cast<double>(k - j);
    row[k] = f * std::pow(tau, k - d);
  }
  return row;
}

// ∫_0^T (p⁗)² dτ = cᵀ Q c.
Eigen::Matrix<double, kCoeffs, kCoeffs> snap_hessian(double t) {
  Eigen::Matrix<double, kCoeffs, kCoeffs> q = Eigen::Matrix<double, kCoeffs, kCoeffs>::Zero();
  auto falling = [](int k) { return static_cast<double>(k * (k - 1) * (k - 2) * (k - 3)); };
  for (int i = 4; i < kCoeffs; ++i)
    for (int j = 4; j < kCoeffs; ++j) {
      const int p = i + j - 7;
      q(i, j) = falling(i) * falling(j) * std::pow(t, p) / p;
    }
  return q;
}

}  // namespace

ConstantReference::ConstantReference(const Vec3& position, double yaw, int posture) {
  ref_.position = position;
  ref_.yaw = yaw;
  ref_.posture = posture >= 0 ? 1 : -1;
}

FlatReference ConstantReference::sample(double) const { return ref_; }

StepPostureReference::StepPostureReference(int initial_posture, double t_flip, const Vec3& position, double yaw)
    : initial_(initial_posture >= 0 ? 1 : -1), t_flip_(t_flip) {
  if (!(t_flip >= 0.0)) throw std::invalid_argument("step posture: t_flip must be >= 0");
  ref_.position = position;
  ref_.yaw = yaw;
}

FlatReference StepPostureReference::sample(double t) const {
  FlatReference r = ref_;
  r.posture = t < t_flip_ ? initial_ : -initial_;
  return r;
}

int PostureSchedule::at(double t) const {
  if (entries.empty()) return 1;
  int eta = entries.front().second;
  for (const auto& [time, value] : entries) {
    if (time <= t)
      eta = value;
    else
      break;
  }
  return eta >= 0 ? 1 : -1;
}

void PostureSchedule::validate() const {
  if (entries.empty()) throw std::invalid_argument("posture schedule is empty");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].second != 1 && entries[i].second != -1)
      throw std::invalid_argument("posture schedule values must be +1 or -1");
    if (i > 0 && !(entries[i].first > entries[i - 1].first))
      throw std::invalid_argument("posture schedule times must be strictly increasing");
  }
}

PiecewisePolynomial::PiecewisePolynomial(std::vector<Coeffs> segments, std::vector<double> durations)
    : segments_(std::move(segments)), durations_(std::move(durations)) {
  if (segments_.empty() || segments_.size() != durations_.size())
    throw std::invalid_argument("piecewise polynomial: segment/duration count mismatch");
  for (double d : durations_)
    if (!(d > 0.0)) throw std::invalid_argument("piecewise polynomial: durations must be positive");
}

double PiecewisePolynomial::total_duration() const {
  double s = 0.0;
  for (double d : durations_) s += d;
  return s;
}

Vec4 PiecewisePolynomial::evaluate_segment(std::size_t i, double tau, int derivative) const {
  return (basis_row(tau, derivative) * segments_.at(i)).transpose();
}

Vec4 PiecewisePolynomial::evaluate(double t, int derivative) const {
  if (t <= 0.0) return derivative == 0 ? evaluate_segment(0, 0.0, 0) : Vec4::Zero();
  double start = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const double end = start + durations_[i];
    if (t < end || i + 1 == segments_.size()) {
      if (t > end) return derivative == 0 ? evaluate_segment(i, durations_[i], 0) : Vec4::Zero();
      return evaluate_segment(i, t - start, derivative);
    }
    start = end;
  }
  return Vec4::Zero();
}

double PiecewisePolynomial::snap_cost() const {
  double cost = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto q = snap_hessian(durations_[i]);
    for (int axis = 0; axis < 3; ++axis) {
      const auto c = segments_[i].col(axis);
      cost += c.dot(q * c);
    }
  }
  return cost;
}

SnapQp min_snap_qp(double w0, double w1, double w2, double t1, double t2, std::optional<double> knot_acceleration) {
  if (!(t1 > 0.0) || !(t2 > 0.0)) throw std::invalid_argument("min_snap: durations must be positive");
  constexpr int n = 2 * kCoeffs;
  const int rows = 14 + (knot_acceleration ? 1 : 0);
  SnapQp qp;
  qp.q = Eigen::MatrixXd::Zero(n, n);
  qp.q.topLeftCorner(kCoeffs, kCoeffs) = snap_hessian(t1);
  qp.q.bottomRightCorner(kCoeffs, kCoeffs) = snap_hessian(t2);
  qp.a = Eigen::MatrixXd::Zero(rows, n);
  qp.b = Eigen::VectorXd::Zero(rows);

  int r = 0;
  for (int d = 0; d < 4; ++d, ++r) {
    qp.a.block(r, 0, 1, kCoeffs) = basis_row(0.0, d);
    qp.b[r] = d == 0 ? w0 : 0.0;
  }
  qp.a.block(r, 0, 1, kCoeffs) = basis_row(t1, 0);
  qp.b[r++] = w1;
  qp.a.block(r, kCoeffs, 1, kCoeffs) = basis_row(0.0, 0);
  qp.b[r++] = w1;
  for (int d = 1; d <= 4; ++d, ++r) {
    qp.a.block(r, 0, 1, kCoeffs) = basis_row(t1, d);
    qp.a.block(r, kCoeffs, 1, kCoeffs) = -basis_row(0.0, d);
  }
  for (int d = 0; d < 4; ++d, ++r) {
    qp.a.block(r, kCoeffs, 1, kCoeffs) = basis_row(t2, d);
    qp.b[r] = d == 0 ? w2 : 0.0;
  }
  if (knot_acceleration) {
    qp.a.block(r, 0, 1, kCoeffs) = basis_row(t1, 2);
    qp.b[r++] = *knot_acceleration;
  }
  return qp;
}

Eigen::VectorXd solve_snap_qp(const SnapQp& qp) {
  const Eigen::Index n = qp.q.rows(), m = qp.a.rows();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0 * qp.q;
  kkt.topRightCorner(n, m) = qp.a.transpose();
  kkt.bottomLeftCorner(m, n) = qp.a;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.tail(m) = qp.b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) throw std::runtime_error("min_snap: singular constraint system");
  Eigen::VectorXd x = lu.solve(rhs);
  x += lu.solve(rhs - kkt * x);  // one refinement step
  return x.head(n);
}

MinSnapSpec MinSnapSpec::for_transition(int initial_posture) {
  MinSnapSpec s;
  const int eta = initial_posture >= 0 ? 1 : -1;
  s.posture.entries = {{0.0, eta}, {s.durations[0], -eta}};
  return s;
}

void MinSnapSpec::validate() const {
  if (!(durations[0] > 0.0) || !(durations[1] > 0.0)) throw std::invalid_argument("min_snap: durations must be positive");
  for (const auto& w : waypoints)
    if (!w.allFinite()) throw std::invalid_argument("min_snap: waypoints must be finite");
  posture.validate();
}

namespace {

std::optional<double> knot_acc(const MinSnapSpec& spec, int channel) {
  if (!spec.free_fall || channel == 3) return std::nullopt;
  const double t1 = spec.durations[0];
  const bool flips = spec.posture.at(t1) != spec.posture.at(std::nextafter(t1, -std::numeric_limits<double>::infinity()));
  if (!flips) return std::nullopt;
  return channel == 2 ? -spec.gravity : 0.0;
}

SnapQp channel_qp(const MinSnapSpec& spec, int channel) {
  auto value = [&](int i) { return channel < 3 ? spec.waypoints[static_cast<std::size_t>(i)][channel]
                                               : spec.yaw[static_cast<std::size_t>(i)]; };
  return min_snap_qp(value(0), value(1), value(2), spec.durations[0], spec.durations[1], knot_acc(spec, channel));
}

}  // namespace

PiecewisePolynomial min_snap(const MinSnapSpec& spec) {
  spec.validate();
  std::vector<PiecewisePolynomial::Coeffs> segs(2, PiecewisePolynomial::Coeffs::Zero());
  for (int ch = 0; ch < 4; ++ch) {
    const Eigen::VectorXd c = solve_snap_qp(channel_qp(spec, ch));
    segs[0].col(ch) = c.head(kCoeffs);
    segs[1].col(ch) = c.tail(kCoeffs);
  }
  return PiecewisePolynomial(std::move(segs), {spec.durations[0], spec.durations[1]});
}

double min_snap_residual(const MinSnapSpec& spec, const PiecewisePolynomial& poly) {
  double worst = 0.0;
  for (int ch = 0; ch < 4; ++ch) {
    const SnapQp qp = channel_qp(spec, ch);
    Eigen::VectorXd c(2 * kCoeffs);
    c << poly.segments()[0].col(ch), poly.segments()[1].col(ch);
    worst = std::max(worst, (qp.a * c - qp.b).cwiseAbs().maxCoeff());
  }
  return worst;
}

MinSnapReference::MinSnapReference(const MinSnapSpec& spec) : spec_(spec), poly_(min_snap(spec)) {}

FlatReference MinSnapReference::sample(double t) const {
  const Vec4 p = poly_.evaluate(t, 0), v = poly_.evaluate(t, 1), a = poly_.evaluate(t, 2), j = poly_.evaluate(t, 3);
  FlatReference r;
  r.position = p.head<3>();
  r.velocity = v.head<3>();
  r.acceleration = a.head<3>();
  r.jerk = j.head<3>();
  r.yaw = p[3];
  r.yaw_rate = v[3];
  r.posture = spec_.posture.at(t);
  return r;
}

CircleReference::CircleReference(double radius, double period, const Vec3& center, int posture, YawMode yaw_mode,
                                 double yaw)
    : radius_(radius), period_(period), center_(center), posture_(posture >= 0 ? 1 : -1), yaw_mode_(yaw_mode),
      yaw_(yaw) {
  if (!(radius >= 0.0)) throw std::invalid_argument("circle: radius must be >= 0");
  if (!(period > 0.0)) throw std::invalid_argument("circle: period must be > 0");
}

FlatReference CircleReference::sample(double t) const {
  const double w = 2.0 * std::numbers::pi / period_;
  const double th = w * t;
  const double c = std::cos(th), s = std::sin(th);
  FlatReference r;
  r.position = center_ + radius_ * Vec3(c, s, 0.0);
  r.velocity = radius_ * w * Vec3(-s, c, 0.0);
  r.acceleration = -radius_ * w * w * Vec3(c, s, 0.0);
  r.jerk = radius_ * w * w * w * Vec3(s, -c, 0.0);
  if (yaw_mode_ == YawMode::Tangent && radius_ > 0.0) {
    r.yaw = yaw_ + th + 0.5 * std::numbers::pi;
    r.yaw_rate = w;
  } else {
    r.yaw = yaw_;
  }
  r.posture = posture_;
  return r;
}

MinSnapSpec read_min_snap_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory spec: " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  MinSnapSpec s;
  if (j.contains("waypoints")) {
    const auto& w = j.at("waypoints");
    if (w.size() != 3) throw std::runtime_error("trajectory spec: need exactly 3 waypoints");
    for (std::size_t i = 0; i < 3; ++i)
      s.waypoints[i] = Vec3(w[i].at(0).get<double>(), w[i].at(1).get<double>(), w[i].at(2).get<double>());
  }
  if (j.contains("durations")) {
    const auto& d = j.at("durations");
    if (d.size() != 2) throw std::runtime_error("trajectory spec: need exactly 2 durations");
    s.durations = {d[0].get<double>(), d[1].get<double>()};
  }
  if (j.contains("yaw")) {
    const auto& y = j.at("yaw");
    if (y.size() != 3) throw std::runtime_error("trajectory spec: need 3 yaw values");
    s.yaw = {y[0].get<double>(), y[1].get<double>(), y[2].get<double>()};
  }
  if (j.contains("posture")) {
    // either [eta_0, eta_1] per waypoint segment or [[t, eta], ...]
    const auto& p = j.at("posture");
    s.posture.entries.clear();
    if (!p.empty() && p[0].is_array()) {
      for (const auto& e : p) s.posture.entries.emplace_back(e.at(0).get<double>(), e.at(1).get<int>());
    } else {
      if (p.size() != 2) throw std::runtime_error("trajectory spec: posture needs 2 values");
      s.posture.entries = {{0.0, p[0].get<int>()}, {s.durations[0], p[1].get<int>()}};
    }
  }
  s.free_fall = j.value("free_fall", s.free_fall);
  s.gravity = j.value("gravity", s.gravity);
  s.validate();
  return s;
}

void write_reference_csv(const ReferenceSource& src, double duration, double dt, const std::string& path) {
  if (!(dt > 0.0)) throw std::invalid_argument("write_reference_csv: dt must be positive");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz,yaw,yaw_rate,posture\n";
  out.precision(9);
  const auto steps = static_cast<long>(std::llround(duration / dt));
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const FlatReference r = src.sample(t);
    out << t;
    for (const Vec3* v : {&r.position, &r.velocity, &r.acceleration, &r.jerk})
      out << ',' << v->x() << ',' << v->y() << ',' << v->z();
    out << ',' << r.yaw << ',' << r.yaw_rate << ',' << r.posture << '\n';
  }
}

}  // namespace flipquad
