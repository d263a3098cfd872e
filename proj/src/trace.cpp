#include "flipquad/trace.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace flipquad {

std::vector<double> Trace::times() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.t);
  return out;
}

std::vector<Vec3> Trace::positions() const {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.state.position);
  return out;
}

std::vector<Vec3> Trace::body_gravity() const {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(flipquad::body_gravity(s.state.attitude));
  return out;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,x,y,z,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,omega1,omega2,omega3,omega4,T1,T2,T3,T4,fc,tau_x,tau_y,tau_z,"
         "chart,eta\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out << buf;
  };
  for (const auto& s : trace.samples) {
    const QuadState& x = s.state;
    put(s.t);
    for (int i = 0; i < 3; ++i) out << ',', put(x.position[i]);
    for (int i = 0; i < 3; ++i) out << ',', put(x.velocity[i]);
    const Vec4 q = so3::to_wxyz(x.attitude);
    for (int i = 0; i < 4; ++i) out << ',', put(q[i]);
    for (int i = 0; i < 3; ++i) out << ',', put(x.body_rates[i]);
    for (int i = 0; i < 4; ++i) out << ',', put(x.motors[i]);
    for (int i = 0; i < 4; ++i) out << ',', put(s.thrusts[i]);
    out << ',', put(s.command.collective);
    for (int i = 0; i < 3; ++i) out << ',', put(s.command.torque[i]);
    out << ',' << (s.chart == Chart::North ? 'N' : 'S') << ',' << s.posture << '\n';
  }
}

}  // namespace flipquad
