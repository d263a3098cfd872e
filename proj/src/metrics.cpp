#include "flipquad/metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flipquad {

double vector_angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

std::optional<double> settling_time(const std::vector<double>& t, const std::vector<Vec3>& g_b, const Vec3& g_bd,
                                    double cone_deg) {
  if (t.empty() || t.size() != g_b.size()) throw std::invalid_argument("settling_time: empty or misaligned trace");
  const double cone = cone_deg * std::numbers::pi / 180.0;
  std::size_t k = t.size();
  while (k > 0 && vector_angle(g_b[k - 1], g_bd) <= cone) --k;
  if (k == t.size()) return std::nullopt;
  return t[k];
}

PositionMetrics position_metrics(const std::vector<Vec3>& r, const Vec3& origin) {
  if (r.empty()) throw std::invalid_argument("position_metrics: empty trace");
  PositionMetrics m;
  for (const Vec3& p : r) {
    const Vec3 e = p - origin;
    m.sum_squared += e.squaredNorm();
    m.max_deviation = m.max_deviation.cwiseMax(e.cwiseAbs());
  }
  m.samples = r.size();
  m.rmse = std::sqrt(m.sum_squared / static_cast<double>(m.samples));
  return m;
}

}  // namespace flipquad
