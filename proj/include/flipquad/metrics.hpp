#pragma once

// Rollout metrics: settling time into a cone around the target body-frame
// gravity direction, and position error statistics.

#include <optional>
#include <vector>

#include "flipquad/so3.hpp"

namespace flipquad {

/// Angle between two nonzero vectors, rad.
double vector_angle(const Vec3& a, const Vec3& b);

/// Earliest sample time after which every sample stays within `cone_deg` of
/// g_bd. Returns nullopt when the last sample is outside the cone.
std::optional<double> settling_time(const std::vector<double>& t, const std::vector<Vec3>& g_b, const Vec3& g_bd,
                                    double cone_deg);

struct PositionMetrics {
  double rmse = 0.0;              ///< sqrt(mean ‖r - origin‖²), m
  Vec3 max_deviation = Vec3::Zero();  ///< per-axis max |r - origin|, m
  double sum_squared = 0.0;       ///< Σ ‖r - origin‖², for pooling
  std::size_t samples = 0;
};

PositionMetrics position_metrics(const std::vector<Vec3>& r, const Vec3& origin = Vec3::Zero());

}  // namespace flipquad
