#include "auvnav/metrics.hpp"

#include <cmath>

#include "auvnav/alignment.hpp"
#include "auvnav/error.hpp"
#include "auvnav/strapdown.hpp"

namespace auvnav {

namespace {
constexpr double kMinPathForTde = 1.0;  // m
}

TrajectoryMetrics evaluate_trajectory(std::span<const NavState> estimated,
                                      std::span<const NavState> truth, bool horizontal_only) {
  if (estimated.size() != truth.size()) {
    throw NavError(ErrorCode::kLengthMismatch, "estimated and truth trajectories differ in length");
  }
  if (truth.size() < 2) {
    throw NavError(ErrorCode::kInvalidArgument, "trajectory needs at least 2 states");
  }
  TrajectoryMetrics m;
  double sum_sq = 0.0;
  double sum = 0.0;
  double path = 0.0;
  double tde_sum = 0.0;
  std::size_t tde_count = 0;
  double last_err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (i > 0) {
      const Vec3 step = local_offset_m(truth[i - 1].position, truth[i].position);
      path += horizontal_only ? step.head<2>().norm() : step.norm();
    }
    const Vec3 e = local_offset_m(truth[i].position, estimated[i].position);
    const double err = horizontal_only ? e.head<2>().norm() : e.norm();
    sum_sq += err * err;
    sum += err;
    last_err = err;
    if (path >= kMinPathForTde) {
      tde_sum += err / path;
      ++tde_count;
    }
  }
  if (tde_count == 0) {
    throw NavError(ErrorCode::kInvalidArgument, "trajectory path is shorter than 1 m");
  }
  const double n = static_cast<double>(truth.size());
  m.prmse = std::sqrt(sum_sq / n);
  m.mate = sum / n;
  m.fde = last_err;
  m.tde = 100.0 * tde_sum / static_cast<double>(tde_count);
  return m;
}

double evaluate_mounting(const RotationMatrix& estimated, const RotationMatrix& truth) {
  const EulerAngles a = euler_from_rotation(estimated);
  const EulerAngles b = euler_from_rotation(truth);
  const double dr = cyclic_error(a.roll, b.roll);
  const double dp = cyclic_error(a.pitch, b.pitch);
  const double dy = cyclic_error(a.yaw, b.yaw);
  return std::sqrt((dr * dr + dp * dp + dy * dy) / 3.0) * kRadToDeg;
}

}  // namespace auvnav
