#include "auvnav/calibration.hpp"

#include <cmath>
#include <sstream>

namespace auvnav {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": " << a << " vs " << b;
    throw NavError(ErrorCode::kLengthMismatch, os.str());
  }
}

}  // namespace

double estimate_scale_norm_ratio(std::span<const Vec3> dvl,
                                 std::span<const GnssVelocitySample> gnss, double speed_floor) {
  require_same_length(dvl.size(), gnss.size(), "DVL and GNSS sequences differ in length");
  if (dvl.empty()) throw NavError(ErrorCode::kInvalidArgument, "no samples");
  double sum = 0.0;
  for (std::size_t t = 0; t < dvl.size(); ++t) {
    const double ref = gnss[t].v_n.norm();
    if (!(ref > speed_floor)) {
      std::ostringstream os;
      os << "reference speed " << ref << " m/s at sample " << t << " is below the "
         << speed_floor << " m/s floor";
      throw NavError(ErrorCode::kDegenerateSample, os.str());
    }
    sum += dvl[t].norm() / ref - 1.0;
  }
  return sum / static_cast<double>(dvl.size());
}

CalibrationResult calibrate_dvl_full(std::span<const Vec3> dvl,
                                     std::span<const GnssVelocitySample> gnss,
                                     std::span<const RotationMatrix> attitude,
                                     const RotationMatrix& mounting,
                                     const CalibrationOptions& options) {
  require_same_length(dvl.size(), gnss.size(), "DVL and GNSS sequences differ in length");
  require_same_length(dvl.size(), attitude.size(), "DVL and attitude sequences differ in length");
  const std::size_t n = dvl.size();
  if (n < 7) throw NavError(ErrorCode::kInvalidArgument, "need at least 7 samples");

  std::vector<Vec3> ref(n);
  for (std::size_t t = 0; t < n; ++t) ref[t] = mounting * (attitude[t].transpose() * gnss[t].v_n);

  CalibrationResult result;
  result.samples_used = static_cast<int>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int axis = 0; axis < 3; ++axis) {
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      mean_x += ref[t][axis];
      mean_y += dvl[t][axis];
    }
    mean_x *= inv_n;
    mean_y *= inv_n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double dx = ref[t][axis] - mean_x;
      sxx += dx * dx;
      sxy += dx * (dvl[t][axis] - mean_y);
    }
    if (sxx * inv_n <= options.excitation_variance) {
      result.scale_observable[static_cast<std::size_t>(axis)] = false;
      result.full_scale[axis] = 0.0;
      result.full_bias[axis] = mean_y - mean_x;
      continue;
    }
    // Centered normal equations of y = a x + b decouple; a = 1 + k.
    const double gain = sxy / sxx;
    if (!std::isfinite(gain)) throw NavError(ErrorCode::kRankDeficient, "singular normal equations");
    result.full_scale[axis] = gain - 1.0;
    result.full_bias[axis] = mean_y - gain * mean_x;
  }
  if ((result.full_scale.array() <= -1.0).any()) {
    throw NavError(ErrorCode::kRankDeficient, "estimated scale factor is not above -1");
  }

  double sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Vec3 model = (Vec3::Ones() + result.full_scale).cwiseProduct(ref[t]) + result.full_bias;
    sq += (dvl[t] - model).squaredNorm();
  }
  result.residual_vrmse = std::sqrt(sq * inv_n);

  // Norm-ratio baseline on the samples that clear the speed floor.
  double sum = 0.0;
  int used = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double speed = gnss[t].v_n.norm();
    if (speed > options.speed_floor) {
      sum += dvl[t].norm() / speed - 1.0;
      ++used;
    }
  }
  if (used > 0) result.scalar_scale = sum / used;
  return result;
}

Vec3 apply_calibration(const Vec3& raw, const CalibrationResult& result, CalibrationMode mode) {
  if (mode == CalibrationMode::kScalar) {
    if (!result.scalar_scale) {
      throw NavError(ErrorCode::kInvalidArgument, "calibration has no scalar scale estimate");
    }
    const double denom = 1.0 + *result.scalar_scale;
    if (!(denom > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "1 + k must be positive");
    return raw / denom;
  }
  const Vec3 denom = Vec3::Ones() + result.full_scale;
  if ((denom.array() <= 0.0).any()) {
    throw NavError(ErrorCode::kInvalidArgument, "1 + k must be positive on every axis");
  }
  return (raw - result.full_bias).cwiseQuotient(denom);
}

double vrmse(std::span<const Vec3> estimated, std::span<const Vec3> truth) {
  require_same_length(estimated.size(), truth.size(), "VRMSE sequences differ in length");
  if (estimated.empty()) throw NavError(ErrorCode::kInvalidArgument, "VRMSE of empty sequences");
  double sq = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) sq += (estimated[i] - truth[i]).squaredNorm();
  return std::sqrt(sq / static_cast<double>(estimated.size()));
}

std::vector<std::pair<std::size_t, std::size_t>> match_nearest(std::span<const double> a_times,
                                                               std::span<const double> b_times,
                                                               double tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a_times.size(); ++i) {
    const double t = a_times[i];
    while (j + 1 < b_times.size() && std::abs(b_times[j + 1] - t) <= std::abs(b_times[j] - t)) ++j;
    if (j < b_times.size() && std::abs(b_times[j] - t) <= tolerance) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace auvnav
