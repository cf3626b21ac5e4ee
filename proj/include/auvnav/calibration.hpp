#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"

namespace auvnav {

struct CalibrationResult {
  std::optional<double> scalar_scale;  // norm-ratio k-bar, absent if no usable samples
  Vec3 full_scale = Vec3::Zero();
  Vec3 full_bias = Vec3::Zero();
  std::array<bool, 3> scale_observable{true, true, true};
  double residual_vrmse = 0.0;
  int samples_used = 0;
};

enum class CalibrationMode { kScalar, kFull };

struct CalibrationOptions {
  double speed_floor = 0.1;                 // m/s, norm-ratio samples below are rejected
  double excitation_variance = 1e-2;        // (m/s)^2 per DVL axis, well above sensor noise
};

/// Averaged norm ratio k-bar = mean(|v_dvl| / |v_ref| - 1). Every reference
/// speed must exceed `speed_floor`.
double estimate_scale_norm_ratio(std::span<const Vec3> dvl,
                                 std::span<const GnssVelocitySample> gnss,
                                 double speed_floor = 0.1);

/// Per-axis least-squares fit of v_dvl = (1 + k) o (T_b^d T_n^b v_ref) + b.
/// Axes without enough reference-velocity variance keep k = 0, get a bias-only
/// fit, and are flagged unobservable.
CalibrationResult calibrate_dvl_full(std::span<const Vec3> dvl,
                                     std::span<const GnssVelocitySample> gnss,
                                     std::span<const RotationMatrix> attitude,
                                     const RotationMatrix& mounting,
                                     const CalibrationOptions& options = {});

Vec3 apply_calibration(const Vec3& raw, const CalibrationResult& result, CalibrationMode mode);

/// sqrt(mean over samples of the summed squared per-axis error).
double vrmse(std::span<const Vec3> estimated, std::span<const Vec3> truth);

/// Index pairs (a, b) matching each `a_times` entry to the nearest `b_times`
/// entry within `tolerance` seconds. Both inputs must be sorted.
std::vector<std::pair<std::size_t, std::size_t>> match_nearest(std::span<const double> a_times,
                                                               std::span<const double> b_times,
                                                               double tolerance);

}  // namespace auvnav
