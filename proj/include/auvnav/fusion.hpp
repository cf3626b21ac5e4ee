#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "auvnav/calibration.hpp"
#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"
#include "auvnav/sensors.hpp"

namespace auvnav {

inline constexpr int kErrorStateSize = 12;
using ErrorVector = Eigen::Matrix<double, kErrorStateSize, 1>;
using ErrorCovariance = Eigen::Matrix<double, kErrorStateSize, kErrorStateSize>;

/// Error-state layout: [dv_n (3), epsilon (3), accel bias (3), gyro bias (3)].
/// dv_n = v_hat - v, C_hat = (I - [eps x]) C, bias errors = estimate - truth.
struct ErrorState {
  Vec3 dv_n = Vec3::Zero();
  Vec3 epsilon = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();

  static ErrorState from_vector(const ErrorVector& x);
  ErrorVector to_vector() const;
};

struct FilterState {
  NavState nominal;
  ErrorCovariance error_cov = ErrorCovariance::Zero();
  Vec3 accel_bias = Vec3::Zero();  // current estimates, subtracted from the IMU
  Vec3 gyro_bias = Vec3::Zero();
  double t = 0.0;
};

enum class CouplingMode { kLooselyCoupled, kTightlyCoupled, kFreeInertial };

std::string to_string(CouplingMode mode);
CouplingMode coupling_mode_from_string(const std::string& name);

enum class LooseNoiseSource { kUserSet, kBeamPropagated };

struct FusionConfig {
  CouplingMode mode = CouplingMode::kLooselyCoupled;
  std::array<double, kErrorStateSize> process_noise_psd{
      2.5e-7, 2.5e-7, 2.5e-7, 1e-10, 1e-10, 1e-10, 1e-14, 1e-14, 1e-14, 1e-16, 1e-16, 1e-16};
  std::array<double, kErrorStateSize> initial_std{
      0.01, 0.01, 0.01, 1e-3, 1e-3, 1e-3, 1e-2, 1e-2, 1e-2, 5e-6, 5e-6, 5e-6};
  double dvl_velocity_noise_std = 0.05;  // m/s, user-set loose-mode noise
  double beam_noise_std = 0.02;          // m/s
  LooseNoiseSource loose_noise = LooseNoiseSource::kBeamPropagated;
  bool adaptive = false;
  int innovation_window = 30;
  double adaptive_floor = 1e-8;
  double gate_probability = 0.999;
  RotationMatrix mounting;  // T_d^b
  DvlBeamGeometry geometry = default_beam_geometry();
  double beam_sign = 1.0;   // +1 when beams report b_i^T v_d
  std::optional<CalibrationResult> calibration;  // applied to loose-mode DVL velocity
  CalibrationMode calibration_mode = CalibrationMode::kFull;

  void validate() const;
};

enum class UpdateType { kNone, kLoose, kTight, kGap, kRejected };

std::string to_string(UpdateType type);

struct EpochRecord {
  double t = 0.0;
  NavState estimate;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd innovation_cov;
  double nis = 0.0;
  int beams_used = 0;
  UpdateType type = UpdateType::kNone;
};

struct FusionLog {
  std::vector<EpochRecord> epochs;
};

/// Least-squares velocity (T^T T)^{-1} T^T y over the valid beams.
Vec3 ls_beam_velocity(const DvlBeamSample& sample, const DvlBeamGeometry& geometry);

/// Initial filter state at `nominal` with diagonal covariance from cfg.initial_std.
FilterState make_filter_state(const NavState& nominal, const FusionConfig& cfg);

/// Continuous-time error dynamics matrix for the given nominal attitude and
/// bias-corrected specific force.
ErrorCovariance error_dynamics(const RotationMatrix& attitude, const Vec3& specific_force_b);

FilterState ekf_predict(const FilterState& fs, const ImuSample& imu, double dt,
                        const FusionConfig& cfg);

struct UpdateResult {
  FilterState state;
  EpochRecord record;
  Eigen::MatrixXd h;  // measurement matrix used
};

/// Loose update with a DVL-frame velocity. `measurement_cov` replaces the
/// configured noise with a body-frame (innovation-space) covariance.
UpdateResult ekf_update_loose(const FilterState& fs, const Vec3& v_dvl, const FusionConfig& cfg,
                              const std::optional<Eigen::MatrixXd>& measurement_cov = std::nullopt);

/// Tight update stacking one row per valid beam; `measurement_cov` is m x m for m valid beams.
UpdateResult ekf_update_tight(const FilterState& fs, const DvlBeamSample& sample,
                              const FusionConfig& cfg,
                              const std::optional<Eigen::MatrixXd>& measurement_cov = std::nullopt);

/// Innovation-matching estimate R = C_inn - H P H^T, eigenvalues floored at `floor`.
Eigen::MatrixXd adapt_measurement_noise(std::span<const Eigen::VectorXd> innovations,
                                        const Eigen::MatrixXd& h, const ErrorCovariance& p,
                                        double floor = 1e-8);

struct FusionRun {
  std::vector<NavState> trajectory;  // initial + one per IMU sample
  FusionLog log;
  std::vector<Eigen::MatrixXd> adapted_r;  // one per adaptive refresh
};

FusionRun run_fusion(std::span<const ImuSample> imu, std::span<const DvlBeamSample> dvl,
                     const NavState& initial, const FusionConfig& cfg);

FusionRun run_fusion(std::span<const ImuSample> imu, std::span<const DvlBeamSample> dvl,
                     std::span<const BeamOutage> outages, const NavState& initial,
                     const FusionConfig& cfg);

/// Two-sided chi-square interval for `dof` degrees of freedom at `probability`.
std::pair<double, double> chi_square_bounds(int dof, double probability);

/// Upper chi-square quantile.
double chi_square_quantile(int dof, double probability);

}  // namespace auvnav
