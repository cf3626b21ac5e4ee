#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"

namespace auvnav {

enum class ImuGrade { kNavigation, kTactical, kCustom };

std::string to_string(ImuGrade grade);
ImuGrade imu_grade_from_string(const std::string& name);

/// Constant bias plus per-sample white Gaussian noise on each axis.
struct ImuErrorModel {
  Vec3 accel_bias = Vec3::Zero();  // m/s^2
  Vec3 gyro_bias = Vec3::Zero();   // rad/s
  double accel_noise_std = 0.0;    // m/s^2 per sample
  double gyro_noise_std = 0.0;     // rad/s per sample
  ImuGrade grade = ImuGrade::kCustom;

  void validate() const;
  bool is_zero() const;
};

/// Named grade presets, read from a JSON table (see config/imu_grades.json).
std::map<std::string, ImuErrorModel> load_imu_grades(const std::string& path);

/// Path of the grade table shipped with the source tree.
std::string default_imu_grades_path();

/// Preset by name from the shipped table.
ImuErrorModel imu_grade_preset(ImuGrade grade);

/// Four beam unit vectors in the DVL frame.
struct DvlBeamGeometry {
  std::array<Vec3, 4> directions;
  double pitch_angle = 0.0;  // rad from the DVL z axis

  /// Throws kDegenerateGeometry unless all beams are unit and the stack has rank 3.
  void validate() const;
  Eigen::Matrix<double, 4, 3> matrix() const;
};

/// Janus "x" layout: azimuths 45 + 90 i degrees, `pitch_angle` from vertical.
DvlBeamGeometry janus_beam_geometry(double pitch_angle);
/// janus_beam_geometry at 20 degrees.
DvlBeamGeometry default_beam_geometry();

/// Axis-level DVL error model: v~ = (1 + k) o v_d + b, beam noise added after projection.
struct DvlErrorModel {
  Vec3 scale = Vec3::Zero();
  Vec3 bias = Vec3::Zero();                 // m/s
  double beam_noise_std = 0.0;              // m/s
  RotationMatrix mounting;                  // body -> DVL
  Vec3 lever_arm = Vec3::Zero();            // m, body frame

  void validate() const;
};

enum class ProfileKind { kConstantVelocityLine, kLongTurn, kLawnmower, kMooringSway };

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

struct TrajectoryProfile {
  ProfileKind kind = ProfileKind::kConstantVelocityLine;
  double duration = 60.0;   // s
  double speed = 1.5;       // m/s
  double depth = 10.0;      // m below the origin height
  double turn_radius = 50.0;       // long_turn
  double sway_amplitude = 0.5;     // mooring_sway, m
  double sway_period = 5.0;        // mooring_sway, s
  double attitude_amplitude = 0.02;  // mooring_sway roll amplitude, rad
  double leg_length = 100.0;       // lawnmower
  double leg_spacing = 20.0;       // lawnmower
  // Optional body-frame excitation on line/turn/lawnmower legs.
  double surge_amplitude = 0.0;    // m/s
  double crab_amplitude = 0.0;     // rad, heading offset from course
  double heave_amplitude = 0.0;    // m/s, vertical velocity
  double excitation_period = 20.0; // s
  double imu_rate = 100.0;
  double dvl_rate = 1.0;
  double gnss_rate = 1.0;

  void validate() const;
};

/// Ground truth sampled at imu_rate, t = 0 .. duration inclusive.
std::vector<NavState> generate_trajectory(const TrajectoryProfile& profile,
                                          const GeodeticPosition& origin,
                                          double initial_heading);

/// Error-free IMU stream whose mechanization reproduces `traj`; one sample per
/// interval, stamped at the interval end (size traj.size() - 1).
std::vector<ImuSample> ideal_imu_from_trajectory(std::span<const NavState> traj);

std::vector<ImuSample> corrupt_imu(std::span<const ImuSample> ideal, const ImuErrorModel& model,
                                   std::uint64_t seed);

/// True DVL-frame velocity T_b^d (T_n^b v_n + w_nb x l) at trajectory index `i`.
Vec3 true_dvl_velocity(std::span<const NavState> traj, std::size_t i, const DvlErrorModel& model);

std::vector<DvlBeamSample> simulate_dvl(std::span<const NavState> traj,
                                        const DvlBeamGeometry& geometry,
                                        const DvlErrorModel& model, double rate,
                                        std::uint64_t seed);

std::vector<GnssVelocitySample> simulate_gnss_velocity(std::span<const NavState> traj, double rate,
                                                       double noise_std, std::uint64_t seed);

struct BeamOutage {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<int> beams;  // zero-based beam indices
};

/// Clears validity flags of the listed beams for t_start <= t <= t_end.
std::vector<DvlBeamSample> apply_beam_outage(std::span<const DvlBeamSample> beams,
                                             std::span<const BeamOutage> schedule);

/// Independent, reproducible seed for a named stream derived from a scenario seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace auvnav
