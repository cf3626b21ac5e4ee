#pragma once

#include <span>
#include <string>
#include <vector>

#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"

namespace auvnav {

/// Time-integrated gravity observation expressed in the navigation and body
/// frames frozen at t0: u_b0 = T_{n0}^{b0} u_n0 in the noise-free limit.
struct ObservationPair {
  double t = 0.0;
  Vec3 u_n0 = Vec3::Zero();
  Vec3 u_b0 = Vec3::Zero();
};

enum class AlignmentMethod { kDva, kOba, kSvd };

std::string to_string(AlignmentMethod method);
AlignmentMethod alignment_method_from_string(const std::string& name);

/// For DVA/OBA `rotation` is T_{n0}^{b0} and `euler` describes the body attitude
/// T_{b0}^{n0}; for SVD `rotation` is the mounting T_d^b and `euler` its angles.
struct AlignmentResult {
  RotationMatrix rotation;
  EulerAngles euler;
  AlignmentMethod method = AlignmentMethod::kDva;
  double t0 = 0.0;
  double window = 0.0;
  double condition_indicator = 0.0;
  double residual_rms = 0.0;
};

struct AlignmentOptions {
  double colinearity_gate = 1e-6;  // rad between the navigation-frame observations
  double min_singular_ratio = 1e-3;  // sigma2 / sigma1 for the mounting solver
  double eigen_gap = 1e-12;          // relative gap of the two largest q-method eigenvalues
  int oba_pairs = 12;
};

struct AttitudeTracks {
  double t0 = 0.0;
  std::vector<double> t;
  std::vector<RotationMatrix> nav_from_initial_nav;   // T_{n0}^{n}(t)
  std::vector<RotationMatrix> initial_body_from_body; // T_{b}^{b0}(t)
};

/// Earth-rate and gyro-driven frame rotations since t0; both start at identity.
/// t0 snaps to the nearest IMU interval boundary.
AttitudeTracks decompose_attitude_tracks(std::span<const ImuSample> imu, double lat, double t0);

std::vector<ObservationPair> integrated_observation_pairs(std::span<const ImuSample> imu,
                                                          double lat, double t0,
                                                          std::span<const double> sample_times,
                                                          double height = 0.0);

/// Dual-vector solution from two non-colinear observation pairs.
AlignmentResult dva_align(const ObservationPair& first, const ObservationPair& second,
                          const AlignmentOptions& options = {});

/// Wahba solution over all pairs with the optimal-quaternion eigenproblem.
AlignmentResult oba_align(std::span<const ObservationPair> pairs,
                          const AlignmentOptions& options = {});

/// Runs DVA (pairs at t0 + W/2 and t0 + W) or OBA (evenly spaced pairs) over [t0, t0 + W].
AlignmentResult align_initial(std::span<const ImuSample> imu, double lat, double t0, double window,
                              AlignmentMethod method, const AlignmentOptions& options = {},
                              double height = 0.0);

/// Body->navigation attitude at `t` recomposed from the aligned initial attitude.
RotationMatrix attitude_at(const AlignmentResult& initial, std::span<const ImuSample> imu,
                           double lat, double t);

double heading_at_end(const AlignmentResult& initial, std::span<const ImuSample> imu, double lat,
                      double t_end);

/// Mounting rotation T_d^b minimizing sum |v_body - T v_dvl|^2 over SO(3).
AlignmentResult wahba_svd(std::span<const Vec3> v_body, std::span<const Vec3> v_dvl,
                          const AlignmentOptions& options = {});

/// Mean squared residual of the Wahba objective for a candidate rotation.
double wahba_objective(const RotationMatrix& t_d_b, std::span<const Vec3> v_body,
                       std::span<const Vec3> v_dvl);

/// atan2(sin(psi_hat - psi), cos(psi_hat - psi)).
double cyclic_error(double psi_hat, double psi);

double cmse(std::span<const double> psi_hat, std::span<const double> psi, double lambda = 1.0);

}  // namespace auvnav
