#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "auvnav/error.hpp"

namespace auvnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

// Frobenius-norm tolerance on R^T R - I for a stored rotation.
inline constexpr double kOrthonormalTolerance = 1e-9;

/// Proper rotation matrix. Construction validates orthonormality and det = +1,
/// so every instance in the program satisfies both.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}

  /// Validates `m` against `tolerance`; throws kInvalidRotation otherwise.
  static RotationMatrix from_matrix(const Mat3& m, double tolerance = kOrthonormalTolerance);

  /// Nearest proper rotation in the Frobenius sense (symmetric orthogonalization).
  static RotationMatrix nearest(const Mat3& m);

  static RotationMatrix identity() { return RotationMatrix(); }

  const Mat3& matrix() const noexcept { return m_; }
  RotationMatrix transpose() const { return RotationMatrix(m_.transpose(), Unchecked{}); }

  /// Composition; re-projected onto SO(3) only when rounding drift exceeds tolerance.
  RotationMatrix operator*(const RotationMatrix& rhs) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  double orthonormality_error() const;

 private:
  struct Unchecked {};
  RotationMatrix(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;

  friend RotationMatrix project_if_drifted(const Mat3& m);
};

/// Re-orthonormalizes `m` only if it has drifted beyond kOrthonormalTolerance.
RotationMatrix project_if_drifted(const Mat3& m);

/// Intrinsic Z-Y-X (yaw, pitch, roll) angles of the body->navigation rotation.
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

struct GeodeticPosition {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad
  double height = 0.0;     // m, positive up

  void validate() const;
};

/// Nominal navigation state: geodetic position, NED velocity, body->NED attitude.
struct NavState {
  double t = 0.0;
  GeodeticPosition position;
  Vec3 velocity_n = Vec3::Zero();
  RotationMatrix attitude;
};

RotationMatrix rotation_from_euler(const EulerAngles& angles);

/// Inverse of rotation_from_euler away from gimbal lock. At |pitch| = pi/2 the
/// roll is set to zero and the free angle is folded into yaw.
EulerAngles euler_from_rotation(const RotationMatrix& r);

Mat3 skew(const Vec3& v);

/// Rotation about `rotation_vector` by its norm (exponential map).
RotationMatrix rotation_from_vector(const Vec3& rotation_vector);

/// Rotation vector of `r` (logarithm map), angle in [0, pi].
Vec3 vector_from_rotation(const RotationMatrix& r);

/// Geodesic angle between two rotations, rad.
double rotation_distance(const RotationMatrix& a, const RotationMatrix& b);

/// Wraps to (-pi, pi].
double wrap_angle(double angle);

}  // namespace auvnav
