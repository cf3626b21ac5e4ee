#include "auvnav/core.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace auvnav {

namespace {

double drift(const Mat3& m) { return (m.transpose() * m - Mat3::Identity()).norm(); }

Mat3 project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

bool all_finite(const Mat3& m) { return m.allFinite(); }

}  // namespace

RotationMatrix RotationMatrix::from_matrix(const Mat3& m, double tolerance) {
  if (!all_finite(m)) throw NavError(ErrorCode::kInvalidRotation, "non-finite matrix entries");
  const double err = drift(m);
  const double det = m.determinant();
  if (err > tolerance || std::abs(det - 1.0) > tolerance) {
    std::ostringstream os;
    os << "not a proper rotation (|R^T R - I| = " << err << ", det = " << det << ")";
    throw NavError(ErrorCode::kInvalidRotation, os.str());
  }
  return RotationMatrix(m, Unchecked{});
}

RotationMatrix RotationMatrix::nearest(const Mat3& m) {
  if (!all_finite(m)) throw NavError(ErrorCode::kInvalidRotation, "non-finite matrix entries");
  return RotationMatrix(project(m), Unchecked{});
}

RotationMatrix project_if_drifted(const Mat3& m) {
  if (drift(m) > kOrthonormalTolerance || std::abs(m.determinant() - 1.0) > kOrthonormalTolerance) {
    return RotationMatrix::nearest(m);
  }
  return RotationMatrix(m, RotationMatrix::Unchecked{});
}

RotationMatrix RotationMatrix::operator*(const RotationMatrix& rhs) const {
  return project_if_drifted(m_ * rhs.m_);
}

double RotationMatrix::orthonormality_error() const { return drift(m_); }

void GeodeticPosition::validate() const {
  if (!std::isfinite(latitude) || !std::isfinite(longitude) || !std::isfinite(height)) {
    throw NavError(ErrorCode::kInvalidArgument, "non-finite geodetic position");
  }
  if (std::abs(latitude) > kPi / 2.0) {
    throw NavError(ErrorCode::kInvalidArgument, "latitude outside [-pi/2, pi/2]");
  }
  if (longitude <= -kPi || longitude > kPi) {
    throw NavError(ErrorCode::kInvalidArgument, "longitude outside (-pi, pi]");
  }
}

RotationMatrix rotation_from_euler(const EulerAngles& a) {
  if (!std::isfinite(a.roll) || !std::isfinite(a.pitch) || !std::isfinite(a.yaw)) {
    throw NavError(ErrorCode::kInvalidArgument, "non-finite Euler angle");
  }
  const double cr = std::cos(a.roll), sr = std::sin(a.roll);
  const double cp = std::cos(a.pitch), sp = std::sin(a.pitch);
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return project_if_drifted(r);
}

EulerAngles euler_from_rotation(const RotationMatrix& rot) {
  const Mat3& r = rot.matrix();
  if (drift(r) > 1e-6) throw NavError(ErrorCode::kInvalidRotation, "matrix is not orthonormal");
  EulerAngles e;
  const double cos_pitch = std::hypot(r(0, 0), r(1, 0));
  e.pitch = std::atan2(-r(2, 0), cos_pitch);
  if (cos_pitch < 1e-9) {
    // Gimbal lock: only yaw -/+ roll is defined; keep roll at zero.
    e.roll = 0.0;
    e.yaw = wrap_angle(std::atan2(-r(0, 1), r(1, 1)));
  } else {
    e.roll = std::atan2(r(2, 1), r(2, 2));
    e.yaw = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
  }
  return e;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

RotationMatrix rotation_from_vector(const Vec3& rv) {
  const double angle = rv.norm();
  const Mat3 k = skew(rv);
  double a, b;
  if (angle < 1e-6) {
    const double a2 = angle * angle;
    a = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / (angle * angle);
  }
  return project_if_drifted(Mat3::Identity() + a * k + b * k * k);
}

Vec3 vector_from_rotation(const RotationMatrix& r) {
  const Mat3& m = r.matrix();
  const double c = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double angle = std::acos(c);
  const Vec3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  if (angle < 1e-6) {
    return 0.5 * (1.0 + angle * angle / 6.0) * w;
  }
  if (angle > kPi - 1e-4) {
    Eigen::AngleAxisd aa(m);
    return aa.angle() * aa.axis();
  }
  return angle / (2.0 * std::sin(angle)) * w;
}

double rotation_distance(const RotationMatrix& a, const RotationMatrix& b) {
  return vector_from_rotation(a.transpose() * b).norm();
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace auvnav
