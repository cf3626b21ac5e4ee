#include "auvnav/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "auvnav/strapdown.hpp"

namespace auvnav {

namespace {

double vector_angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

double pair_residual(const RotationMatrix& r, std::span<const ObservationPair> pairs) {
  double sq = 0.0;
  for (const ObservationPair& p : pairs) sq += (p.u_b0 - r * p.u_n0).squaredNorm();
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

struct ImuTimeline {
  std::size_t first = 0;  // first sample whose interval starts at or after t0
  double t0 = 0.0;        // snapped start
  std::vector<double> dt; // per-sample interval length
};

ImuTimeline timeline(std::span<const ImuSample> imu, double t0) {
  if (imu.size() < 2) throw NavError(ErrorCode::kInvalidArgument, "need at least 2 IMU samples");
  ImuTimeline tl;
  tl.dt.resize(imu.size());
  tl.dt[0] = imu[1].t - imu[0].t;
  for (std::size_t i = 1; i < imu.size(); ++i) {
    tl.dt[i] = imu[i].t - imu[i - 1].t;
    if (!(tl.dt[i] > 0.0)) {
      std::ostringstream os;
      os << "IMU timestamp at index " << i << " does not increase";
      throw NavError(ErrorCode::kNonMonotoneTime, os.str());
    }
  }
  const double half = 0.5 * tl.dt[0];
  std::size_t i = 0;
  while (i < imu.size() && imu[i].t - tl.dt[i] < t0 - half) ++i;
  if (i == imu.size()) throw NavError(ErrorCode::kInvalidArgument, "t0 is beyond the IMU record");
  tl.first = i;
  tl.t0 = imu[i].t - tl.dt[i];
  return tl;
}

}  // namespace

std::string to_string(AlignmentMethod method) {
  switch (method) {
    case AlignmentMethod::kDva: return "DVA";
    case AlignmentMethod::kOba: return "OBA";
    case AlignmentMethod::kSvd: return "SVD";
  }
  return "DVA";
}

AlignmentMethod alignment_method_from_string(const std::string& name) {
  if (name == "DVA" || name == "dva") return AlignmentMethod::kDva;
  if (name == "OBA" || name == "oba") return AlignmentMethod::kOba;
  if (name == "SVD" || name == "svd") return AlignmentMethod::kSvd;
  throw NavError(ErrorCode::kInvalidArgument, "unknown alignment method '" + name + "'");
}

AttitudeTracks decompose_attitude_tracks(std::span<const ImuSample> imu, double lat, double t0) {
  if (!(std::abs(lat) < kPi / 2.0)) throw NavError(ErrorCode::kInvalidArgument, "latitude at pole");
  const ImuTimeline tl = timeline(imu, t0);
  const Vec3 w_ie = earth_rate_n(lat);
  AttitudeTracks tracks;
  tracks.t0 = tl.t0;
  tracks.t.push_back(tl.t0);
  tracks.nav_from_initial_nav.emplace_back();
  tracks.initial_body_from_body.emplace_back();
  RotationMatrix body;
  for (std::size_t i = tl.first; i < imu.size(); ++i) {
    body = body * rotation_from_vector(imu[i].angular_rate_b * tl.dt[i]);
    tracks.t.push_back(imu[i].t);
    tracks.nav_from_initial_nav.push_back(rotation_from_vector(-w_ie * (imu[i].t - tl.t0)));
    tracks.initial_body_from_body.push_back(body);
  }
  return tracks;
}

std::vector<ObservationPair> integrated_observation_pairs(std::span<const ImuSample> imu,
                                                          double lat, double t0,
                                                          std::span<const double> sample_times,
                                                          double height) {
  if (!(std::abs(lat) < kPi / 2.0)) throw NavError(ErrorCode::kInvalidArgument, "latitude at pole");
  const ImuTimeline tl = timeline(imu, t0);
  const double dt0 = tl.dt[tl.first];

  std::vector<std::size_t> order(sample_times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return sample_times[a] < sample_times[b]; });
  for (double st : sample_times) {
    if (st - tl.t0 < 2.0 * dt0 - 1e-9) {
      throw NavError(ErrorCode::kInvalidArgument,
                     "observation window shorter than two IMU periods");
    }
    if (st > imu.back().t + 0.5 * dt0) {
      throw NavError(ErrorCode::kInvalidArgument, "sample time beyond the IMU record");
    }
  }

  const Vec3 w_ie = earth_rate_n(lat);
  const Vec3 up_force = -gravity_n(GeodeticPosition{lat, 0.0, height});
  std::vector<ObservationPair> out(sample_times.size());
  Vec3 u_n = Vec3::Zero();
  Vec3 u_b = Vec3::Zero();
  RotationMatrix body;
  std::size_t next = 0;
  for (std::size_t i = tl.first; i < imu.size() && next < order.size(); ++i) {
    const double dt = tl.dt[i];
    const Vec3 half_turn = imu[i].angular_rate_b * (0.5 * dt);
    const RotationMatrix body_mid = body * rotation_from_vector(half_turn);
    const double t_mid = imu[i].t - 0.5 * dt - tl.t0;
    // T_n^{n0} at the interval midpoint.
    const RotationMatrix nav_mid = rotation_from_vector(w_ie * t_mid);
    u_b += (body_mid * imu[i].specific_force_b) * dt;
    u_n += (nav_mid * up_force) * dt;
    body = body_mid * rotation_from_vector(half_turn);
    while (next < order.size() && sample_times[order[next]] < imu[i].t + 0.5 * dt) {
      out[order[next]] = ObservationPair{imu[i].t, u_n, u_b};
      ++next;
    }
  }
  return out;
}

AlignmentResult dva_align(const ObservationPair& first, const ObservationPair& second,
                          const AlignmentOptions& options) {
  const double angle = vector_angle(first.u_n0, second.u_n0);
  if (!(angle > options.colinearity_gate)) {
    std::ostringstream os;
    os << "observations are colinear (" << angle << " rad apart)";
    throw NavError(ErrorCode::kDegenerateGeometry, os.str());
  }
  Mat3 m_n, m_b;
  m_n.row(0) = first.u_n0.transpose();
  m_n.row(1) = second.u_n0.transpose();
  m_n.row(2) = first.u_n0.cross(second.u_n0).transpose();
  m_b.row(0) = first.u_b0.transpose();
  m_b.row(1) = second.u_b0.transpose();
  m_b.row(2) = first.u_b0.cross(second.u_b0).transpose();

  Eigen::JacobiSVD<Mat3> svd(m_n);
  const double smallest = svd.singularValues()(2);
  if (!(smallest > 0.0) || smallest < 1e-14 * svd.singularValues()(0)) {
    throw NavError(ErrorCode::kDegenerateGeometry, "navigation observation matrix is singular");
  }
  // Stacked rows satisfy M_b = M_n T^T, so M_n^{-1} M_b = T_{b0}^{n0}.
  const Mat3 body_to_nav = m_n.fullPivLu().solve(m_b);
  AlignmentResult r;
  r.rotation = RotationMatrix::nearest(body_to_nav).transpose();
  r.euler = euler_from_rotation(r.rotation.transpose());
  r.method = AlignmentMethod::kDva;
  r.condition_indicator = smallest;
  const ObservationPair both[] = {first, second};
  r.residual_rms = pair_residual(r.rotation, both);
  r.window = std::max(first.t, second.t);
  return r;
}

AlignmentResult oba_align(std::span<const ObservationPair> pairs, const AlignmentOptions& options) {
  if (pairs.size() < 2) throw NavError(ErrorCode::kInvalidArgument, "OBA needs at least 2 pairs");
  double spread = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    scale = std::max(scale, pairs[i].u_n0.squaredNorm());
    for (std::size_t j = 0; j < i; ++j) {
      spread = std::max(spread, vector_angle(pairs[i].u_n0, pairs[j].u_n0));
    }
  }
  if (!(spread > options.colinearity_gate)) {
    std::ostringstream os;
    os << "observations are colinear (max spread " << spread << " rad)";
    throw NavError(ErrorCode::kDegenerateGeometry, os.str());
  }

  // Attitude profile matrix for u_b = A u_n.
  Mat3 b = Mat3::Zero();
  for (const ObservationPair& p : pairs) b += p.u_b0 * p.u_n0.transpose();
  b /= scale;

  const Mat3 s = b + b.transpose();
  const double sigma = b.trace();
  const Vec3 z(b(1, 2) - b(2, 1), b(2, 0) - b(0, 2), b(0, 1) - b(1, 0));
  Eigen::Matrix4d k;
  k.topLeftCorner<3, 3>() = s - sigma * Mat3::Identity();
  k.topRightCorner<3, 1>() = z;
  k.bottomLeftCorner<1, 3>() = z.transpose();
  k(3, 3) = sigma;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(k);
  const auto& values = eig.eigenvalues();  // ascending
  const double gap = values(3) - values(2);
  if (!(gap > options.eigen_gap * std::max(std::abs(values(3)), 1e-300))) {
    throw NavError(ErrorCode::kAmbiguousAttitude, "two largest profile eigenvalues coincide");
  }
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  const Vec3 qv = q.head<3>();
  const double q4 = q(3);
  const Mat3 a = (q4 * q4 - qv.squaredNorm()) * Mat3::Identity() + 2.0 * qv * qv.transpose() -
                 2.0 * q4 * skew(qv);

  Eigen::JacobiSVD<Mat3> svd_b(b);
  AlignmentResult r;
  r.rotation = RotationMatrix::nearest(a);
  r.euler = euler_from_rotation(r.rotation.transpose());
  r.method = AlignmentMethod::kOba;
  r.condition_indicator = svd_b.singularValues()(1) / svd_b.singularValues()(0);
  r.residual_rms = pair_residual(r.rotation, pairs);
  for (const ObservationPair& p : pairs) r.window = std::max(r.window, p.t);
  return r;
}

AlignmentResult align_initial(std::span<const ImuSample> imu, double lat, double t0, double window,
                              AlignmentMethod method, const AlignmentOptions& options,
                              double height) {
  if (!(window > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "window must be positive");
  std::vector<double> times;
  if (method == AlignmentMethod::kDva) {
    times = {t0 + 0.5 * window, t0 + window};
  } else if (method == AlignmentMethod::kOba) {
    const int n = std::max(2, options.oba_pairs);
    for (int j = 1; j <= n; ++j) times.push_back(t0 + window * j / n);
  } else {
    throw NavError(ErrorCode::kInvalidArgument, "initial alignment supports DVA and OBA only");
  }
  const auto pairs = integrated_observation_pairs(imu, lat, t0, times, height);
  AlignmentResult r = method == AlignmentMethod::kDva ? dva_align(pairs[0], pairs[1], options)
                                                      : oba_align(pairs, options);
  r.t0 = timeline(imu, t0).t0;
  r.window = window;
  return r;
}

RotationMatrix attitude_at(const AlignmentResult& initial, std::span<const ImuSample> imu,
                           double lat, double t) {
  if (t < initial.t0) throw NavError(ErrorCode::kInvalidArgument, "t_end precedes t0");
  const AttitudeTracks tracks = decompose_attitude_tracks(imu, lat, initial.t0);
  std::size_t k = 0;
  while (k + 1 < tracks.t.size() && tracks.t[k + 1] <= t + 1e-9) ++k;
  if (t > tracks.t.back() + 1e-9) {
    throw NavError(ErrorCode::kInvalidArgument, "t_end is beyond the IMU record");
  }
  return tracks.nav_from_initial_nav[k] * initial.rotation.transpose() *
         tracks.initial_body_from_body[k];
}

double heading_at_end(const AlignmentResult& initial, std::span<const ImuSample> imu, double lat,
                      double t_end) {
  return euler_from_rotation(attitude_at(initial, imu, lat, t_end)).yaw;
}

AlignmentResult wahba_svd(std::span<const Vec3> v_body, std::span<const Vec3> v_dvl,
                          const AlignmentOptions& options) {
  if (v_body.size() != v_dvl.size()) {
    throw NavError(ErrorCode::kLengthMismatch, "velocity sequences differ in length");
  }
  if (v_body.size() < 2) throw NavError(ErrorCode::kInvalidArgument, "need at least 2 velocity pairs");
  Mat3 b = Mat3::Zero();
  for (std::size_t i = 0; i < v_body.size(); ++i) b += v_body[i] * v_dvl[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3& sv = svd.singularValues();
  const double ratio = sv(0) > 0.0 ? sv(1) / sv(0) : 0.0;
  if (!(ratio >= options.min_singular_ratio)) {
    std::ostringstream os;
    os << "velocity set lacks excitation (sigma2/sigma1 = " << ratio << ")";
    throw NavError(ErrorCode::kInsufficientExcitation, os.str());
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  AlignmentResult r;
  r.rotation = RotationMatrix::nearest(u * d * v.transpose());
  r.euler = euler_from_rotation(r.rotation);
  r.method = AlignmentMethod::kSvd;
  r.condition_indicator = ratio;
  r.residual_rms = std::sqrt(wahba_objective(r.rotation, v_body, v_dvl));
  return r;
}

double wahba_objective(const RotationMatrix& t_d_b, std::span<const Vec3> v_body,
                       std::span<const Vec3> v_dvl) {
  double sq = 0.0;
  for (std::size_t i = 0; i < v_body.size(); ++i) sq += (v_body[i] - t_d_b * v_dvl[i]).squaredNorm();
  return sq / static_cast<double>(v_body.size());
}

double cyclic_error(double psi_hat, double psi) {
  const double d = psi_hat - psi;
  return wrap_angle(std::atan2(std::sin(d), std::cos(d)));
}

double cmse(std::span<const double> psi_hat, std::span<const double> psi, double lambda) {
  if (psi_hat.size() != psi.size()) {
    throw NavError(ErrorCode::kLengthMismatch, "heading sequences differ in length");
  }
  if (!(lambda > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "lambda must be positive");
  if (psi.empty()) throw NavError(ErrorCode::kInvalidArgument, "CMSE of empty sequences");
  double sq = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double e = cyclic_error(psi_hat[i], psi[i]);
    sq += e * e;
  }
  return lambda * sq / static_cast<double>(psi.size());
}

}  // namespace auvnav
