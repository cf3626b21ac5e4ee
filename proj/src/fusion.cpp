#include "auvnav/fusion.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "auvnav/strapdown.hpp"

namespace auvnav {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kPsdTolerance = 1e-10;
constexpr double kMaxMisalignment = 0.5;  // rad, small-angle validity

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

void symmetrize(ErrorCovariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

void check_diagonal(const ErrorCovariance& p) {
  for (int i = 0; i < kErrorStateSize; ++i) {
    if (!std::isfinite(p(i, i)) || p(i, i) < -kPsdTolerance) {
      throw NavError(ErrorCode::kFilterDiverged, "covariance diagonal lost positivity");
    }
  }
}

void check_psd(const ErrorCovariance& p) {
  check_diagonal(p);
  Eigen::SelfAdjointEigenSolver<ErrorCovariance> eig(p, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues()(0) < -kPsdTolerance) {
    std::ostringstream os;
    os << "covariance is not positive semidefinite (min eigenvalue " << eig.eigenvalues()(0) << ")";
    throw NavError(ErrorCode::kFilterDiverged, os.str());
  }
}

FilterState fold(const FilterState& fs, const ErrorVector& x) {
  const ErrorState e = ErrorState::from_vector(x);
  if (!(e.epsilon.norm() < kMaxMisalignment)) {
    throw NavError(ErrorCode::kFilterDiverged, "misalignment estimate left the small-angle regime");
  }
  FilterState out = fs;
  out.nominal.velocity_n -= e.dv_n;
  out.nominal.attitude = rotation_from_vector(e.epsilon) * fs.nominal.attitude;
  out.accel_bias -= e.accel_bias;
  out.gyro_bias -= e.gyro_bias;
  return out;
}

UpdateResult kalman_update(const FilterState& fs, const VecX& dz, const MatX& h, const MatX& r,
                           const FusionConfig& cfg, UpdateType type, int beams) {
  UpdateResult out;
  out.h = h;
  const ErrorCovariance& p = fs.error_cov;
  const MatX s = h * p * h.transpose() + r;
  Eigen::LDLT<MatX> s_ldlt(s);
  if (s_ldlt.info() != Eigen::Success || !(s_ldlt.vectorD().array() > 0.0).all()) {
    throw NavError(ErrorCode::kFilterDiverged, "innovation covariance is not invertible");
  }
  const double nis = dz.dot(s_ldlt.solve(dz));
  out.record.t = fs.t;
  out.record.innovation = dz;
  out.record.innovation_cov = s;
  out.record.nis = nis;
  out.record.beams_used = beams;

  if (nis > chi_square_quantile(static_cast<int>(dz.size()), cfg.gate_probability)) {
    out.state = fs;
    out.record.type = UpdateType::kRejected;
    out.record.estimate = fs.nominal;
    return out;
  }

  const MatX k = s_ldlt.solve(h * p).transpose();  // P H^T S^{-1}
  const ErrorVector x = k * dz;
  const ErrorCovariance ikh = ErrorCovariance::Identity() - k * h;
  ErrorCovariance p_post = ikh * p * ikh.transpose() + k * r * k.transpose();
  symmetrize(p_post);
  check_psd(p_post);

  out.state = fold(fs, x);
  out.state.error_cov = p_post;
  out.record.type = type;
  out.record.estimate = out.state.nominal;
  return out;
}

MatX loose_dvl_covariance(const FusionConfig& cfg, const Eigen::MatrixXd& beams) {
  if (cfg.loose_noise == LooseNoiseSource::kUserSet) {
    return Mat3::Identity() * (cfg.dvl_velocity_noise_std * cfg.dvl_velocity_noise_std);
  }
  const Mat3 info = beams.transpose() * beams;
  return info.inverse() * (cfg.beam_noise_std * cfg.beam_noise_std);
}

Eigen::MatrixXd valid_beam_matrix(const DvlBeamSample& sample, const DvlBeamGeometry& geometry) {
  Eigen::MatrixXd t(sample.valid_count(), 3);
  int row = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (sample.valid[i]) t.row(row++) = geometry.directions[i].transpose();
  }
  return t;
}

DvlBeamSample with_sign(DvlBeamSample s, double sign) {
  if (sign != 1.0) {
    for (double& y : s.beam_velocity) y *= sign;
  }
  return s;
}

}  // namespace

ErrorState ErrorState::from_vector(const ErrorVector& x) {
  return ErrorState{x.segment<3>(0), x.segment<3>(3), x.segment<3>(6), x.segment<3>(9)};
}

ErrorVector ErrorState::to_vector() const {
  ErrorVector x;
  x << dv_n, epsilon, accel_bias, gyro_bias;
  return x;
}

std::string to_string(CouplingMode mode) {
  switch (mode) {
    case CouplingMode::kLooselyCoupled: return "lc";
    case CouplingMode::kTightlyCoupled: return "tc";
    case CouplingMode::kFreeInertial: return "free";
  }
  return "lc";
}

CouplingMode coupling_mode_from_string(const std::string& name) {
  if (name == "lc" || name == "loosely_coupled") return CouplingMode::kLooselyCoupled;
  if (name == "tc" || name == "tightly_coupled") return CouplingMode::kTightlyCoupled;
  if (name == "free" || name == "free_inertial") return CouplingMode::kFreeInertial;
  throw NavError(ErrorCode::kInvalidArgument, "unknown fusion mode '" + name + "'");
}

std::string to_string(UpdateType type) {
  switch (type) {
    case UpdateType::kNone: return "none";
    case UpdateType::kLoose: return "loose";
    case UpdateType::kTight: return "tight";
    case UpdateType::kGap: return "gap";
    case UpdateType::kRejected: return "rejected";
  }
  return "none";
}

void FusionConfig::validate() const {
  for (double q : process_noise_psd) {
    if (!(q > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "process noise PSD must be positive");
  }
  for (double s : initial_std) {
    if (!(s > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "initial std must be positive");
  }
  if (!(dvl_velocity_noise_std > 0.0) || !(beam_noise_std > 0.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "measurement noise must be positive");
  }
  if (adaptive && innovation_window < 5) {
    throw NavError(ErrorCode::kInvalidArgument, "innovation window must be at least 5");
  }
  if (!(gate_probability > 0.0 && gate_probability < 1.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "gate probability must lie in (0, 1)");
  }
  if (beam_sign != 1.0 && beam_sign != -1.0) {
    throw NavError(ErrorCode::kInvalidArgument, "beam sign must be +1 or -1");
  }
  geometry.validate();
}

Vec3 ls_beam_velocity(const DvlBeamSample& sample, const DvlBeamGeometry& geometry) {
  const int m = sample.valid_count();
  if (m < 3) {
    std::ostringstream os;
    os << "least-squares velocity needs 3 valid beams, got " << m;
    throw NavError(ErrorCode::kInsufficientBeams, os.str());
  }
  const Eigen::MatrixXd t = valid_beam_matrix(sample, geometry);
  Eigen::VectorXd y(m);
  int row = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (sample.valid[i]) y(row++) = sample.beam_velocity[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
  const auto& sv = svd.singularValues();
  if (!(sv(2) > 1e-9 * sv(0))) {
    throw NavError(ErrorCode::kRankDeficient, "valid beam directions do not span 3D");
  }
  const Mat3 normal = t.transpose() * t;
  return normal.ldlt().solve(t.transpose() * y);
}

FilterState make_filter_state(const NavState& nominal, const FusionConfig& cfg) {
  FilterState fs;
  fs.nominal = nominal;
  fs.t = nominal.t;
  for (int i = 0; i < kErrorStateSize; ++i) {
    const double s = cfg.initial_std[static_cast<std::size_t>(i)];
    fs.error_cov(i, i) = s * s;
  }
  return fs;
}

ErrorCovariance error_dynamics(const RotationMatrix& attitude, const Vec3& specific_force_b) {
  const Mat3& c = attitude.matrix();
  ErrorCovariance f = ErrorCovariance::Zero();
  f.block<3, 3>(0, 3) = skew(c * specific_force_b);
  f.block<3, 3>(0, 6) = -c;
  f.block<3, 3>(3, 9) = c;
  return f;
}

FilterState ekf_predict(const FilterState& fs, const ImuSample& imu, double dt,
                        const FusionConfig& cfg) {
  if (!(dt > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "prediction step must be positive");
  ImuSample corrected = imu;
  corrected.specific_force_b = imu.specific_force_b - fs.accel_bias;
  corrected.angular_rate_b = imu.angular_rate_b - fs.gyro_bias;

  const ErrorCovariance f = error_dynamics(fs.nominal.attitude, corrected.specific_force_b);
  const ErrorCovariance fdt = f * dt;
  // F is nilpotent of order 3, so this is the exact transition matrix.
  const ErrorCovariance phi = ErrorCovariance::Identity() + fdt + 0.5 * fdt * fdt;

  FilterState out = fs;
  out.nominal = mechanize_step(fs.nominal, corrected, dt);
  out.t = fs.t + dt;
  out.error_cov = phi * fs.error_cov * phi.transpose();
  for (int i = 0; i < kErrorStateSize; ++i) {
    out.error_cov(i, i) += cfg.process_noise_psd[static_cast<std::size_t>(i)] * dt;
  }
  symmetrize(out.error_cov);
  check_diagonal(out.error_cov);
  return out;
}

UpdateResult ekf_update_loose(const FilterState& fs, const Vec3& v_dvl, const FusionConfig& cfg,
                              const std::optional<Eigen::MatrixXd>& measurement_cov) {
  if (!v_dvl.allFinite()) throw NavError(ErrorCode::kInvalidArgument, "non-finite DVL velocity");
  const Mat3 c_nb = fs.nominal.attitude.matrix().transpose();
  const Vec3& v = fs.nominal.velocity_n;
  const Vec3 v_body_meas = cfg.mounting * v_dvl;

  VecX dz = c_nb * v - v_body_meas;
  MatX h = MatX::Zero(3, kErrorStateSize);
  h.block<3, 3>(0, 0) = c_nb;
  h.block<3, 3>(0, 3) = -c_nb * skew(v);

  MatX r;
  if (measurement_cov) {
    r = *measurement_cov;
  } else {
    const Mat3 m = cfg.mounting.matrix();
    r = m * loose_dvl_covariance(cfg, cfg.geometry.matrix()) * m.transpose();
  }
  if (r.rows() != 3 || r.cols() != 3) {
    throw NavError(ErrorCode::kInvalidArgument, "loose measurement covariance must be 3x3");
  }
  return kalman_update(fs, dz, h, r, cfg, UpdateType::kLoose, 0);
}

UpdateResult ekf_update_tight(const FilterState& fs, const DvlBeamSample& sample,
                              const FusionConfig& cfg,
                              const std::optional<Eigen::MatrixXd>& measurement_cov) {
  const int m = sample.valid_count();
  if (m == 0) {
    UpdateResult out;
    out.state = fs;
    out.record.t = fs.t;
    out.record.estimate = fs.nominal;
    out.record.type = UpdateType::kGap;
    return out;
  }
  const Mat3 c_nb = fs.nominal.attitude.matrix().transpose();
  const Vec3& v = fs.nominal.velocity_n;
  const Vec3 v_body = c_nb * v;
  const Mat3 c_nb_vx = c_nb * skew(v);

  VecX dz(m);
  MatX h = MatX::Zero(m, kErrorStateSize);
  int row = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!sample.valid[i]) continue;
    const Vec3 b_body = cfg.mounting * cfg.geometry.directions[i];
    dz(row) = b_body.dot(v_body) - cfg.beam_sign * sample.beam_velocity[i];
    h.block<1, 3>(row, 0) = b_body.transpose() * c_nb;
    h.block<1, 3>(row, 3) = -b_body.transpose() * c_nb_vx;
    ++row;
  }
  MatX r = measurement_cov ? *measurement_cov
                           : MatX(MatX::Identity(m, m) * (cfg.beam_noise_std * cfg.beam_noise_std));
  if (r.rows() != m || r.cols() != m) {
    throw NavError(ErrorCode::kInvalidArgument, "tight measurement covariance has wrong size");
  }
  return kalman_update(fs, dz, h, r, cfg, UpdateType::kTight, m);
}

Eigen::MatrixXd adapt_measurement_noise(std::span<const Eigen::VectorXd> innovations,
                                        const Eigen::MatrixXd& h, const ErrorCovariance& p,
                                        double floor) {
  if (innovations.size() < 2) {
    throw NavError(ErrorCode::kInvalidArgument, "need at least 2 innovations");
  }
  const Eigen::Index m = innovations.front().size();
  for (const VecX& v : innovations) {
    if (v.size() != m) throw NavError(ErrorCode::kLengthMismatch, "innovation dimension changed");
  }
  if (h.rows() != m || h.cols() != kErrorStateSize) {
    throw NavError(ErrorCode::kLengthMismatch, "measurement matrix does not match innovations");
  }
  VecX mean = VecX::Zero(m);
  for (const VecX& v : innovations) mean += v;
  mean /= static_cast<double>(innovations.size());
  MatX c = MatX::Zero(m, m);
  for (const VecX& v : innovations) c += (v - mean) * (v - mean).transpose();
  c /= static_cast<double>(innovations.size() - 1);

  MatX d = c - h * p * h.transpose();
  d = 0.5 * (d + d.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> eig(d);
  VecX values = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

FusionRun run_fusion(std::span<const ImuSample> imu, std::span<const DvlBeamSample> dvl,
                     const NavState& initial, const FusionConfig& cfg) {
  return run_fusion(imu, dvl, {}, initial, cfg);
}

FusionRun run_fusion(std::span<const ImuSample> imu, std::span<const DvlBeamSample> dvl_in,
                     std::span<const BeamOutage> outages, const NavState& initial,
                     const FusionConfig& cfg) {
  cfg.validate();
  if (imu.empty()) throw NavError(ErrorCode::kInvalidArgument, "empty IMU stream");
  std::vector<DvlBeamSample> dvl = outages.empty()
                                       ? std::vector<DvlBeamSample>(dvl_in.begin(), dvl_in.end())
                                       : apply_beam_outage(dvl_in, outages);
  for (std::size_t i = 1; i < dvl.size(); ++i) {
    if (!(dvl[i].t > dvl[i - 1].t)) {
      throw NavError(ErrorCode::kNonMonotoneTime, "DVL timestamps are not increasing");
    }
  }

  FusionRun run;
  run.trajectory.reserve(imu.size() + 1);
  run.trajectory.push_back(initial);
  FilterState fs = make_filter_state(initial, cfg);

  std::deque<VecX> window;
  std::optional<MatX> adapted_r;
  std::size_t next_dvl = 0;
  constexpr double kTimeSlack = 1e-9;
  while (next_dvl < dvl.size() && dvl[next_dvl].t < initial.t - kTimeSlack) ++next_dvl;

  auto process_epoch = [&](const DvlBeamSample& raw) {
    const DvlBeamSample sample = with_sign(raw, cfg.beam_sign);
    const int beams = sample.valid_count();
    UpdateResult upd;
    bool updated = false;
    if (cfg.mode == CouplingMode::kLooselyCoupled) {
      if (beams < 3) {
        upd.state = fs;
        upd.record.t = fs.t;
        upd.record.estimate = fs.nominal;
        upd.record.type = UpdateType::kGap;
        upd.record.beams_used = beams;
      } else {
        Vec3 v = ls_beam_velocity(sample, cfg.geometry);
        if (cfg.calibration) v = apply_calibration(v, *cfg.calibration, cfg.calibration_mode);
        std::optional<MatX> r = adapted_r;
        if (!r) {
          const Mat3 m = cfg.mounting.matrix();
          r = MatX(m * loose_dvl_covariance(cfg, valid_beam_matrix(sample, cfg.geometry)) *
                   m.transpose());
        }
        upd = ekf_update_loose(fs, v, cfg, r);
        upd.record.beams_used = beams;
        updated = true;
      }
    } else {
      std::optional<MatX> r;
      if (adapted_r && adapted_r->rows() == beams) r = adapted_r;
      upd = ekf_update_tight(fs, sample, cfg, r);
      updated = beams > 0;
    }

    if (cfg.adaptive && updated) {
      if (!window.empty() && window.back().size() != upd.record.innovation.size()) window.clear();
      window.push_back(upd.record.innovation);
      while (static_cast<int>(window.size()) > cfg.innovation_window) window.pop_front();
      if (static_cast<int>(window.size()) == cfg.innovation_window) {
        const std::vector<VecX> w(window.begin(), window.end());
        adapted_r = adapt_measurement_noise(w, upd.h, fs.error_cov, cfg.adaptive_floor);
        run.adapted_r.push_back(*adapted_r);
      }
    }
    fs = upd.state;
    run.log.epochs.push_back(std::move(upd.record));
  };

  auto drain_dvl = [&]() {
    while (next_dvl < dvl.size() && dvl[next_dvl].t <= fs.t + kTimeSlack) {
      if (cfg.mode != CouplingMode::kFreeInertial) process_epoch(dvl[next_dvl]);
      ++next_dvl;
    }
  };

  drain_dvl();
  double t_prev = initial.t;
  for (std::size_t i = 0; i < imu.size(); ++i) {
    const double dt = imu[i].t - t_prev;
    if (!(dt > 0.0)) {
      std::ostringstream os;
      os << "IMU timestamp at index " << i << " does not advance";
      throw NavError(ErrorCode::kNonMonotoneTime, os.str());
    }
    fs = ekf_predict(fs, imu[i], dt, cfg);
    fs.t = imu[i].t;
    fs.nominal.t = imu[i].t;
    t_prev = imu[i].t;
    drain_dvl();
    run.trajectory.push_back(fs.nominal);
  }
  return run;
}

double chi_square_quantile(int dof, double probability) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, probability);
}

std::pair<double, double> chi_square_bounds(int dof, double probability) {
  boost::math::chi_squared dist(dof);
  const double tail = 0.5 * (1.0 - probability);
  return {boost::math::quantile(dist, tail), boost::math::quantile(dist, 1.0 - tail)};
}

}  // namespace auvnav
