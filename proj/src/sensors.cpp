#include "auvnav/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "auvnav/strapdown.hpp"
#include "imu_grades_embedded.hpp"

namespace auvnav {

namespace {

constexpr double kStandardGravity = 9.80665;

ImuErrorModel grade_from_json(const nlohmann::json& j, ImuGrade grade) {
  ImuErrorModel m;
  const double accel_bias = j.at("accel_bias_ug").get<double>() * 1e-6 * kStandardGravity;
  const double gyro_bias = j.at("gyro_bias_deg_per_hour").get<double>() * kDegToRad / 3600.0;
  m.accel_bias = Vec3::Constant(accel_bias);
  m.gyro_bias = Vec3::Constant(gyro_bias);
  m.accel_noise_std = j.at("accel_noise_std").get<double>();
  m.gyro_noise_std = j.at("gyro_noise_std").get<double>();
  m.grade = grade;
  m.validate();
  return m;
}

std::map<std::string, ImuErrorModel> parse_grades(const nlohmann::json& doc) {
  std::map<std::string, ImuErrorModel> out;
  for (const auto& [name, entry] : doc.items()) {
    ImuGrade grade = ImuGrade::kCustom;
    if (name == "navigation") grade = ImuGrade::kNavigation;
    if (name == "tactical") grade = ImuGrade::kTactical;
    out.emplace(name, grade_from_json(entry, grade));
  }
  return out;
}

// Integral over u in [0, 1] of sin(heading(u)) for the raised-cosine half turn.
double half_turn_lateral_factor() {
  static const double value = [] {
    constexpr int n = 4000;  // even, Simpson
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double u = static_cast<double>(i) / n;
      const double heading = kPi * (u - std::sin(2.0 * kPi * u) / (2.0 * kPi));
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * std::sin(heading);
    }
    return acc / (3.0 * n);
  }();
  return value;
}

struct Kinematics {
  Vec3 velocity_n;
  EulerAngles euler;
};

class ProfileKinematics {
 public:
  ProfileKinematics(const TrajectoryProfile& p, double heading0) : p_(p), heading0_(heading0) {
    if (p.kind == ProfileKind::kLawnmower) {
      leg_time_ = p.leg_length / p.speed;
      turn_time_ = p.leg_spacing / (p.speed * half_turn_lateral_factor());
    }
  }

  Kinematics at(double t) const {
    if (p_.kind == ProfileKind::kMooringSway) return mooring(t);
    const double w = 2.0 * kPi / p_.excitation_period;
    const double speed = p_.speed + p_.surge_amplitude * std::sin(w * t);
    const double course = course_at(t);
    Kinematics k;
    k.velocity_n = {speed * std::cos(course), speed * std::sin(course),
                    p_.heave_amplitude * std::sin(w * t + 2.0)};
    k.euler.yaw = wrap_angle(course + p_.crab_amplitude * std::sin(w * t + 1.0));
    return k;
  }

 private:
  double course_at(double t) const {
    switch (p_.kind) {
      case ProfileKind::kConstantVelocityLine:
        return heading0_;
      case ProfileKind::kLongTurn:
        return heading0_ + p_.speed / p_.turn_radius * t;
      case ProfileKind::kLawnmower: {
        // leg, turn right, leg, turn left, ... ; headings alternate between h0 and h0 + pi.
        const double cycle = 2.0 * (leg_time_ + turn_time_);
        const int cycles = static_cast<int>(std::floor(t / cycle));
        double tau = t - cycles * cycle;
        (void)cycles;
        if (tau < leg_time_) return heading0_;
        tau -= leg_time_;
        if (tau < turn_time_) return heading0_ + half_turn(tau / turn_time_);
        tau -= turn_time_;
        if (tau < leg_time_) return heading0_ + kPi;
        tau -= leg_time_;
        return heading0_ + kPi - half_turn(tau / turn_time_);
      }
      case ProfileKind::kMooringSway:
        break;
    }
    return heading0_;
  }

  static double half_turn(double u) { return kPi * (u - std::sin(2.0 * kPi * u) / (2.0 * kPi)); }

  Kinematics mooring(double t) const {
    const double w = 2.0 * kPi / p_.sway_period;
    const double a = p_.attitude_amplitude;
    const double rate = p_.sway_amplitude * w * std::cos(w * t);
    Kinematics k;
    k.velocity_n = {rate * std::cos(heading0_), rate * std::sin(heading0_), 0.0};
    k.euler.roll = a * std::sin(w * t);
    k.euler.pitch = 0.5 * a * std::sin(w * t + 0.7);
    k.euler.yaw = wrap_angle(heading0_ + 0.5 * a * std::sin(0.5 * w * t + 0.3));
    return k;
  }

  TrajectoryProfile p_;
  double heading0_;
  double leg_time_ = 0.0;
  double turn_time_ = 0.0;
};

Vec3 position_rate(const Vec3& p, const Vec3& v_n) {
  return curvature_matrix(GeodeticPosition{p.x(), p.y(), p.z()}) * v_n;
}

std::size_t decimation(std::span<const NavState> traj, double rate) {
  if (traj.size() < 2) throw NavError(ErrorCode::kInvalidArgument, "trajectory too short");
  if (!(rate > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "sample rate must be positive");
  const double traj_rate = 1.0 / (traj[1].t - traj[0].t);
  if (rate > traj_rate * (1.0 + 1e-9)) {
    std::ostringstream os;
    os << "requested rate " << rate << " Hz exceeds trajectory rate " << traj_rate << " Hz";
    throw NavError(ErrorCode::kInvalidArgument, os.str());
  }
  return static_cast<std::size_t>(std::max(1.0, std::round(traj_rate / rate)));
}

Vec3 nav_rate(const GeodeticPosition& pos, const Vec3& v) {
  return earth_rate_n(pos.latitude) + transport_rate(pos, v);
}

Vec3 coriolis_minus_gravity(const GeodeticPosition& pos, const Vec3& v) {
  const Vec3 w_ie = earth_rate_n(pos.latitude);
  const Vec3 w_en = transport_rate(pos, v);
  return (2.0 * w_ie + w_en).cross(v) - gravity_n(pos);
}

}  // namespace

std::string to_string(ImuGrade grade) {
  switch (grade) {
    case ImuGrade::kNavigation: return "navigation";
    case ImuGrade::kTactical: return "tactical";
    case ImuGrade::kCustom: return "custom";
  }
  return "custom";
}

ImuGrade imu_grade_from_string(const std::string& name) {
  if (name == "navigation") return ImuGrade::kNavigation;
  if (name == "tactical") return ImuGrade::kTactical;
  if (name == "custom") return ImuGrade::kCustom;
  throw NavError(ErrorCode::kInvalidArgument, "unknown IMU grade '" + name + "'");
}

void ImuErrorModel::validate() const {
  if (!(accel_noise_std >= 0.0) || !(gyro_noise_std >= 0.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "IMU noise std must be non-negative");
  }
  if (!accel_bias.allFinite() || !gyro_bias.allFinite()) {
    throw NavError(ErrorCode::kInvalidArgument, "non-finite IMU bias");
  }
}

bool ImuErrorModel::is_zero() const {
  return accel_bias.isZero(0.0) && gyro_bias.isZero(0.0) && accel_noise_std == 0.0 &&
         gyro_noise_std == 0.0;
}

std::map<std::string, ImuErrorModel> load_imu_grades(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NavError(ErrorCode::kIo, "cannot open IMU grade table '" + path + "'");
  try {
    return parse_grades(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw NavError(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

std::string default_imu_grades_path() { return detail::kImuGradesSourcePath; }

ImuErrorModel imu_grade_preset(ImuGrade grade) {
  static const auto table = parse_grades(nlohmann::json::parse(detail::kEmbeddedImuGrades));
  if (grade == ImuGrade::kCustom) return ImuErrorModel{};
  return table.at(to_string(grade));
}

void DvlBeamGeometry::validate() const {
  for (const Vec3& b : directions) {
    if (std::abs(b.norm() - 1.0) > 1e-12) {
      throw NavError(ErrorCode::kDegenerateGeometry, "beam direction is not unit length");
    }
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(matrix());
  const auto& s = svd.singularValues();
  if (s(2) < 1e-9 * s(0)) {
    throw NavError(ErrorCode::kDegenerateGeometry, "beam directions do not span 3D");
  }
}

Eigen::Matrix<double, 4, 3> DvlBeamGeometry::matrix() const {
  Eigen::Matrix<double, 4, 3> t;
  for (int i = 0; i < 4; ++i) t.row(i) = directions[static_cast<std::size_t>(i)].transpose();
  return t;
}

DvlBeamGeometry default_beam_geometry() { return janus_beam_geometry(20.0 * kDegToRad); }

DvlBeamGeometry janus_beam_geometry(double pitch_angle) {
  if (!(pitch_angle > 0.0 && pitch_angle < 0.5 * kPi)) {
    throw NavError(ErrorCode::kInvalidArgument, "beam pitch must lie in (0, 90) deg");
  }
  DvlBeamGeometry g;
  g.pitch_angle = pitch_angle;
  const double s = std::sin(g.pitch_angle);
  const double c = std::cos(g.pitch_angle);
  for (int i = 0; i < 4; ++i) {
    const double az = (45.0 + 90.0 * i) * kDegToRad;
    g.directions[static_cast<std::size_t>(i)] = Vec3(std::cos(az) * s, std::sin(az) * s, c);
  }
  return g;
}

void DvlErrorModel::validate() const {
  if ((scale.array() <= -1.0).any()) {
    throw NavError(ErrorCode::kInvalidArgument, "DVL scale components must exceed -1");
  }
  if (!(beam_noise_std >= 0.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "DVL beam noise std must be non-negative");
  }
  if (!bias.allFinite() || !lever_arm.allFinite()) {
    throw NavError(ErrorCode::kInvalidArgument, "non-finite DVL error parameter");
  }
}

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kConstantVelocityLine: return "constant_velocity_line";
    case ProfileKind::kLongTurn: return "long_turn";
    case ProfileKind::kLawnmower: return "lawnmower";
    case ProfileKind::kMooringSway: return "mooring_sway";
  }
  return "constant_velocity_line";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  if (name == "constant_velocity_line") return ProfileKind::kConstantVelocityLine;
  if (name == "long_turn") return ProfileKind::kLongTurn;
  if (name == "lawnmower") return ProfileKind::kLawnmower;
  if (name == "mooring_sway") return ProfileKind::kMooringSway;
  throw NavError(ErrorCode::kInvalidArgument, "unknown trajectory profile '" + name + "'");
}

void TrajectoryProfile::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw NavError(ErrorCode::kInvalidArgument, what);
  };
  require(duration > 0.0, "duration must be positive");
  require(imu_rate > 0.0 && dvl_rate > 0.0 && gnss_rate > 0.0, "rates must be positive");
  require(dvl_rate <= imu_rate, "dvl_rate must not exceed imu_rate");
  require(gnss_rate <= imu_rate, "gnss_rate must not exceed imu_rate");
  require(excitation_period > 0.0, "excitation_period must be positive");
  require(std::isfinite(depth), "depth must be finite");
  switch (kind) {
    case ProfileKind::kConstantVelocityLine:
      require(speed >= 0.0, "speed must be non-negative");
      break;
    case ProfileKind::kLongTurn:
      require(speed > 0.0 && turn_radius > 0.0, "long_turn needs positive speed and radius");
      break;
    case ProfileKind::kLawnmower:
      require(speed > 0.0 && leg_length > 0.0 && leg_spacing > 0.0,
              "lawnmower needs positive speed, leg length and spacing");
      break;
    case ProfileKind::kMooringSway:
      require(sway_amplitude >= 0.0 && sway_period > 0.0, "invalid sway parameters");
      break;
  }
}

std::vector<NavState> generate_trajectory(const TrajectoryProfile& profile,
                                          const GeodeticPosition& origin, double initial_heading) {
  profile.validate();
  origin.validate();
  const ProfileKinematics kin(profile, initial_heading);
  const double dt = 1.0 / profile.imu_rate;
  const auto steps = static_cast<std::size_t>(std::llround(profile.duration * profile.imu_rate));

  std::vector<NavState> out;
  out.reserve(steps + 1);
  Vec3 p(origin.latitude, origin.longitude, origin.height - profile.depth);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const Kinematics k = kin.at(t);
    NavState s;
    s.t = t;
    s.position = {p.x(), wrap_angle(p.y()), p.z()};
    s.velocity_n = k.velocity_n;
    s.attitude = rotation_from_euler(k.euler);
    out.push_back(s);
    if (i == steps) break;
    // Position follows the analytic velocity through the curvature matrix.
    const Vec3 v_mid = kin.at(t + 0.5 * dt).velocity_n;
    const Vec3 v_end = kin.at(t + dt).velocity_n;
    const Vec3 k1 = position_rate(p, k.velocity_n);
    const Vec3 k2 = position_rate(p + 0.5 * dt * k1, v_mid);
    const Vec3 k3 = position_rate(p + 0.5 * dt * k2, v_mid);
    const Vec3 k4 = position_rate(p + dt * k3, v_end);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return out;
}

std::vector<ImuSample> ideal_imu_from_trajectory(std::span<const NavState> traj) {
  if (traj.size() < 3) {
    throw NavError(ErrorCode::kInvalidArgument, "need at least 3 trajectory samples");
  }
  std::vector<ImuSample> out;
  out.reserve(traj.size() - 1);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const NavState& a = traj[i];
    const NavState& b = traj[i + 1];
    const double dt = b.t - a.t;
    if (!(dt > 0.0)) throw NavError(ErrorCode::kNonMonotoneTime, "trajectory time not increasing");

    const GeodeticPosition mid_pos{0.5 * (a.position.latitude + b.position.latitude),
                                   a.position.longitude,
                                   0.5 * (a.position.height + b.position.height)};
    const Vec3 v_mid = 0.5 * (a.velocity_n + b.velocity_n);
    const Vec3 w_in = nav_rate(mid_pos, v_mid);

    // C_b = exp(-W_in dt) C_a exp(W_ib dt)  =>  exp(W_ib dt) = C_a^T exp(W_in dt) C_b.
    const RotationMatrix body_increment =
        a.attitude.transpose() * rotation_from_vector(w_in * dt) * b.attitude;
    const Vec3 w_ib = vector_from_rotation(body_increment) / dt;

    const Mat3 c_mid = (rotation_from_vector(-0.5 * dt * w_in) * a.attitude *
                        rotation_from_vector(0.5 * dt * w_ib))
                           .matrix();
    const Mat3 c_avg = (a.attitude.matrix() + 4.0 * c_mid + b.attitude.matrix()) / 6.0;
    const Vec3 rhs_avg = (coriolis_minus_gravity(a.position, a.velocity_n) +
                          4.0 * coriolis_minus_gravity(mid_pos, v_mid) +
                          coriolis_minus_gravity(b.position, b.velocity_n)) /
                         6.0;
    const Vec3 f_b = c_avg.lu().solve((b.velocity_n - a.velocity_n) / dt + rhs_avg);
    out.push_back(ImuSample{b.t, f_b, w_ib});
  }
  return out;
}

std::vector<ImuSample> corrupt_imu(std::span<const ImuSample> ideal, const ImuErrorModel& model,
                                   std::uint64_t seed) {
  model.validate();
  std::vector<ImuSample> out(ideal.begin(), ideal.end());
  if (model.is_zero()) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool accel_bias = !model.accel_bias.isZero(0.0);
  const bool gyro_bias = !model.gyro_bias.isZero(0.0);
  for (ImuSample& s : out) {
    if (accel_bias) s.specific_force_b += model.accel_bias;
    if (gyro_bias) s.angular_rate_b += model.gyro_bias;
    if (model.accel_noise_std > 0.0) {
      for (int k = 0; k < 3; ++k) s.specific_force_b[k] += model.accel_noise_std * normal(rng);
    }
    if (model.gyro_noise_std > 0.0) {
      for (int k = 0; k < 3; ++k) s.angular_rate_b[k] += model.gyro_noise_std * normal(rng);
    }
  }
  return out;
}

Vec3 true_dvl_velocity(std::span<const NavState> traj, std::size_t i, const DvlErrorModel& model) {
  const NavState& s = traj[i];
  Vec3 v_b = s.attitude.transpose() * s.velocity_n;
  if (!model.lever_arm.isZero(0.0) && traj.size() >= 2) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, traj.size() - 1);
    const RotationMatrix rel = traj[lo].attitude.transpose() * traj[hi].attitude;
    const Vec3 w_nb = vector_from_rotation(rel) / (traj[hi].t - traj[lo].t);
    v_b += w_nb.cross(model.lever_arm);
  }
  return model.mounting * v_b;
}

std::vector<DvlBeamSample> simulate_dvl(std::span<const NavState> traj,
                                        const DvlBeamGeometry& geometry,
                                        const DvlErrorModel& model, double rate,
                                        std::uint64_t seed) {
  geometry.validate();
  model.validate();
  const std::size_t step = decimation(traj, rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DvlBeamSample> out;
  out.reserve(traj.size() / step + 1);
  const Vec3 one = Vec3::Ones();
  for (std::size_t i = 0; i < traj.size(); i += step) {
    const Vec3 v_d = true_dvl_velocity(traj, i, model);
    const Vec3 corrupted = (one + model.scale).cwiseProduct(v_d) + model.bias;
    DvlBeamSample s;
    s.t = traj[i].t;
    for (std::size_t b = 0; b < 4; ++b) {
      s.beam_velocity[b] = geometry.directions[b].dot(corrupted);
      if (model.beam_noise_std > 0.0) s.beam_velocity[b] += model.beam_noise_std * normal(rng);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<GnssVelocitySample> simulate_gnss_velocity(std::span<const NavState> traj, double rate,
                                                       double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "GNSS noise std must be non-negative");
  }
  const std::size_t step = decimation(traj, rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GnssVelocitySample> out;
  for (std::size_t i = 0; i < traj.size(); i += step) {
    GnssVelocitySample s{traj[i].t, traj[i].velocity_n, noise_std};
    if (noise_std > 0.0) {
      for (int k = 0; k < 3; ++k) s.v_n[k] += noise_std * normal(rng);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<DvlBeamSample> apply_beam_outage(std::span<const DvlBeamSample> beams,
                                             std::span<const BeamOutage> schedule) {
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const BeamOutage& a = schedule[i];
    if (!(a.t_end >= a.t_start)) {
      throw NavError(ErrorCode::kInvalidArgument, "outage window ends before it starts");
    }
    for (int b : a.beams) {
      if (b < 0 || b > 3) throw NavError(ErrorCode::kInvalidArgument, "beam index out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const BeamOutage& o = schedule[j];
      const bool overlap_time = a.t_start <= o.t_end && o.t_start <= a.t_end;
      if (!overlap_time) continue;
      for (int b : a.beams) {
        if (std::find(o.beams.begin(), o.beams.end(), b) != o.beams.end()) {
          throw NavError(ErrorCode::kInvalidArgument, "overlapping outage windows for one beam");
        }
      }
    }
  }
  std::vector<DvlBeamSample> out(beams.begin(), beams.end());
  for (DvlBeamSample& s : out) {
    for (const BeamOutage& o : schedule) {
      if (s.t < o.t_start || s.t > o.t_end) continue;
      for (int b : o.beams) s.valid[static_cast<std::size_t>(b)] = false;
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace auvnav
