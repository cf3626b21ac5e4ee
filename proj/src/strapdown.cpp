#include "auvnav/strapdown.hpp"

#include <cmath>
#include <sstream>

namespace auvnav {

namespace {

// Singular band around the poles for the curvature terms.
constexpr double kPoleBand = 1e-9;

struct RawState {
  Vec3 p;  // lat, lon, h
  Vec3 v;
  Mat3 c;
};

struct RawDerivative {
  Vec3 p_dot;
  Vec3 v_dot;
  Mat3 c_dot;
};

RawDerivative derivative(const RawState& s, const Vec3& f_b, const Vec3& w_ib,
                         const EarthModel& earth) {
  const GeodeticPosition pos{s.p.x(), s.p.y(), s.p.z()};
  const Vec3 w_ie = earth_rate_n(pos.latitude, earth);
  const Vec3 w_en = transport_rate(pos, s.v, earth);
  RawDerivative d;
  d.p_dot = curvature_matrix(pos, earth) * s.v;
  d.v_dot = s.c * f_b - (2.0 * w_ie + w_en).cross(s.v) + gravity_n(pos, earth);
  d.c_dot = s.c * skew(w_ib) - skew(w_ie + w_en) * s.c;
  return d;
}

RawState advance(const RawState& s, const RawDerivative& d, double h) {
  return RawState{s.p + h * d.p_dot, s.v + h * d.v_dot, s.c + h * d.c_dot};
}

}  // namespace

const EarthModel& EarthModel::wgs84() {
  static const EarthModel model{};
  return model;
}

void EarthModel::validate() const {
  if (!(equatorial_radius > 0.0 && flattening > 0.0 && flattening < 0.01 &&
        earth_rate_magnitude > 0.0 && gravity_equator > 0.0 && gravity_pole > 0.0 &&
        gravitational_constant > 0.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "earth model constants out of range");
  }
}

double EarthModel::meridian_radius(double lat) const {
  const double e2 = eccentricity_squared();
  const double s = std::sin(lat);
  const double w = 1.0 - e2 * s * s;
  return equatorial_radius * (1.0 - e2) / (w * std::sqrt(w));
}

double EarthModel::normal_radius(double lat) const {
  const double e2 = eccentricity_squared();
  const double s = std::sin(lat);
  return equatorial_radius / std::sqrt(1.0 - e2 * s * s);
}

Vec3 earth_rate_n(double lat, const EarthModel& earth) {
  const double w = earth.earth_rate_magnitude;
  return {w * std::cos(lat), 0.0, -w * std::sin(lat)};
}

Vec3 transport_rate(const GeodeticPosition& pos, const Vec3& v_n, const EarthModel& earth) {
  const double lat = pos.latitude;
  const double rn = earth.normal_radius(lat) + pos.height;
  const double rm = earth.meridian_radius(lat) + pos.height;
  if (std::abs(lat) >= kPi / 2.0 - kPoleBand) {
    if (v_n.y() != 0.0) {
      throw NavError(ErrorCode::kSingularLatitude, "east velocity at the pole");
    }
    return {0.0, -v_n.x() / rm, 0.0};
  }
  return {v_n.y() / rn, -v_n.x() / rm, -v_n.y() * std::tan(lat) / rn};
}

Vec3 gravity_n(const GeodeticPosition& pos, const EarthModel& earth) {
  const double a = earth.equatorial_radius;
  const double f = earth.flattening;
  const double b = a * (1.0 - f);
  const double e2 = earth.eccentricity_squared();
  const double s2 = std::sin(pos.latitude) * std::sin(pos.latitude);
  const double k = (b * earth.gravity_pole) / (a * earth.gravity_equator) - 1.0;
  const double g0 = earth.gravity_equator * (1.0 + k * s2) / std::sqrt(1.0 - e2 * s2);
  const double w = earth.earth_rate_magnitude;
  const double m = w * w * a * a * b / earth.gravitational_constant;
  const double h = pos.height;
  const double g = g0 * (1.0 - 2.0 / a * (1.0 + f + m - 2.0 * f * s2) * h + 3.0 * h * h / (a * a));
  return {0.0, 0.0, g};
}

Mat3 curvature_matrix(const GeodeticPosition& pos, const EarthModel& earth) {
  const double lat = pos.latitude;
  if (std::abs(lat) >= kPi / 2.0 - kPoleBand) {
    throw NavError(ErrorCode::kSingularLatitude, "curvature matrix undefined at the pole");
  }
  Mat3 d = Mat3::Zero();
  d(0, 0) = 1.0 / (earth.meridian_radius(lat) + pos.height);
  d(1, 1) = 1.0 / ((earth.normal_radius(lat) + pos.height) * std::cos(lat));
  d(2, 2) = -1.0;
  return d;
}

NavState mechanize_step(const NavState& state, const ImuSample& imu, double dt,
                        const EarthModel& earth) {
  if (!(dt > 0.0) || dt > 1.0) {
    std::ostringstream os;
    os << "step size must lie in (0, 1] s, got " << dt;
    throw NavError(ErrorCode::kInvalidArgument, os.str());
  }
  if (state.attitude.orthonormality_error() > kOrthonormalTolerance) {
    throw NavError(ErrorCode::kInvalidRotation, "attitude drifted off SO(3)");
  }
  const Vec3& f = imu.specific_force_b;
  const Vec3& w = imu.angular_rate_b;
  const RawState s0{{state.position.latitude, state.position.longitude, state.position.height},
                    state.velocity_n,
                    state.attitude.matrix()};

  const RawDerivative k1 = derivative(s0, f, w, earth);
  const RawDerivative k2 = derivative(advance(s0, k1, 0.5 * dt), f, w, earth);
  const RawDerivative k3 = derivative(advance(s0, k2, 0.5 * dt), f, w, earth);
  const RawDerivative k4 = derivative(advance(s0, k3, dt), f, w, earth);

  const double h6 = dt / 6.0;
  NavState out;
  out.t = state.t + dt;
  const Vec3 p = s0.p + h6 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  out.position = {p.x(), wrap_angle(p.y()), p.z()};
  out.velocity_n = s0.v + h6 * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  out.attitude =
      project_if_drifted(s0.c + h6 * (k1.c_dot + 2.0 * k2.c_dot + 2.0 * k3.c_dot + k4.c_dot));
  return out;
}

std::vector<NavState> dead_reckon(const NavState& initial, std::span<const ImuSample> imu,
                                  const EarthModel& earth) {
  std::vector<NavState> out;
  out.reserve(imu.size() + 1);
  out.push_back(initial);
  double t_prev = initial.t;
  for (std::size_t i = 0; i < imu.size(); ++i) {
    if (!(imu[i].t > t_prev)) {
      std::ostringstream os;
      os << "IMU timestamp at index " << i << " (" << imu[i].t << ") does not advance past "
         << t_prev;
      throw NavError(ErrorCode::kNonMonotoneTime, os.str());
    }
    NavState next = mechanize_step(out.back(), imu[i], imu[i].t - t_prev, earth);
    next.t = imu[i].t;
    out.push_back(next);
    t_prev = imu[i].t;
  }
  return out;
}

Vec3 local_offset_m(const GeodeticPosition& origin, const GeodeticPosition& pos,
                    const EarthModel& earth) {
  const double lat = origin.latitude;
  const double d_lat = pos.latitude - origin.latitude;
  const double d_lon = wrap_angle(pos.longitude - origin.longitude);
  return {d_lat * (earth.meridian_radius(lat) + origin.height),
          d_lon * (earth.normal_radius(lat) + origin.height) * std::cos(lat),
          -(pos.height - origin.height)};
}

}  // namespace auvnav
