#pragma once

#include <span>
#include <vector>

#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"

namespace auvnav {

/// Reference ellipsoid and normal-gravity constants (WGS-84 by default).
struct EarthModel {
  double equatorial_radius = 6378137.0;         // m
  double flattening = 1.0 / 298.257223563;
  double earth_rate_magnitude = 7.292115e-5;    // rad/s
  double gravity_equator = 9.7803253359;        // m/s^2
  double gravity_pole = 9.8321849378;           // m/s^2
  double gravitational_constant = 3.986004418e14;  // GM, m^3/s^2

  static const EarthModel& wgs84();

  void validate() const;
  double eccentricity_squared() const { return flattening * (2.0 - flattening); }
  /// Meridional radius of curvature R_M.
  double meridian_radius(double lat) const;
  /// Prime-vertical radius of curvature R_N.
  double normal_radius(double lat) const;
};

/// Earth rotation rate in NED: (W cos lat, 0, -W sin lat).
Vec3 earth_rate_n(double lat, const EarthModel& earth = EarthModel::wgs84());

/// Rotation rate of NED relative to the Earth caused by horizontal motion.
Vec3 transport_rate(const GeodeticPosition& pos, const Vec3& v_n,
                    const EarthModel& earth = EarthModel::wgs84());

/// Somigliana normal gravity with the ellipsoidal free-air height series; NED, down positive.
Vec3 gravity_n(const GeodeticPosition& pos, const EarthModel& earth = EarthModel::wgs84());

/// D(lat, h) with d(lat, lon, h)/dt = D * v_n.
Mat3 curvature_matrix(const GeodeticPosition& pos, const EarthModel& earth = EarthModel::wgs84());

/// One RK4 step of the NED strapdown equations with the IMU sample held over `dt`.
NavState mechanize_step(const NavState& state, const ImuSample& imu, double dt,
                        const EarthModel& earth = EarthModel::wgs84());

/// Free-inertial integration. Returns `initial` followed by one state per IMU
/// sample (size imu.size() + 1), each stamped with its sample time.
std::vector<NavState> dead_reckon(const NavState& initial, std::span<const ImuSample> imu,
                                  const EarthModel& earth = EarthModel::wgs84());

/// North/east/down displacement of `pos` from `origin`, using curvature radii at `origin`.
Vec3 local_offset_m(const GeodeticPosition& origin, const GeodeticPosition& pos,
                    const EarthModel& earth = EarthModel::wgs84());

}  // namespace auvnav
