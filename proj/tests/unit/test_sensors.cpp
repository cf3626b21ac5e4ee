#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include <Eigen/SVD>

#include "auvnav/error.hpp"
#include "auvnav/fusion.hpp"
#include "auvnav/sensors.hpp"
#include "auvnav/strapdown.hpp"

using namespace auvnav;

namespace {

constexpr double kLat = 32.8 * kDegToRad;
const GeodeticPosition kOrigin{kLat, 35.0 * kDegToRad, 0.0};

TrajectoryProfile profile(ProfileKind kind, double duration) {
  TrajectoryProfile p;
  p.kind = kind;
  p.duration = duration;
  return p;
}

std::vector<NavState> static_trajectory(double duration, double rate) {
  TrajectoryProfile p = profile(ProfileKind::kMooringSway, duration);
  p.sway_amplitude = 0.0;
  p.attitude_amplitude = 0.0;
  p.imu_rate = rate;
  return generate_trajectory(p, kOrigin, 0.4);
}

double max_horizontal_offset(const std::vector<NavState>& tr, const GeodeticPosition& from) {
  double worst = 0.0;
  for (const NavState& s : tr) {
    worst = std::max(worst, local_offset_m(from, s.position).head<2>().norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("straight line displacement") {
  TrajectoryProfile p = profile(ProfileKind::kConstantVelocityLine, 60);
  const auto tr = generate_trajectory(p, kOrigin, 0.0);
  REQUIRE(tr.size() == 6001);
  const Vec3 d = local_offset_m(tr.front().position, tr.back().position);
  CHECK(d.x() == doctest::Approx(90.0).epsilon(0.1 / 90.0));
  CHECK(std::abs(d.y()) < 0.1);
}

TEST_CASE("mooring sway stays inside its amplitude") {
  TrajectoryProfile p = profile(ProfileKind::kMooringSway, 60);
  p.sway_amplitude = 0.5;
  const auto tr = generate_trajectory(p, kOrigin, 1.0);
  // 1 um covers the flat-earth conversion used to measure the offset.
  CHECK(max_horizontal_offset(tr, tr.front().position) <= 0.5 + 1e-6);
}

TEST_CASE("long turn of half a circle") {
  TrajectoryProfile p = profile(ProfileKind::kLongTurn, 78.5);
  p.speed = 2.0;
  p.turn_radius = 50.0;
  const auto tr = generate_trajectory(p, kOrigin, 0.0);
  const double dpsi = wrap_angle(euler_from_rotation(tr.back().attitude).yaw -
                                 euler_from_rotation(tr.front().attitude).yaw);
  // Arc length oracle: 78.5 s * 2 m/s / 50 m = 3.14 rad.
  CHECK(std::abs(std::abs(dpsi) - 3.14) < 1e-6);
}

TEST_CASE("invalid profiles are rejected") {
  TrajectoryProfile p = profile(ProfileKind::kLawnmower, 60);
  p.dvl_rate = 200.0;
  CHECK_THROWS_AS(generate_trajectory(p, kOrigin, 0.0), NavError);
  p = profile(ProfileKind::kLawnmower, -1.0);
  CHECK_THROWS_AS(generate_trajectory(p, kOrigin, 0.0), NavError);
  CHECK_THROWS_AS(profile_kind_from_string("spiral"), NavError);
}

TEST_CASE("static ideal IMU is the equilibrium input") {
  const auto tr = static_trajectory(2.0, 100.0);
  const auto imu = ideal_imu_from_trajectory(tr);
  REQUIRE(imu.size() == tr.size() - 1);
  for (std::size_t i = 0; i < imu.size(); ++i) {
    const Mat3 ct = tr[i + 1].attitude.matrix().transpose();
    CHECK((imu[i].specific_force_b + ct * gravity_n(tr[i + 1].position)).norm() < 1e-9);
    CHECK((imu[i].angular_rate_b - ct * earth_rate_n(kLat)).norm() < 1e-12);
  }
}

TEST_CASE("straight line specific force is gravity plus small Coriolis terms") {
  const auto tr = generate_trajectory(profile(ProfileKind::kConstantVelocityLine, 5), kOrigin, 0.7);
  const auto imu = ideal_imu_from_trajectory(tr);
  for (std::size_t i = 0; i < imu.size(); i += 50) {
    const Mat3 ct = tr[i + 1].attitude.matrix().transpose();
    const Vec3 gravity_only = -ct * gravity_n(tr[i + 1].position);
    CHECK((imu[i].specific_force_b - gravity_only).norm() < 1e-3);
  }
  CHECK_THROWS_AS(ideal_imu_from_trajectory(std::span<const NavState>(tr.data(), 2)), NavError);
}

TEST_CASE("round trip through the ideal IMU for every profile") {
  for (ProfileKind kind : {ProfileKind::kConstantVelocityLine, ProfileKind::kLongTurn,
                           ProfileKind::kLawnmower, ProfileKind::kMooringSway}) {
    TrajectoryProfile p = profile(kind, 60);
    p.surge_amplitude = 0.2;
    p.crab_amplitude = 0.2;
    p.heave_amplitude = 0.05;
    const auto tr = generate_trajectory(p, kOrigin, 0.3);
    const auto dr = dead_reckon(tr.front(), ideal_imu_from_trajectory(tr));
    REQUIRE(dr.size() == tr.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      worst = std::max(worst, local_offset_m(tr[i].position, dr[i].position).norm());
    }
    INFO(to_string(kind));
    CHECK(worst < 0.01);
  }
}

TEST_CASE("IMU corruption") {
  const auto tr = static_trajectory(100.0, 100.0);
  const auto ideal = ideal_imu_from_trajectory(tr);

  ImuErrorModel zero;
  const auto same = corrupt_imu(ideal, zero, 1);
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    CHECK(std::memcmp(&same[i], &ideal[i], sizeof(ImuSample)) == 0);
  }

  ImuErrorModel biased;
  biased.accel_bias = Vec3(0.01, 0, 0);
  biased.accel_noise_std = 0.005;
  const auto out = corrupt_imu(ideal, biased, 9);
  double mean = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    mean += out[i].specific_force_b.x() - ideal[i].specific_force_b.x();
  }
  mean /= static_cast<double>(out.size());
  CHECK(std::abs(mean - 0.01) < 3.0 * 0.005 / std::sqrt(static_cast<double>(out.size())));

  const auto again = corrupt_imu(ideal, biased, 9);
  CHECK(std::memcmp(again.data(), out.data(), out.size() * sizeof(ImuSample)) == 0);

  ImuErrorModel negative;
  negative.gyro_noise_std = -1.0;
  CHECK_THROWS_AS(corrupt_imu(ideal, negative, 1), NavError);
}

TEST_CASE("grade presets come from the config table") {
  const ImuErrorModel nav = imu_grade_preset(ImuGrade::kNavigation);
  const ImuErrorModel tac = imu_grade_preset(ImuGrade::kTactical);
  CHECK(nav.accel_bias.x() == doctest::Approx(10e-6 * 9.80665));
  CHECK(tac.accel_bias.x() == doctest::Approx(1e-3 * 9.80665));
  CHECK(nav.gyro_bias.x() == doctest::Approx(0.01 * kDegToRad / 3600.0));
  CHECK(tac.gyro_bias.x() == doctest::Approx(1.0 * kDegToRad / 3600.0));
  const auto table = load_imu_grades(default_imu_grades_path());
  CHECK(table.count("navigation") == 1);
  CHECK(table.count("tactical") == 1);
}

TEST_CASE("default beam geometry") {
  const DvlBeamGeometry g = default_beam_geometry();
  Vec3 sum = Vec3::Zero();
  for (const Vec3& b : g.directions) {
    CHECK(b.norm() == doctest::Approx(1.0).epsilon(1e-15));
    sum += b;
  }
  CHECK(std::abs(sum.x()) < 1e-15);
  CHECK(std::abs(sum.y()) < 1e-15);
  CHECK(sum.z() == doctest::Approx(4.0 * std::cos(20.0 * kDegToRad)));
  const Eigen::MatrixXd t = g.matrix();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(t);
  CHECK(lu.rank() == 3);

  DvlBeamGeometry flat = g;
  for (Vec3& b : flat.directions) b = Vec3(1, 0, 0);
  CHECK_THROWS_AS(flat.validate(), NavError);
}

TEST_CASE("DVL beam simulation") {
  TrajectoryProfile p = profile(ProfileKind::kConstantVelocityLine, 5);
  p.speed = 1.0;
  const auto tr = generate_trajectory(p, kOrigin, 0.0);
  const DvlBeamGeometry g = default_beam_geometry();

  DvlErrorModel clean;
  const auto beams = simulate_dvl(tr, g, clean, 1.0, 3);
  REQUIRE(beams.size() == 6);
  const Vec3 v_d = true_dvl_velocity(tr, 0, clean);
  CHECK((v_d - Vec3(1, 0, 0)).norm() < 1e-9);
  for (const DvlBeamSample& s : beams) {
    CHECK(s.valid_count() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.beam_velocity[i] == doctest::Approx(g.directions[i].dot(Vec3(1, 0, 0))).epsilon(1e-9));
    }
  }

  const auto still = static_trajectory(3.0, 100.0);
  DvlErrorModel biased;
  biased.bias = Vec3(0.1, 0, 0);
  for (const DvlBeamSample& s : simulate_dvl(still, g, biased, 1.0, 3)) {
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.beam_velocity[i] == doctest::Approx(0.1 * g.directions[i].x()).epsilon(1e-12));
    }
  }

  DvlErrorModel scaled;
  scaled.scale = Vec3::Constant(0.05);
  for (const DvlBeamSample& s : simulate_dvl(tr, g, scaled, 1.0, 3)) {
    const std::size_t k = static_cast<std::size_t>(std::llround(s.t * 100));
    CHECK((ls_beam_velocity(s, g) - 1.05 * true_dvl_velocity(tr, k, scaled)).norm() < 1e-12);
  }

  CHECK_THROWS_AS(simulate_dvl(tr, g, clean, 500.0, 3), NavError);
}

TEST_CASE("lever arm adds the rotation-induced velocity") {
  TrajectoryProfile p = profile(ProfileKind::kLongTurn, 10);
  p.speed = 2.0;
  p.turn_radius = 20.0;
  const auto tr = generate_trajectory(p, kOrigin, 0.0);
  DvlErrorModel m;
  m.lever_arm = Vec3(1.0, 0.0, 0.0);
  const std::size_t i = 500;
  const Vec3 body = tr[i].attitude.transpose() * tr[i].velocity_n;
  // Yaw rate 0.1 rad/s about body z moves a forward lever arm sideways.
  const Vec3 expect = body + Vec3(0, 0, 0.1).cross(m.lever_arm);
  CHECK((true_dvl_velocity(tr, i, m) - expect).norm() < 1e-6);
}

TEST_CASE("GNSS velocity simulation") {
  const auto tr = generate_trajectory(profile(ProfileKind::kLawnmower, 60), kOrigin, 0.0);
  const auto exact = simulate_gnss_velocity(tr, 1.0, 0.0, 2);
  for (const auto& g : exact) {
    const std::size_t k = static_cast<std::size_t>(std::llround(g.t * 100));
    CHECK(g.v_n == tr[k].velocity_n);
  }
  const auto still = static_trajectory(10000.0, 1.0);
  const auto noisy = simulate_gnss_velocity(still, 1.0, 0.02, 4);
  double ss = 0.0;
  for (const auto& g : noisy) ss += g.v_n.x() * g.v_n.x();
  CHECK(std::sqrt(ss / static_cast<double>(noisy.size())) == doctest::Approx(0.02).epsilon(0.05));
  const auto again = simulate_gnss_velocity(still, 1.0, 0.02, 4);
  CHECK(again.back().v_n == noisy.back().v_n);
  CHECK_THROWS_AS(simulate_gnss_velocity(tr, 1.0, -0.1, 2), NavError);
}

TEST_CASE("beam outages") {
  const auto tr = generate_trajectory(profile(ProfileKind::kConstantVelocityLine, 20), kOrigin, 0.0);
  const auto beams = simulate_dvl(tr, default_beam_geometry(), DvlErrorModel{}, 1.0, 1);
  const auto same = apply_beam_outage(beams, {});
  CHECK(same.size() == beams.size());

  const std::vector<BeamOutage> all{{5.0, 8.0, {0, 1, 2, 3}}};
  for (const auto& s : apply_beam_outage(beams, all)) {
    CHECK(s.valid_count() == ((s.t >= 5.0 && s.t <= 8.0) ? 0 : 4));
  }
  const std::vector<BeamOutage> two{{5.0, 8.0, {0, 1}}};
  for (const auto& s : apply_beam_outage(beams, two)) {
    CHECK(s.valid_count() == ((s.t >= 5.0 && s.t <= 8.0) ? 2 : 4));
    CHECK(s.beam_velocity == beams[static_cast<std::size_t>(s.t)].beam_velocity);
  }
  const std::vector<BeamOutage> overlap{{1.0, 5.0, {0}}, {4.0, 6.0, {0}}};
  CHECK_THROWS_AS(apply_beam_outage(beams, overlap), NavError);
  const std::vector<BeamOutage> bad_beam{{1.0, 5.0, {4}}};
  CHECK_THROWS_AS(apply_beam_outage(beams, bad_beam), NavError);
  const std::vector<BeamOutage> reversed{{5.0, 1.0, {0}}};
  CHECK_THROWS_AS(apply_beam_outage(beams, reversed), NavError);
}

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
