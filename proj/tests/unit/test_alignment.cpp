#include <doctest.h>

#include <cmath>
#include <random>

#include "auvnav/alignment.hpp"
#include "auvnav/error.hpp"
#include "auvnav/sensors.hpp"
#include "auvnav/strapdown.hpp"

using namespace auvnav;

namespace {

constexpr double kLat = 32.8 * kDegToRad;

// Static body at kLat: the body senses Earth rate and the upward reaction to gravity.
std::vector<ImuSample> static_imu(const EulerAngles& attitude, double duration, double rate = 100) {
  const RotationMatrix c = rotation_from_euler(attitude);
  const GeodeticPosition pos{kLat, 0.0, 0.0};
  const Vec3 f_b = c.transpose() * (-gravity_n(pos));
  const Vec3 w_b = c.transpose() * earth_rate_n(kLat);
  std::vector<ImuSample> out;
  const int n = static_cast<int>(std::lround(duration * rate));
  for (int i = 1; i <= n; ++i) out.push_back(ImuSample{i / rate, f_b, w_b});
  return out;
}

double geodesic(const RotationMatrix& a, const RotationMatrix& b) {
  return vector_from_rotation(a.transpose() * b).norm();
}

RotationMatrix random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return RotationMatrix::nearest(q.toRotationMatrix());
}

ObservationPair pair_from(const RotationMatrix& t_n0_b0, const Vec3& u_n, double t) {
  return ObservationPair{t, u_n, t_n0_b0 * u_n};
}

}  // namespace

TEST_CASE("attitude tracks start at identity and follow Earth rate") {
  const auto imu = static_imu({0.0, 0.0, 0.0}, 120);
  const AttitudeTracks tr = decompose_attitude_tracks(imu, kLat, 0.0);
  CHECK(tr.t.front() == 0.0);
  CHECK(tr.nav_from_initial_nav.front().matrix() == Mat3::Identity());
  CHECK(tr.initial_body_from_body.front().matrix() == Mat3::Identity());
  const double angle = vector_from_rotation(tr.nav_from_initial_nav.back()).norm();
  CHECK(std::abs(angle - EarthModel::wgs84().earth_rate_magnitude * 120.0) < 1e-9);

  std::vector<ImuSample> still = imu;
  for (ImuSample& s : still) s.angular_rate_b.setZero();
  const AttitudeTracks z = decompose_attitude_tracks(still, kLat, 0.0);
  CHECK(z.initial_body_from_body.back().matrix() == Mat3::Identity());

  CHECK_THROWS_AS(decompose_attitude_tracks(imu, kPi / 2.0, 0.0), NavError);
  std::vector<ImuSample> bad = imu;
  bad[10].t = bad[9].t;
  CHECK_THROWS_AS(decompose_attitude_tracks(bad, kLat, 0.0), NavError);
}

TEST_CASE("integrated observations satisfy the frozen-frame relation") {
  const EulerAngles truth{0.03, -0.02, 0.7};
  const auto imu = static_imu(truth, 120);
  const std::vector<double> times{0.5, 1.0, 10.0, 60.0, 120.0};
  const auto pairs = integrated_observation_pairs(imu, kLat, 0.0, times);
  const RotationMatrix t_n0_b0 = rotation_from_euler(truth).transpose();
  const double g = gravity_n({kLat, 0.0, 0.0}).z();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ObservationPair& p = pairs[i];
    CHECK(p.t == doctest::Approx(times[i]).epsilon(1e-12));
    CHECK((p.u_b0 - t_n0_b0 * p.u_n0).norm() / p.u_n0.norm() < 1e-6);
    CHECK(std::abs(p.u_n0.norm() - p.u_b0.norm()) / p.u_n0.norm() < 1e-6);
    // Earth rotation bends the path: chord/arc shortfall ~ (W t)^2 / 24 < 1e-5.
    CHECK(p.u_n0.norm() <= g * times[i] * (1.0 + 1e-12));
    CHECK(p.u_n0.norm() >= g * times[i] * (1.0 - 1e-5));
  }

  // A later t0 freezes later frames; the relation still holds against those.
  const auto late = integrated_observation_pairs(imu, kLat, 30.0, std::vector<double>{90.0});
  const AttitudeTracks tr = decompose_attitude_tracks(imu, kLat, 0.0);
  const RotationMatrix c30 = tr.nav_from_initial_nav[3000] * t_n0_b0.transpose() * tr.initial_body_from_body[3000];
  CHECK((late[0].u_b0 - c30.transpose() * late[0].u_n0).norm() / late[0].u_n0.norm() < 1e-6);

  CHECK_THROWS_AS(integrated_observation_pairs(imu, kLat, 0.0, std::vector<double>{0.01}),
                  NavError);
  CHECK_THROWS_AS(integrated_observation_pairs(imu, kLat, 0.0, std::vector<double>{130.0}),
                  NavError);
}

TEST_CASE("dual-vector alignment") {
  std::mt19937_64 rng(3);
  const RotationMatrix yaw45 = rotation_from_euler({0.0, 0.0, kPi / 4}).transpose();
  const Vec3 u1(0.1, 0.2, -9.8), u2(0.3, -0.1, -9.7);
  const AlignmentResult r = dva_align(pair_from(yaw45, u1, 1), pair_from(yaw45, u2, 2));
  CHECK(std::abs(r.euler.yaw - kPi / 4) < 1e-6 * kDegToRad);
  CHECK(r.condition_indicator > 0.0);
  CHECK(r.residual_rms < 1e-12);

  const AlignmentResult id =
      dva_align(pair_from(RotationMatrix(), u1, 1), pair_from(RotationMatrix(), u2, 2));
  CHECK((id.rotation.matrix() - Mat3::Identity()).norm() < 1e-12);

  for (int i = 0; i < 100; ++i) {
    const RotationMatrix t = random_rotation(rng);
    const AlignmentResult ri = dva_align(pair_from(t, u1, 1), pair_from(t, u2, 2));
    CHECK(geodesic(ri.rotation, t) < 1e-9);
  }

  CHECK_THROWS_AS(dva_align(pair_from(yaw45, u1, 1), pair_from(yaw45, 2.0 * u1, 2)), NavError);
}

TEST_CASE("optimal-quaternion alignment") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const RotationMatrix t = random_rotation(rng);
    std::vector<ObservationPair> pairs;
    for (int k = 0; k < 5; ++k) pairs.push_back(pair_from(t, Vec3(n(rng), n(rng), n(rng)), k));
    CHECK(geodesic(oba_align(pairs).rotation, t) < 1e-9);
    // With two pairs OBA and DVA solve the same problem.
    const std::vector<ObservationPair> two(pairs.begin(), pairs.begin() + 2);
    const AlignmentResult a = oba_align(two);
    const AlignmentResult b = dva_align(two[0], two[1]);
    CHECK(geodesic(a.rotation, b.rotation) < 1e-6 * kDegToRad);
  }

  const ObservationPair p = pair_from(RotationMatrix(), Vec3(0, 0, -9.8), 1);
  CHECK_THROWS_AS(oba_align(std::vector<ObservationPair>{p}), NavError);
  CHECK_THROWS_AS(oba_align(std::vector<ObservationPair>{p, p}), NavError);
}

TEST_CASE("static initial alignment recovers heading") {
  for (double yaw_deg : {-170.0, -45.0, 0.0, 30.0, 135.0}) {
    const EulerAngles truth{0.01, -0.015, yaw_deg * kDegToRad};
    const auto imu = static_imu(truth, 120);
    for (AlignmentMethod m : {AlignmentMethod::kDva, AlignmentMethod::kOba}) {
      const AlignmentResult r = align_initial(imu, kLat, 0.0, 120.0, m);
      CHECK(std::abs(cyclic_error(r.euler.yaw, truth.yaw)) < 0.1 * kDegToRad);
      CHECK(r.window == 120.0);
    }
  }
  const auto imu = static_imu({0, 0, 0}, 10);
  CHECK_THROWS_AS(align_initial(imu, kLat, 0.0, 120.0, AlignmentMethod::kSvd), NavError);
  CHECK_THROWS_AS(align_initial(imu, kLat, 0.0, 0.0, AlignmentMethod::kDva), NavError);
}

TEST_CASE("heading at the end of the window") {
  const EulerAngles truth{0.0, 0.0, 0.6};
  const auto imu = static_imu(truth, 120);
  const AlignmentResult r = align_initial(imu, kLat, 0.0, 120.0, AlignmentMethod::kOba);
  CHECK(heading_at_end(r, imu, kLat, r.t0) == doctest::Approx(r.euler.yaw).epsilon(1e-15));
  CHECK(std::abs(cyclic_error(heading_at_end(r, imu, kLat, 120.0), truth.yaw)) <
        0.01 * kDegToRad);
  CHECK_THROWS_AS(heading_at_end(r, imu, kLat, -1.0), NavError);

  TrajectoryProfile p;
  p.kind = ProfileKind::kMooringSway;
  p.duration = 120;
  p.sway_amplitude = 0.2;
  const GeodeticPosition origin{kLat, 0.6, 0.0};
  const auto traj = generate_trajectory(p, origin, 1.0);
  const auto ideal = ideal_imu_from_trajectory(traj);
  const AlignmentResult m = align_initial(ideal, kLat, 0.0, 120.0, AlignmentMethod::kDva);
  const double end = heading_at_end(m, ideal, kLat, 120.0);
  CHECK(std::abs(cyclic_error(end, euler_from_rotation(traj.back().attitude).yaw)) <
        0.05 * kDegToRad);
}

TEST_CASE("mounting estimation by SVD") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const RotationMatrix r30 = rotation_from_euler({0.0, 0.0, kPi / 6});
  std::vector<Vec3> body, dvl;
  for (int i = 0; i < 20; ++i) {
    body.emplace_back(n(rng), n(rng), n(rng));
    dvl.push_back(r30.transpose() * body.back());
  }
  const AlignmentResult r = wahba_svd(body, dvl);
  CHECK((r.rotation.matrix() - r30.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.residual_rms < 1e-9);
  CHECK(r.condition_indicator > 1e-3);

  const AlignmentResult same = wahba_svd(body, body);
  CHECK((same.rotation.matrix() - Mat3::Identity()).norm() < 1e-12);
  CHECK(same.residual_rms < 1e-12);

  // Reflections are not rotations: a mirrored set still returns det = +1.
  std::vector<Vec3> mirrored;
  for (const Vec3& v : body) mirrored.emplace_back(v.x(), v.y(), -v.z());
  CHECK(wahba_svd(body, mirrored).rotation.matrix().determinant() ==
        doctest::Approx(1.0).epsilon(1e-12));

  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.push_back(Vec3(1, 2, 0.5) * (i + 1));
  CHECK_THROWS_AS(wahba_svd(line, line), NavError);
  CHECK_THROWS_AS(wahba_svd(body, std::vector<Vec3>(body.begin(), body.end() - 1)), NavError);
}

TEST_CASE("SVD solution beats random rotations") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<Vec3> body, dvl;
    for (int i = 0; i < 5; ++i) {
      body.emplace_back(n(rng), n(rng), n(rng));
      dvl.emplace_back(n(rng), n(rng), n(rng));
    }
    const double best = wahba_objective(wahba_svd(body, dvl).rotation, body, dvl);
    bool ok = true;
    for (int k = 0; k < 2000; ++k) {
      ok = ok && best <= wahba_objective(random_rotation(rng), body, dvl) + 1e-12;
    }
    CHECK(ok);
  }
}

TEST_CASE("cyclic error") {
  CHECK(cyclic_error(0.1, 0.1) == 0.0);
  CHECK(cyclic_error(179 * kDegToRad, -179 * kDegToRad) ==
        doctest::Approx(-2 * kDegToRad).epsilon(1e-12));
  CHECK(cyclic_error(-179 * kDegToRad, 179 * kDegToRad) ==
        doctest::Approx(2 * kDegToRad).epsilon(1e-12));
  for (int i = -200; i <= 200; ++i) {
    for (int j = -200; j <= 200; j += 7) {
      const double a = i * kPi / 100.0 + 1e-3;
      const double b = j * kPi / 100.0;
      const double e = cyclic_error(a, b);
      CHECK(std::abs(e) <= kPi);
      CHECK(e > -kPi);
      if (std::abs(a - b) < kPi - 1e-9) CHECK(std::abs(e - (a - b)) < 1e-12);
      CHECK(std::abs(std::remainder(e - (a - b), 2 * kPi)) < 1e-12);
    }
  }
}

TEST_CASE("cyclic mean squared error") {
  const std::vector<double> a{0.1, 1.0, -3.0};
  CHECK(cmse(a, a) == 0.0);
  const std::vector<double> h{2 * kDegToRad}, z{0.0};
  CHECK(cmse(h, z) == doctest::Approx(std::pow(2 * kPi / 180, 2)).epsilon(1e-12));
  CHECK(cmse(h, z, 2.0) == 2.0 * cmse(h, z, 1.0));
  CHECK_THROWS_AS(cmse(a, h), NavError);
  CHECK_THROWS_AS(cmse(h, z, 0.0), NavError);
}
