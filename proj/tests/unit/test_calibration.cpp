#include <doctest.h>

#include <cmath>
#include <random>

#include "auvnav/calibration.hpp"
#include "auvnav/error.hpp"
#include "auvnav/fusion.hpp"
#include "auvnav/sensors.hpp"

using namespace auvnav;

namespace {

const GeodeticPosition kOrigin{32.8 * kDegToRad, 35.0 * kDegToRad, 0.0};

struct CalData {
  std::vector<Vec3> dvl;
  std::vector<Vec3> truth_dvl;
  std::vector<GnssVelocitySample> gnss;
  std::vector<RotationMatrix> attitude;
  RotationMatrix t_b_d;
};

std::vector<NavState> turn_trajectory(double duration) {
  TrajectoryProfile p;
  p.kind = ProfileKind::kLongTurn;
  p.duration = duration;
  p.turn_radius = 40.0;
  p.surge_amplitude = 0.4;
  p.heave_amplitude = 0.3;
  p.crab_amplitude = 0.2;
  return generate_trajectory(p, kOrigin, 0.2);
}

CalData make_data(const std::vector<NavState>& tr, const DvlErrorModel& m, std::uint64_t seed,
                  double gnss_noise = 0.0) {
  CalData d;
  d.t_b_d = m.mounting;
  const DvlBeamGeometry g = default_beam_geometry();
  const auto beams = simulate_dvl(tr, g, m, 1.0, seed);
  d.gnss = simulate_gnss_velocity(tr, 1.0, gnss_noise, seed + 1000);
  for (const DvlBeamSample& b : beams) {
    const std::size_t k = static_cast<std::size_t>(std::llround(b.t * 100));
    d.dvl.push_back(ls_beam_velocity(b, g));
    d.truth_dvl.push_back(true_dvl_velocity(tr, k, m));
    d.attitude.push_back(tr[k].attitude);
  }
  return d;
}

}  // namespace

TEST_CASE("norm ratio on exact data") {
  const auto tr = turn_trajectory(100);
  DvlErrorModel m;
  m.scale = Vec3::Constant(0.05);
  m.beam_noise_std = 0.0;
  m.mounting = rotation_from_euler({0.01, -0.02, 0.8});
  const CalData d = make_data(tr, m, 1);
  CHECK(estimate_scale_norm_ratio(d.dvl, d.gnss) == doctest::Approx(0.05).epsilon(1e-11));

  m.scale.setZero();
  const CalData z = make_data(tr, m, 1);
  CHECK(std::abs(estimate_scale_norm_ratio(z.dvl, z.gnss)) < 1e-12);
}

TEST_CASE("norm ratio is rotation invariant") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> dvl;
  std::vector<GnssVelocitySample> gnss;
  for (int i = 0; i < 50; ++i) {
    const Vec3 v(1.0 + 0.1 * n(rng), 0.3 * n(rng), 0.1 * n(rng));
    dvl.push_back(1.05 * v);
    gnss.push_back(GnssVelocitySample{static_cast<double>(i), v, 0.0});
  }
  const double base = estimate_scale_norm_ratio(dvl, gnss);

  // Signed permutations rotate without rounding, so the result is bitwise equal.
  Mat3 perm;
  perm << 0, -1, 0, 0, 0, 1, -1, 0, 0;
  std::vector<Vec3> dvl_p;
  std::vector<GnssVelocitySample> gnss_p = gnss;
  for (std::size_t i = 0; i < dvl.size(); ++i) {
    dvl_p.push_back(perm * dvl[i]);
    gnss_p[i].v_n = perm.transpose() * gnss[i].v_n;
  }
  CHECK(estimate_scale_norm_ratio(dvl_p, gnss_p) == base);

  // General rotations agree to rounding.
  const RotationMatrix r = rotation_from_euler({0.3, -0.4, 2.0});
  std::vector<Vec3> dvl_r;
  for (const Vec3& v : dvl) dvl_r.push_back(r * v);
  CHECK(std::abs(estimate_scale_norm_ratio(dvl_r, gnss) - base) < 1e-15);
}

TEST_CASE("norm ratio errors") {
  std::vector<Vec3> dvl{Vec3(1, 0, 0), Vec3(0.05, 0, 0)};
  std::vector<GnssVelocitySample> gnss{{0, Vec3(1, 0, 0), 0}, {1, Vec3(0.05, 0, 0), 0}};
  CHECK_THROWS_WITH_AS(estimate_scale_norm_ratio(dvl, gnss), doctest::Contains("floor"), NavError);
  gnss.pop_back();
  CHECK_THROWS_AS(estimate_scale_norm_ratio(dvl, gnss), NavError);
}

TEST_CASE("norm ratio Monte Carlo spread") {
  std::vector<GnssVelocitySample> gnss;
  for (int i = 0; i < 100; ++i) gnss.push_back({static_cast<double>(i), Vec3(1.5, 0, 0), 0.0});
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 0.02);
  std::vector<double> ks;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Vec3> dvl;
    for (const auto& g : gnss) dvl.push_back(1.05 * g.v_n + Vec3(n(rng), n(rng), n(rng)));
    ks.push_back(estimate_scale_norm_ratio(dvl, gnss));
  }
  double mean = 0.0;
  for (double k : ks) mean += k;
  mean /= 1000.0;
  double var = 0.0;
  for (double k : ks) var += (k - mean) * (k - mean);
  const double sd = std::sqrt(var / 999.0);
  // Per-trial spread of the 100-sample average: 0.02 / 1.5 / 10.
  CHECK(sd == doctest::Approx(0.02 / 1.5 / 10.0).epsilon(0.1));
  int inside = 0;
  for (double k : ks) inside += std::abs(k - 0.05) < 3.0 * sd;
  CHECK(inside >= 990);
}

TEST_CASE("full calibration is exact without noise") {
  const auto tr = turn_trajectory(120);
  DvlErrorModel m;
  m.scale = Vec3(0.02, -0.01, 0.03);
  m.bias = Vec3(0.05, 0.0, -0.02);
  m.beam_noise_std = 0.0;
  m.mounting = rotation_from_euler({0.02, 0.01, -0.5});
  const CalData d = make_data(tr, m, 4);
  const CalibrationResult r = calibrate_dvl_full(d.dvl, d.gnss, d.attitude, d.t_b_d);
  CHECK((r.full_scale - m.scale).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.full_bias - m.bias).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.residual_vrmse < 1e-9);
  CHECK(r.samples_used == static_cast<int>(d.dvl.size()));
  CHECK(r.scale_observable == std::array<bool, 3>{true, true, true});

  DvlErrorModel clean;
  clean.beam_noise_std = 0.0;
  const CalData z = make_data(tr, clean, 4);
  const CalibrationResult rz = calibrate_dvl_full(z.dvl, z.gnss, z.attitude, z.t_b_d);
  CHECK(rz.full_scale.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(rz.full_bias.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(rz.residual_vrmse < 1e-9);
}

TEST_CASE("straight line leaves the vertical scale unobservable") {
  TrajectoryProfile p;
  p.kind = ProfileKind::kConstantVelocityLine;
  p.duration = 60;
  p.surge_amplitude = 0.3;
  const auto tr = generate_trajectory(p, kOrigin, 0.0);
  DvlErrorModel m;
  m.beam_noise_std = 0.0;
  m.bias = Vec3(0, 0, 0.01);
  const CalData d = make_data(tr, m, 5);
  const CalibrationResult r = calibrate_dvl_full(d.dvl, d.gnss, d.attitude, d.t_b_d);
  CHECK(r.scale_observable[0]);
  CHECK_FALSE(r.scale_observable[2]);
  CHECK(r.full_scale.z() == 0.0);
  CHECK(r.full_bias.z() == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("full calibration preconditions") {
  const auto tr = turn_trajectory(20);
  const CalData d = make_data(tr, DvlErrorModel{}, 6);
  const std::span<const Vec3> few(d.dvl.data(), 6);
  const std::span<const GnssVelocitySample> few_g(d.gnss.data(), 6);
  const std::span<const RotationMatrix> few_a(d.attitude.data(), 6);
  CHECK_THROWS_AS(calibrate_dvl_full(few, few_g, few_a, d.t_b_d), NavError);
  std::vector<RotationMatrix> short_att(d.attitude.begin(), d.attitude.end() - 1);
  CHECK_THROWS_AS(calibrate_dvl_full(d.dvl, d.gnss, short_att, d.t_b_d), NavError);
}

TEST_CASE("applying calibration") {
  CalibrationResult none;
  none.scalar_scale = 0.0;
  const Vec3 v(1.0, -0.5, 0.2);
  CHECK(apply_calibration(v, none, CalibrationMode::kScalar) == v);
  CHECK(apply_calibration(v, none, CalibrationMode::kFull) == v);

  CalibrationResult s;
  s.scalar_scale = 0.05;
  CHECK((apply_calibration(1.05 * v, s, CalibrationMode::kScalar) - v).norm() < 1e-15);

  CalibrationResult f;
  f.full_scale = Vec3(0.02, -0.01, 0.03);
  f.full_bias = Vec3(0.05, 0.0, -0.02);
  const Vec3 raw = (Vec3::Ones() + f.full_scale).cwiseProduct(v) + f.full_bias;
  CHECK((apply_calibration(raw, f, CalibrationMode::kFull) - v).norm() < 1e-12);

  f.full_scale.x() = -1.0;
  CHECK_THROWS_AS(apply_calibration(raw, f, CalibrationMode::kFull), NavError);
  CalibrationResult missing;
  CHECK_THROWS_AS(apply_calibration(v, missing, CalibrationMode::kScalar), NavError);
}

TEST_CASE("velocity RMSE") {
  const std::vector<Vec3> a{Vec3(1, 2, 3)};
  CHECK(vrmse(a, a) == 0.0);
  const std::vector<Vec3> b{Vec3(1.3, 2, 3.4)};
  CHECK(vrmse(b, a) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(vrmse(a, std::vector<Vec3>{}), NavError);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Vec3> noisy, zero(100000, Vec3::Zero());
  for (int i = 0; i < 100000; ++i) noisy.emplace_back(n(rng), n(rng), n(rng));
  CHECK(vrmse(noisy, zero) == doctest::Approx(0.1 * std::sqrt(3.0)).epsilon(0.02));
}

TEST_CASE("calibration lowers VRMSE across seeds") {
  const auto tr = turn_trajectory(300);
  DvlErrorModel m;
  m.scale = Vec3(0.02, -0.01, 0.03);
  m.bias = Vec3(0.05, 0.0, -0.02);
  m.beam_noise_std = 0.05;
  int better = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const CalData d = make_data(tr, m, seed, 0.02);
    const CalibrationResult r = calibrate_dvl_full(d.dvl, d.gnss, d.attitude, d.t_b_d);
    std::vector<Vec3> fixed;
    for (const Vec3& v : d.dvl) fixed.push_back(apply_calibration(v, r, CalibrationMode::kFull));
    better += vrmse(fixed, d.truth_dvl) < vrmse(d.dvl, d.truth_dvl);
  }
  CHECK(better >= 990);
}

TEST_CASE("nearest-time matching") {
  const std::vector<double> a{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> b{0.02, 0.98, 2.6, 3.01};
  const auto m = match_nearest(a, b, 0.5);
  REQUIRE(m.size() == 3);
  CHECK(m[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(m[1] == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(m[2] == std::pair<std::size_t, std::size_t>{3, 3});
}
