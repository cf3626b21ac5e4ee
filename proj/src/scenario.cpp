#include "auvnav/scenario.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "auvnav/io.hpp"
#include "auvnav/metrics.hpp"
#include "auvnav/strapdown.hpp"

namespace auvnav {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for derive_seed; changing them changes every simulated dataset.
constexpr std::uint64_t kImuStream = 1;
constexpr std::uint64_t kDvlStream = 2;
constexpr std::uint64_t kGnssStream = 3;

[[noreturn]] void bad_value(const std::string& path, const std::string& what) {
  throw NavError(ErrorCode::kInvalidArgument, "config '" + path + "': " + what);
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) bad_value(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    const auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) bad_value(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) bad_value(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        bad_value(key_path(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) bad_value(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) bad_value(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, Vec3& out) {
    if (const json* v = find(key)) {
      const std::vector<double> xs = numbers(*v, key);
      if (xs.size() != 3) bad_value(key_path(key), "expected 3 numbers");
      out = Vec3(xs[0], xs[1], xs[2]);
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) out = numbers(*v, key);
  }
  template <std::size_t N>
  void read(const std::string& key, std::array<double, N>& out) {
    if (const json* v = find(key)) {
      const std::vector<double> xs = numbers(*v, key);
      if (xs.size() != N) bad_value(key_path(key), "expected " + std::to_string(N) + " numbers");
      std::copy(xs.begin(), xs.end(), out.begin());
    }
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) {
        throw NavError(ErrorCode::kUnknownKey, "unknown config key '" + key_path(item.key()) + "'");
      }
    }
  }

 private:
  std::vector<double> numbers(const json& v, const std::string& key) const {
    if (!v.is_array()) bad_value(key_path(key), "expected an array of numbers");
    std::vector<double> xs;
    for (const json& x : v) {
      if (!x.is_number()) bad_value(key_path(key), "expected an array of numbers");
      xs.push_back(x.get<double>());
    }
    return xs;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

template <std::size_t N>
json array_json(const std::array<double, N>& a) {
  return json(std::vector<double>(a.begin(), a.end()));
}

void parse_profile(ObjectReader& r, TrajectoryProfile& p) {
  std::string kind = to_string(p.kind);
  r.read("kind", kind);
  p.kind = profile_kind_from_string(kind);
  r.read("duration", p.duration);
  r.read("speed", p.speed);
  r.read("depth", p.depth);
  r.read("turn_radius", p.turn_radius);
  r.read("sway_amplitude", p.sway_amplitude);
  r.read("sway_period", p.sway_period);
  r.read("attitude_amplitude", p.attitude_amplitude);
  r.read("leg_length", p.leg_length);
  r.read("leg_spacing", p.leg_spacing);
  r.read("surge_amplitude", p.surge_amplitude);
  r.read("crab_amplitude", p.crab_amplitude);
  r.read("heave_amplitude", p.heave_amplitude);
  r.read("excitation_period", p.excitation_period);
  r.read("imu_rate", p.imu_rate);
  r.read("dvl_rate", p.dvl_rate);
  r.read("gnss_rate", p.gnss_rate);
}

json profile_json(const TrajectoryProfile& p) {
  return json{{"kind", to_string(p.kind)},
              {"duration", p.duration},
              {"speed", p.speed},
              {"depth", p.depth},
              {"turn_radius", p.turn_radius},
              {"sway_amplitude", p.sway_amplitude},
              {"sway_period", p.sway_period},
              {"attitude_amplitude", p.attitude_amplitude},
              {"leg_length", p.leg_length},
              {"leg_spacing", p.leg_spacing},
              {"surge_amplitude", p.surge_amplitude},
              {"crab_amplitude", p.crab_amplitude},
              {"heave_amplitude", p.heave_amplitude},
              {"excitation_period", p.excitation_period},
              {"imu_rate", p.imu_rate},
              {"dvl_rate", p.dvl_rate},
              {"gnss_rate", p.gnss_rate}};
}

// Only fields that differ from the grade preset are written, so changing
// "imu.grade" in a resolved document (as a sweep does) swaps the whole model.
json imu_json(const ScenarioConfig& cfg) {
  const ImuErrorModel preset = imu_grade_preset(imu_grade_from_string(cfg.imu_grade));
  const ImuErrorModel& m = cfg.imu_error;
  json out{{"grade", cfg.imu_grade}};
  if (m.accel_bias != preset.accel_bias) out["accel_bias"] = vec_json(m.accel_bias);
  if (m.gyro_bias != preset.gyro_bias) out["gyro_bias"] = vec_json(m.gyro_bias);
  if (m.accel_noise_std != preset.accel_noise_std) out["accel_noise_std"] = m.accel_noise_std;
  if (m.gyro_noise_std != preset.gyro_noise_std) out["gyro_noise_std"] = m.gyro_noise_std;
  return out;
}

std::string loose_noise_name(LooseNoiseSource s) {
  return s == LooseNoiseSource::kUserSet ? "user_set" : "beam_propagated";
}

std::string calibration_mode_name(CalibrationMode m) {
  return m == CalibrationMode::kScalar ? "scalar" : "full";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw NavError(ErrorCode::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string num_or_missing(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("not-computed");
}

// Pairs estimated and truth states with equal timestamps (within 1 us).
std::pair<std::vector<NavState>, std::vector<NavState>> align_by_time(
    std::span<const NavState> est, std::span<const NavState> truth) {
  std::vector<double> te, tt;
  for (const NavState& s : est) te.push_back(s.t);
  for (const NavState& s : truth) tt.push_back(s.t);
  std::pair<std::vector<NavState>, std::vector<NavState>> out;
  for (const auto& [i, j] : match_nearest(te, tt, 1e-6)) {
    out.first.push_back(est[i]);
    out.second.push_back(truth[j]);
  }
  return out;
}

double median_spacing(std::span<const DvlBeamSample> dvl) {
  if (dvl.size() < 2) return 1.0;
  std::vector<double> d;
  for (std::size_t i = 1; i < dvl.size(); ++i) d.push_back(dvl[i].t - dvl[i - 1].t);
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

std::size_t nearest_index(std::span<const NavState> states, double t) {
  const auto it = std::lower_bound(states.begin(), states.end(), t,
                                   [](const NavState& s, double v) { return s.t < v; });
  if (it == states.begin()) return 0;
  if (it == states.end()) return states.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - states.begin());
  return (t - states[hi - 1].t <= it->t - t) ? hi - 1 : hi;
}

DvlBeamSample signed_sample(DvlBeamSample s, double sign) {
  for (double& y : s.beam_velocity) y *= sign;
  return s;
}

const NavState& require_truth(const SimulatedStreams& s, const char* stage) {
  if (s.truth.empty()) {
    throw NavError(ErrorCode::kStageDependency,
                   std::string(stage) + " needs truth.csv for its reference state");
  }
  return s.truth.front();
}

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kSimulate: return "simulate";
    case Stage::kCalibrate: return "calibrate";
    case Stage::kAlignInitial: return "align_initial";
    case Stage::kAlignMounting: return "align_mounting";
    case Stage::kFuse: return "fuse";
  }
  return "simulate";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : {Stage::kSimulate, Stage::kCalibrate, Stage::kAlignInitial, Stage::kAlignMounting,
                  Stage::kFuse}) {
    if (to_string(s) == name) return s;
  }
  throw NavError(ErrorCode::kInvalidArgument, "unknown stage '" + name + "'");
}

bool ScenarioConfig::has_stage(Stage stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

GeodeticPosition ScenarioConfig::origin() const {
  return GeodeticPosition{origin_latitude_deg * kDegToRad, origin_longitude_deg * kDegToRad, 0.0};
}

RotationMatrix ScenarioConfig::mounting() const {
  return rotation_from_euler(EulerAngles{mounting_rpy_deg(0) * kDegToRad,
                                         mounting_rpy_deg(1) * kDegToRad,
                                         mounting_rpy_deg(2) * kDegToRad});
}

DvlBeamGeometry ScenarioConfig::geometry() const {
  return janus_beam_geometry(beam_pitch_deg * kDegToRad);
}

DvlErrorModel ScenarioConfig::dvl_model() const {
  DvlErrorModel m;
  m.scale = dvl_scale;
  m.bias = dvl_bias;
  m.beam_noise_std = beam_noise_std;
  m.mounting = mounting().transpose();
  m.lever_arm = lever_arm;
  return m;
}

FusionConfig ScenarioConfig::fusion_config() const {
  FusionConfig f = fusion;
  f.mounting = mounting();
  f.geometry = geometry();
  return f;
}

void ScenarioConfig::validate() const {
  if (!(std::abs(origin_latitude_deg) < 89.0)) {
    throw NavError(ErrorCode::kInvalidArgument, "origin latitude must lie within +-89 deg");
  }
  if (!std::isfinite(origin_longitude_deg) || !std::isfinite(initial_heading_deg)) {
    throw NavError(ErrorCode::kInvalidArgument, "origin longitude and heading must be finite");
  }
  profile.validate();
  imu_error.validate();
  dvl_model().validate();
  geometry().validate();
  if (!(gnss_noise >= 0.0)) throw NavError(ErrorCode::kInvalidArgument, "gnss noise must be >= 0");
  fusion_config().validate();
  for (double w : initial_windows) {
    if (!(w > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "alignment windows must be > 0");
  }
  for (double w : mounting_windows) {
    if (!(w > 0.0)) throw NavError(ErrorCode::kInvalidArgument, "mounting windows must be > 0");
  }
  // Loaded streams are checked when the stage runs; simulated ones can be checked now.
  if (has_stage(Stage::kSimulate)) {
    auto check_fits = [&](Stage stage, const std::vector<double>& windows, const char* what) {
      if (!has_stage(stage)) return;
      for (double w : windows) {
        if (w > profile.duration) {
          std::ostringstream os;
          os << what << " window " << w << " s exceeds the profile duration " << profile.duration
             << " s";
          throw NavError(ErrorCode::kInvalidArgument, os.str());
        }
      }
    };
    check_fits(Stage::kAlignInitial, initial_windows, "initial alignment");
    check_fits(Stage::kAlignMounting, mounting_windows, "mounting");
  }
  if (stages.empty()) throw NavError(ErrorCode::kStageDependency, "no stages selected");
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (!(static_cast<int>(stages[i]) > static_cast<int>(stages[i - 1]))) {
      throw NavError(ErrorCode::kStageDependency,
                     "stage '" + to_string(stages[i]) + "' is out of order or repeated");
    }
  }
  for (const BeamOutage& o : outages) {
    if (!(o.t_end >= o.t_start)) {
      throw NavError(ErrorCode::kInvalidArgument, "outage window ends before it starts");
    }
    for (int b : o.beams) {
      if (b < 0 || b > 3) throw NavError(ErrorCode::kInvalidArgument, "outage beam out of range");
    }
  }
}

ScenarioConfig scenario_from_json(const json& doc) {
  ScenarioConfig cfg;
  ObjectReader root(doc, "");
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  root.read("input_dir", cfg.input_dir);
  if (const json* v = root.find("stages")) {
    if (!v->is_array()) bad_value("stages", "expected an array of stage names");
    cfg.stages.clear();
    for (const json& s : *v) {
      if (!s.is_string()) bad_value("stages", "expected an array of stage names");
      cfg.stages.push_back(stage_from_string(s.get<std::string>()));
    }
  }

  if (const json* v = root.find("origin")) {
    ObjectReader r(*v, "origin");
    r.read("latitude_deg", cfg.origin_latitude_deg);
    r.read("longitude_deg", cfg.origin_longitude_deg);
    r.read("heading_deg", cfg.initial_heading_deg);
    r.finish();
  }
  if (const json* v = root.find("profile")) {
    ObjectReader r(*v, "profile");
    parse_profile(r, cfg.profile);
    r.finish();
  }
  if (const json* v = root.find("imu")) {
    ObjectReader r(*v, "imu");
    r.read("grade", cfg.imu_grade);
    const ImuGrade grade = imu_grade_from_string(cfg.imu_grade);
    if (grade != ImuGrade::kCustom) cfg.imu_error = imu_grade_preset(grade);
    cfg.imu_error.grade = grade;
    r.read("accel_bias", cfg.imu_error.accel_bias);
    r.read("gyro_bias", cfg.imu_error.gyro_bias);
    r.read("accel_noise_std", cfg.imu_error.accel_noise_std);
    r.read("gyro_noise_std", cfg.imu_error.gyro_noise_std);
    r.finish();
  }
  if (const json* v = root.find("dvl")) {
    ObjectReader r(*v, "dvl");
    r.read("scale", cfg.dvl_scale);
    r.read("bias", cfg.dvl_bias);
    r.read("beam_noise_std", cfg.beam_noise_std);
    r.read("lever_arm", cfg.lever_arm);
    r.read("mounting_rpy_deg", cfg.mounting_rpy_deg);
    r.read("beam_pitch_deg", cfg.beam_pitch_deg);
    r.finish();
  }
  if (const json* v = root.find("gnss")) {
    ObjectReader r(*v, "gnss");
    r.read("noise_std", cfg.gnss_noise);
    r.finish();
  }
  if (const json* v = root.find("outages")) {
    if (!v->is_array()) bad_value("outages", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      ObjectReader r((*v)[i], "outages[" + std::to_string(i) + "]");
      BeamOutage o;
      r.read("t_start", o.t_start);
      r.read("t_end", o.t_end);
      std::vector<double> beams;
      r.read("beams", beams);
      for (double b : beams) {
        if (b != std::floor(b) || b < 1 || b > 4) {
          bad_value(r.key_path("beams"), "beam numbers run from 1 to 4");
        }
        o.beams.push_back(static_cast<int>(b) - 1);
      }
      r.finish();
      cfg.outages.push_back(o);
    }
  }
  if (const json* v = root.find("calibration")) {
    ObjectReader r(*v, "calibration");
    std::string mode = calibration_mode_name(cfg.calibration_mode);
    r.read("mode", mode);
    if (mode == "full") cfg.calibration_mode = CalibrationMode::kFull;
    else if (mode == "scalar") cfg.calibration_mode = CalibrationMode::kScalar;
    else bad_value("calibration.mode", "expected 'full' or 'scalar'");
    r.read("speed_floor", cfg.calibration.speed_floor);
    r.read("excitation_variance", cfg.calibration.excitation_variance);
    r.finish();
  }
  if (const json* v = root.find("alignment")) {
    ObjectReader r(*v, "alignment");
    std::string method = to_string(cfg.initial_method);
    r.read("initial_method", method);
    cfg.initial_method = alignment_method_from_string(method);
    if (cfg.initial_method == AlignmentMethod::kSvd) {
      bad_value("alignment.initial_method", "expected 'dva' or 'oba'");
    }
    r.read("initial_windows", cfg.initial_windows);
    r.read("mounting_windows", cfg.mounting_windows);
    r.read("colinearity_gate", cfg.alignment.colinearity_gate);
    r.read("min_singular_ratio", cfg.alignment.min_singular_ratio);
    r.read("eigen_gap", cfg.alignment.eigen_gap);
    r.read("oba_pairs", cfg.alignment.oba_pairs);
    r.finish();
  }
  if (const json* v = root.find("fusion")) {
    ObjectReader r(*v, "fusion");
    std::string mode = to_string(cfg.fusion.mode);
    r.read("mode", mode);
    cfg.fusion.mode = coupling_mode_from_string(mode);
    r.read("process_noise_psd", cfg.fusion.process_noise_psd);
    r.read("initial_std", cfg.fusion.initial_std);
    r.read("dvl_velocity_noise_std", cfg.fusion.dvl_velocity_noise_std);
    r.read("beam_noise_std", cfg.fusion.beam_noise_std);
    std::string loose = loose_noise_name(cfg.fusion.loose_noise);
    r.read("loose_noise", loose);
    if (loose == "user_set") cfg.fusion.loose_noise = LooseNoiseSource::kUserSet;
    else if (loose == "beam_propagated") cfg.fusion.loose_noise = LooseNoiseSource::kBeamPropagated;
    else bad_value("fusion.loose_noise", "expected 'user_set' or 'beam_propagated'");
    r.read("adaptive", cfg.fusion.adaptive);
    r.read("innovation_window", cfg.fusion.innovation_window);
    r.read("adaptive_floor", cfg.fusion.adaptive_floor);
    r.read("gate_probability", cfg.fusion.gate_probability);
    r.read("beam_sign", cfg.fusion.beam_sign);
    r.read("use_calibration", cfg.fuse_with_calibration);
    r.read("use_mounting_estimate", cfg.fuse_with_mounting_estimate);
    r.finish();
  }
  if (const json* v = root.find("metrics")) {
    ObjectReader r(*v, "metrics");
    r.read("horizontal_only", cfg.horizontal_metrics);
    r.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NavError(ErrorCode::kIo, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw NavError(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  return scenario_from_json(doc);
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json stages = json::array();
  for (Stage s : cfg.stages) stages.push_back(to_string(s));
  json outages = json::array();
  for (const BeamOutage& o : cfg.outages) {
    json beams = json::array();
    for (int b : o.beams) beams.push_back(b + 1);
    outages.push_back(json{{"t_start", o.t_start}, {"t_end", o.t_end}, {"beams", beams}});
  }
  const FusionConfig& f = cfg.fusion;
  return json{
      {"seed", cfg.seed},
      {"stages", stages},
      {"origin",
       {{"latitude_deg", cfg.origin_latitude_deg},
        {"longitude_deg", cfg.origin_longitude_deg},
        {"heading_deg", cfg.initial_heading_deg}}},
      {"profile", profile_json(cfg.profile)},
      {"imu", imu_json(cfg)},
      {"dvl",
       {{"scale", vec_json(cfg.dvl_scale)},
        {"bias", vec_json(cfg.dvl_bias)},
        {"beam_noise_std", cfg.beam_noise_std},
        {"lever_arm", vec_json(cfg.lever_arm)},
        {"mounting_rpy_deg", vec_json(cfg.mounting_rpy_deg)},
        {"beam_pitch_deg", cfg.beam_pitch_deg}}},
      {"gnss", {{"noise_std", cfg.gnss_noise}}},
      {"outages", outages},
      {"calibration",
       {{"mode", calibration_mode_name(cfg.calibration_mode)},
        {"speed_floor", cfg.calibration.speed_floor},
        {"excitation_variance", cfg.calibration.excitation_variance}}},
      {"alignment",
       {{"initial_method", to_string(cfg.initial_method)},
        {"initial_windows", cfg.initial_windows},
        {"mounting_windows", cfg.mounting_windows},
        {"colinearity_gate", cfg.alignment.colinearity_gate},
        {"min_singular_ratio", cfg.alignment.min_singular_ratio},
        {"eigen_gap", cfg.alignment.eigen_gap},
        {"oba_pairs", cfg.alignment.oba_pairs}}},
      {"fusion",
       {{"mode", to_string(f.mode)},
        {"process_noise_psd", array_json(f.process_noise_psd)},
        {"initial_std", array_json(f.initial_std)},
        {"dvl_velocity_noise_std", f.dvl_velocity_noise_std},
        {"beam_noise_std", f.beam_noise_std},
        {"loose_noise", loose_noise_name(f.loose_noise)},
        {"adaptive", f.adaptive},
        {"innovation_window", f.innovation_window},
        {"adaptive_floor", f.adaptive_floor},
        {"gate_probability", f.gate_probability},
        {"beam_sign", f.beam_sign},
        {"use_calibration", cfg.fuse_with_calibration},
        {"use_mounting_estimate", cfg.fuse_with_mounting_estimate}}},
      {"metrics", {{"horizontal_only", cfg.horizontal_metrics}}}};
}

std::vector<ReportRow> report_rows(const MetricsReport& r) {
  return {{"vrmse", r.vrmse, "m/s"},
          {"vrmse_raw", r.vrmse_raw, "m/s"},
          {"heading_ae", r.heading_ae, "deg"},
          {"heading_cmse", r.heading_cmse, "rad^2"},
          {"mounting_rmse", r.mounting_rmse, "deg"},
          {"prmse", r.prmse, "m"},
          {"mate", r.mate, "m"},
          {"tde", r.tde, "percent"},
          {"fde", r.fde, "m"}};
}

void write_report(const MetricsReport& report, const std::string& path) {
  CsvTable t;
  t.header = {"metric", "value", "unit"};
  for (const ReportRow& row : report_rows(report)) {
    t.rows.push_back({row.metric, num_or_missing(row.value), row.unit});
  }
  write_csv(t, path);
}

SimulatedStreams simulate_streams(const ScenarioConfig& cfg) {
  cfg.validate();
  SimulatedStreams s;
  s.truth = generate_trajectory(cfg.profile, cfg.origin(), cfg.initial_heading_deg * kDegToRad);
  const std::vector<ImuSample> ideal = ideal_imu_from_trajectory(s.truth);
  s.imu = corrupt_imu(ideal, cfg.imu_error, derive_seed(cfg.seed, kImuStream));
  s.dvl = simulate_dvl(s.truth, cfg.geometry(), cfg.dvl_model(), cfg.profile.dvl_rate,
                       derive_seed(cfg.seed, kDvlStream));
  if (!cfg.outages.empty()) s.dvl = apply_beam_outage(s.dvl, cfg.outages);
  if (cfg.fusion.beam_sign != 1.0) {
    for (DvlBeamSample& d : s.dvl) d = signed_sample(d, cfg.fusion.beam_sign);
  }
  s.gnss = simulate_gnss_velocity(s.truth, cfg.profile.gnss_rate, cfg.gnss_noise,
                                  derive_seed(cfg.seed, kGnssStream));
  return s;
}

MetricsReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const bool persist = !cfg.output_dir.empty();
  if (persist) ensure_dir(cfg.output_dir);
  auto out_path = [&](const char* name) { return join_path(cfg.output_dir, name); };

  MetricsReport report;
  SimulatedStreams s;
  const GeodeticPosition origin = cfg.origin();
  const double lat = origin.latitude;
  const DvlErrorModel dvl_model = cfg.dvl_model();
  const DvlBeamGeometry geometry = cfg.geometry();
  const double beam_sign = cfg.fusion.beam_sign;

  if (cfg.has_stage(Stage::kSimulate)) {
    const auto start = std::chrono::steady_clock::now();
    s = simulate_streams(cfg);
    if (persist) {
      export_nav_states(s.truth, out_path("truth.csv"));
      export_imu(s.imu, out_path("imu.csv"));
      export_dvl_beams(s.dvl, out_path("dvl_beams.csv"));
      export_gnss_velocity(s.gnss, out_path("gnss_vel.csv"));
    }
    report.stage_seconds["simulate"] = seconds_since(start);
  } else {
    const std::string in = cfg.input_dir.empty() ? cfg.output_dir : cfg.input_dir;
    if (in.empty()) {
      throw NavError(ErrorCode::kStageDependency, "no input directory for stages without simulate");
    }
    const auto load_if = [&](const char* name) { return fs::exists(join_path(in, name)); };
    const bool needs_imu = cfg.has_stage(Stage::kAlignInitial) ||
                           cfg.has_stage(Stage::kAlignMounting) || cfg.has_stage(Stage::kFuse);
    const bool needs_dvl = cfg.has_stage(Stage::kCalibrate) ||
                           cfg.has_stage(Stage::kAlignMounting) || cfg.has_stage(Stage::kFuse);
    if (needs_imu) s.imu = import_imu(join_path(in, "imu.csv"));
    if (needs_dvl) s.dvl = import_dvl_beams(join_path(in, "dvl_beams.csv"));
    if (cfg.has_stage(Stage::kCalibrate)) s.gnss = import_gnss_velocity(join_path(in, "gnss_vel.csv"));
    if (load_if("truth.csv")) s.truth = import_nav_states(join_path(in, "truth.csv"));
  }

  // Beam data now carries the configured sign; undo it for the solvers.
  const auto dvl_velocity = [&](const DvlBeamSample& d) {
    return ls_beam_velocity(beam_sign == 1.0 ? d : signed_sample(d, beam_sign), geometry);
  };

  std::optional<CalibrationResult> calibration;
  if (cfg.has_stage(Stage::kCalibrate)) {
    const auto start = std::chrono::steady_clock::now();
    require_truth(s, "calibrate");
    std::vector<DvlBeamSample> usable;
    for (const DvlBeamSample& d : s.dvl) {
      if (d.valid_count() >= 3) usable.push_back(d);
    }
    std::vector<double> t_dvl, t_gnss;
    for (const auto& d : usable) t_dvl.push_back(d.t);
    for (const auto& g : s.gnss) t_gnss.push_back(g.t);
    const double tol = 0.5 * median_spacing(usable);
    std::vector<Vec3> v_dvl, v_true;
    std::vector<GnssVelocitySample> g_ref;
    std::vector<RotationMatrix> attitude;
    for (const auto& [i, j] : match_nearest(t_dvl, t_gnss, tol)) {
      const std::size_t k = nearest_index(s.truth, s.gnss[j].t);
      v_dvl.push_back(dvl_velocity(usable[i]));
      g_ref.push_back(s.gnss[j]);
      attitude.push_back(s.truth[k].attitude);
      v_true.push_back(true_dvl_velocity(s.truth, nearest_index(s.truth, usable[i].t), dvl_model));
    }
    CalibrationResult cal =
        calibrate_dvl_full(v_dvl, g_ref, attitude, dvl_model.mounting, cfg.calibration);
    std::vector<Vec3> corrected;
    for (const Vec3& v : v_dvl) corrected.push_back(apply_calibration(v, cal, cfg.calibration_mode));
    report.vrmse = vrmse(corrected, v_true);
    report.vrmse_raw = vrmse(v_dvl, v_true);
    calibration = cal;
    if (persist) {
      json doc{{"mode", calibration_mode_name(cfg.calibration_mode)},
               {"scalar_scale", cal.scalar_scale ? json(*cal.scalar_scale) : json(nullptr)},
               {"scale", vec_json(cal.full_scale)},
               {"bias", vec_json(cal.full_bias)},
               {"scale_observable", cal.scale_observable},
               {"residual_vrmse", cal.residual_vrmse},
               {"samples_used", cal.samples_used}};
      write_text(doc.dump(2) + "\n", out_path("calibration.json"));
    }
    report.stage_seconds["calibrate"] = seconds_since(start);
  }

  if (cfg.has_stage(Stage::kAlignInitial)) {
    const auto start = std::chrono::steady_clock::now();
    if (s.imu.size() < 2) throw NavError(ErrorCode::kStageDependency, "align_initial needs IMU data");
    const double t0 = s.imu[0].t - (s.imu[1].t - s.imu[0].t);
    const double height = s.truth.empty() ? origin.height - cfg.profile.depth
                                          : s.truth.front().position.height;
    CsvTable table;
    table.header = {"method", "window", "yaw_deg", "ae_deg", "condition_indicator"};
    std::vector<double> est, truth_yaw;
    for (double w : cfg.initial_windows) {
      const AlignmentResult r =
          align_initial(s.imu, lat, t0, w, cfg.initial_method, cfg.alignment, height);
      const double yaw = heading_at_end(r, s.imu, lat, t0 + w);
      std::optional<double> ae;
      if (!s.truth.empty()) {
        const double ref = euler_from_rotation(s.truth[nearest_index(s.truth, t0 + w)].attitude).yaw;
        ae = std::abs(cyclic_error(yaw, ref)) * kRadToDeg;
        est.push_back(yaw);
        truth_yaw.push_back(ref);
      }
      table.rows.push_back({to_string(cfg.initial_method), format_double(w),
                            format_double(yaw * kRadToDeg), num_or_missing(ae),
                            format_double(r.condition_indicator)});
    }
    if (!est.empty()) {
      double sum = 0.0;
      for (std::size_t i = 0; i < est.size(); ++i) sum += std::abs(cyclic_error(est[i], truth_yaw[i]));
      report.heading_ae = sum / static_cast<double>(est.size()) * kRadToDeg;
      report.heading_cmse = cmse(est, truth_yaw);
    }
    if (persist) write_csv(table, out_path("alignment_initial.csv"));
    report.stage_seconds["align_initial"] = seconds_since(start);
  }

  std::optional<RotationMatrix> mounting_estimate;
  if (cfg.has_stage(Stage::kAlignMounting)) {
    const auto start = std::chrono::steady_clock::now();
    const NavState& initial = require_truth(s, "align_mounting");
    const std::vector<NavState> ins = dead_reckon(initial, s.imu);
    const RotationMatrix true_mounting = cfg.mounting();
    CsvTable table;
    table.header = {"method", "window", "roll_deg", "pitch_deg", "yaw_deg",
                    "rmse_deg", "condition_indicator", "residual_rms"};
    double sum_sq = 0.0;
    double longest = -1.0;
    for (double w : cfg.mounting_windows) {
      std::vector<Vec3> v_body, v_dvl;
      for (const DvlBeamSample& d : s.dvl) {
        if (d.t < initial.t || d.t > initial.t + w + 1e-9) continue;
        if (d.valid_count() < 3) continue;
        Vec3 v = dvl_velocity(d);
        if (calibration) v = apply_calibration(v, *calibration, cfg.calibration_mode);
        const NavState& st = ins[nearest_index(ins, d.t)];
        v_body.push_back(st.attitude.transpose() * st.velocity_n);
        v_dvl.push_back(v);
      }
      const AlignmentResult r = wahba_svd(v_body, v_dvl, cfg.alignment);
      const double rmse = evaluate_mounting(r.rotation, true_mounting);
      sum_sq += rmse * rmse;
      if (w > longest) {
        longest = w;
        mounting_estimate = r.rotation;
      }
      table.rows.push_back({"svd", format_double(w), format_double(r.euler.roll * kRadToDeg),
                            format_double(r.euler.pitch * kRadToDeg),
                            format_double(r.euler.yaw * kRadToDeg), format_double(rmse),
                            format_double(r.condition_indicator), format_double(r.residual_rms)});
    }
    report.mounting_rmse = std::sqrt(sum_sq / static_cast<double>(cfg.mounting_windows.size()));
    if (persist) write_csv(table, out_path("alignment_mounting.csv"));
    report.stage_seconds["align_mounting"] = seconds_since(start);
  }

  if (cfg.has_stage(Stage::kFuse)) {
    const auto start = std::chrono::steady_clock::now();
    const NavState& initial = require_truth(s, "fuse");
    FusionConfig fc = cfg.fusion_config();
    if (mounting_estimate && cfg.fuse_with_mounting_estimate) fc.mounting = *mounting_estimate;
    if (calibration && cfg.fuse_with_calibration) {
      fc.calibration = calibration;
      fc.calibration_mode = cfg.calibration_mode;
    }
    const FusionRun run = run_fusion(s.imu, s.dvl, cfg.outages, initial, fc);
    if (persist) {
      export_nav_states(run.trajectory, out_path("est.csv"));
      CsvTable log;
      log.header = {"t", "nis", "beams_used", "update_type", "dz1", "dz2", "dz3", "dz4"};
      for (const EpochRecord& e : run.log.epochs) {
        std::vector<std::string> row{format_double(e.t), format_double(e.nis),
                                     std::to_string(e.beams_used), to_string(e.type)};
        for (Eigen::Index i = 0; i < 4; ++i) {
          row.push_back(i < e.innovation.size() ? format_double(e.innovation(i)) : std::string());
        }
        log.rows.push_back(std::move(row));
      }
      write_csv(log, out_path("fusion_log.csv"));
    }
    const auto [est, truth] = align_by_time(run.trajectory, s.truth);
    if (est.size() >= 2) {
      const TrajectoryMetrics m = evaluate_trajectory(est, truth, cfg.horizontal_metrics);
      report.prmse = m.prmse;
      report.mate = m.mate;
      report.tde = m.tde;
      report.fde = m.fde;
    }
    report.stage_seconds["fuse"] = seconds_since(start);
  }

  if (persist) {
    write_report(report, out_path("report.csv"));
    write_text(scenario_to_json(cfg).dump(2) + "\n", out_path("config.json"));
  }
  return report;
}

MetricsReport evaluate_files(const std::string& est_path, const std::string& truth_path,
                             const std::string& report_path, bool horizontal_only) {
  const std::vector<NavState> est_all = import_nav_states(est_path);
  const std::vector<NavState> truth_all = import_nav_states(truth_path);
  const auto [est, truth] = align_by_time(est_all, truth_all);
  if (est.size() < 2) {
    throw NavError(ErrorCode::kLengthMismatch, "estimate and truth share fewer than 2 timestamps");
  }
  const TrajectoryMetrics m = evaluate_trajectory(est, truth, horizontal_only);
  MetricsReport report;
  report.prmse = m.prmse;
  report.mate = m.mate;
  report.tde = m.tde;
  report.fde = m.fde;
  if (!report_path.empty()) write_report(report, report_path);
  return report;
}

void set_dotted(json& doc, const std::string& key, const json& value) {
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw NavError(ErrorCode::kUnknownKey, "empty sweep key");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw NavError(ErrorCode::kUnknownKey, "unknown sweep key '" + key + "'");
    }
    node = &(*node)[parts[i]];
  }
  *node = value;
}

std::vector<SweepCell> sweep(const json& config_template,
                             const std::map<std::string, std::vector<json>>& grid,
                             const SweepOptions& options, const std::string& output_dir) {
  if (options.seeds < 1) throw NavError(ErrorCode::kInvalidArgument, "seed count must be >= 1");
  if (options.workers < 1) throw NavError(ErrorCode::kInvalidArgument, "worker count must be >= 1");
  if (options.keep_runs && output_dir.empty()) {
    throw NavError(ErrorCode::kInvalidArgument, "keeping runs needs an output directory");
  }
  const ScenarioConfig base = scenario_from_json(config_template);
  const json resolved = scenario_to_json(base);

  // Cartesian product in key order, last key varying fastest.
  std::vector<SweepCell> cells(1);
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw NavError(ErrorCode::kInvalidArgument, "sweep key '" + key + "' has no values");
    json probe = resolved;
    set_dotted(probe, key, values.front());
    std::vector<SweepCell> next;
    for (const SweepCell& c : cells) {
      for (const json& v : values) {
        SweepCell n = c;
        n.assignment[key] = v;
        next.push_back(std::move(n));
      }
    }
    cells = std::move(next);
  }

  // Configs are built up front so validation errors surface before any work.
  struct Task {
    std::size_t cell, seed;
    ScenarioConfig cfg;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    json doc = resolved;
    for (const auto& [key, value] : cells[c].assignment) set_dotted(doc, key, value);
    cells[c].runs.resize(static_cast<std::size_t>(options.seeds));
    for (int j = 0; j < options.seeds; ++j) {
      json run_doc = doc;
      run_doc["seed"] = base.seed + static_cast<std::uint64_t>(j);
      ScenarioConfig cfg = scenario_from_json(run_doc);
      if (options.keep_runs) {
        cfg.output_dir = join_path(output_dir, "cell_" + std::to_string(c) + "/seed_" +
                                                   std::to_string(cfg.seed));
      }
      tasks.push_back(Task{c, static_cast<std::size_t>(j), std::move(cfg)});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      try {
        MetricsReport r = run_scenario(tasks[i].cfg);
        r.stage_seconds.clear();
        cells[tasks[i].cell].runs[tasks[i].seed] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n_workers = std::min<int>(options.workers, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return cells;
}

void write_sweep_table(const std::vector<SweepCell>& cells, const std::string& path) {
  CsvTable t;
  t.header = {"cell"};
  std::vector<std::string> keys;
  if (!cells.empty()) {
    for (const auto& [key, value] : cells.front().assignment) keys.push_back(key);
  }
  for (const std::string& k : keys) t.header.push_back(k);
  t.header.push_back("seeds");
  const std::vector<ReportRow> names = report_rows(MetricsReport{});
  for (const ReportRow& r : names) {
    t.header.push_back(r.metric + "_mean");
    t.header.push_back(r.metric + "_std");
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::string> row{std::to_string(c)};
    for (const std::string& k : keys) {
      const json& v = cells[c].assignment.at(k);
      std::string text = v.is_string() ? v.get<std::string>() : v.dump();
      // Keep array values in one cell.
      std::replace(text.begin(), text.end(), ',', ';');
      row.push_back(text);
    }
    row.push_back(std::to_string(cells[c].runs.size()));
    for (std::size_t m = 0; m < names.size(); ++m) {
      std::vector<double> xs;
      for (const MetricsReport& r : cells[c].runs) {
        if (const auto v = report_rows(r)[m].value) xs.push_back(*v);
      }
      if (xs.size() != cells[c].runs.size() || xs.empty()) {
        row.push_back("not-computed");
        row.push_back("not-computed");
        continue;
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
      row.push_back(format_double(mean));
      row.push_back(format_double(sd));
    }
    t.rows.push_back(std::move(row));
  }
  write_csv(t, path);
}

}  // namespace auvnav
