#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auvnav/alignment.hpp"
#include "auvnav/calibration.hpp"
#include "auvnav/fusion.hpp"
#include "auvnav/sensors.hpp"

namespace auvnav {

enum class Stage { kSimulate, kCalibrate, kAlignInitial, kAlignMounting, kFuse };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

/// Angles are kept in degrees exactly as written so a config snapshot
/// reproduces a run bit for bit.
inline TrajectoryProfile default_scenario_profile() {
  TrajectoryProfile p;
  p.kind = ProfileKind::kLawnmower;
  p.duration = 300.0;
  p.surge_amplitude = 0.3;
  p.crab_amplitude = 0.3;
  p.heave_amplitude = 0.1;
  return p;
}

struct ScenarioConfig {
  double origin_latitude_deg = 32.8;
  double origin_longitude_deg = 35.0;
  double initial_heading_deg = 30.0;
  // Long enough for the default alignment windows, with the excitation mounting alignment needs.
  TrajectoryProfile profile = default_scenario_profile();

  std::string imu_grade = "custom";  // preset name, fields below override it
  ImuErrorModel imu_error;

  Vec3 dvl_scale = Vec3::Zero();
  Vec3 dvl_bias = Vec3::Zero();  // m/s
  double beam_noise_std = 0.02;  // m/s
  Vec3 lever_arm = Vec3::Zero();  // m, body frame
  Vec3 mounting_rpy_deg = Vec3::Zero();  // Euler angles of T_d^b
  double beam_pitch_deg = 20.0;
  double gnss_noise = 0.02;  // m/s
  std::vector<BeamOutage> outages;

  CalibrationMode calibration_mode = CalibrationMode::kFull;
  CalibrationOptions calibration;

  AlignmentMethod initial_method = AlignmentMethod::kDva;
  std::vector<double> initial_windows{120.0};
  std::vector<double> mounting_windows{120.0};
  AlignmentOptions alignment;

  FusionConfig fusion;  // mounting and geometry are filled from the DVL section
  bool fuse_with_calibration = true;
  bool fuse_with_mounting_estimate = true;
  bool horizontal_metrics = true;

  std::vector<Stage> stages{Stage::kSimulate, Stage::kCalibrate, Stage::kAlignInitial,
                            Stage::kAlignMounting, Stage::kFuse};
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: keep everything in memory
  std::string input_dir;   // streams for runs without `simulate`; defaults to output_dir

  void validate() const;
  bool has_stage(Stage stage) const;

  GeodeticPosition origin() const;
  RotationMatrix mounting() const;  // T_d^b
  DvlBeamGeometry geometry() const;
  DvlErrorModel dvl_model() const;
  FusionConfig fusion_config() const;
};

/// Strict parse: unknown keys and wrong types are validation errors.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);
/// Complete, resolved config. Directories are left out so snapshots from
/// different output locations compare equal.
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// Report values; unset means the producing stage did not run.
struct MetricsReport {
  std::optional<double> vrmse;          // m/s, calibrated DVL velocity
  std::optional<double> vrmse_raw;      // m/s, uncalibrated
  std::optional<double> heading_ae;     // deg, mean over initial windows
  std::optional<double> heading_cmse;   // rad^2
  std::optional<double> mounting_rmse;  // deg, RMS over mounting windows
  std::optional<double> prmse;          // m
  std::optional<double> mate;           // m
  std::optional<double> tde;            // percent
  std::optional<double> fde;            // m
  std::map<std::string, double> stage_seconds;  // wall clock, never persisted
};

struct ReportRow {
  std::string metric;
  std::optional<double> value;
  std::string unit;
};

std::vector<ReportRow> report_rows(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::string& path);

struct SimulatedStreams {
  std::vector<NavState> truth;
  std::vector<ImuSample> imu;
  std::vector<DvlBeamSample> dvl;  // outages and beam sign applied
  std::vector<GnssVelocitySample> gnss;
};

/// The `simulate` stage without persistence.
SimulatedStreams simulate_streams(const ScenarioConfig& cfg);

MetricsReport run_scenario(const ScenarioConfig& cfg);

/// Scores an estimated trajectory file against truth and writes report.csv.
MetricsReport evaluate_files(const std::string& est_path, const std::string& truth_path,
                             const std::string& report_path, bool horizontal_only = true);

/// Sets a dotted key ("profile.duration") in a config document. The key must
/// already exist in the resolved document.
void set_dotted(nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

struct SweepCell {
  std::map<std::string, nlohmann::json> assignment;
  std::vector<MetricsReport> runs;  // one per seed, in seed order
};

struct SweepOptions {
  int seeds = 1;
  int workers = 1;
  bool keep_runs = false;  // persist each run under output_dir/cell_i/seed_j
};

/// Cartesian product of `grid` over the template, each cell run for seeds
/// template.seed .. template.seed + seeds - 1. Results do not depend on the
/// worker count.
std::vector<SweepCell> sweep(const nlohmann::json& config_template,
                             const std::map<std::string, std::vector<nlohmann::json>>& grid,
                             const SweepOptions& options, const std::string& output_dir = {});

/// One row per cell: grid values, seed count, and mean/std per metric.
void write_sweep_table(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace auvnav
