// auvnav command-line front end. Exit codes: 0 ok, 2 validation, 3 numerical.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "auvnav/error.hpp"
#include "auvnav/io.hpp"
#include "auvnav/scenario.hpp"

using namespace auvnav;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string in;
  std::string mode;
};

void add_common(CLI::App* cmd, Common& c, bool with_in) {
  cmd->add_option("--config", c.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  if (with_in) cmd->add_option("--in", c.in, "Directory holding input CSVs (default: --out)");
}

json load_doc(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw NavError(ErrorCode::kIo, "cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw NavError(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

ScenarioConfig base_config(const Common& c) {
  ScenarioConfig cfg = scenario_from_json(load_doc(c.config));
  if (c.seed) cfg.seed = *c.seed;
  cfg.output_dir = c.out;
  if (!c.in.empty()) cfg.input_dir = c.in;
  return cfg;
}

void print_report(const MetricsReport& r) {
  std::cout << kReportHeader << '\n';
  for (const ReportRow& row : report_rows(r)) {
    std::cout << row.metric << ',' << (row.value ? format_double(*row.value) : "not-computed")
              << ',' << row.unit << '\n';
  }
  for (const auto& [stage, sec] : r.stage_seconds) {
    std::cerr << "timing " << stage << ' ' << sec << " s\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"AUV inertial/DVL navigation toolkit"};
  app.require_subcommand(1);

  Common sim, cal, aln, fus, pipe, swp;
  std::string eval_est, eval_truth, eval_in, eval_out = "out";
  std::string align_method, adaptive, grid_path;
  std::vector<double> windows;
  std::optional<double> beam_sign;
  int seeds = 1, jobs = 1;
  bool keep_runs = false;

  auto* c_sim = app.add_subcommand("simulate", "Generate truth and sensor streams");
  add_common(c_sim, sim, false);

  auto* c_cal = app.add_subcommand("calibrate", "Estimate DVL scale and bias against GNSS velocity");
  add_common(c_cal, cal, true);
  c_cal->add_option("--mode", cal.mode, "full or scalar")->check(CLI::IsMember({"full", "scalar"}));

  auto* c_aln = app.add_subcommand("align", "Initial attitude or DVL mounting alignment");
  add_common(c_aln, aln, true);
  c_aln->add_option("--mode", aln.mode, "initial or mounting")
      ->required()
      ->check(CLI::IsMember({"initial", "mounting"}));
  c_aln->add_option("--method", align_method, "dva or oba (initial mode)")
      ->check(CLI::IsMember({"dva", "oba"}));
  c_aln->add_option("--windows", windows, "Window lengths in seconds");

  auto* c_fus = app.add_subcommand("fuse", "Run the error-state EKF over recorded streams");
  add_common(c_fus, fus, true);
  c_fus->add_option("--mode", fus.mode, "lc, tc or free")->check(CLI::IsMember({"lc", "tc", "free"}));
  c_fus->add_option("--adaptive", adaptive, "on or off")->check(CLI::IsMember({"on", "off"}));
  c_fus->add_option("--beam-sign", beam_sign, "+1 or -1 beam velocity sign convention");

  auto* c_eval = app.add_subcommand("evaluate", "Score est.csv against truth.csv");
  c_eval->add_option("--in", eval_in, "Directory holding est.csv and truth.csv");
  c_eval->add_option("--est", eval_est, "Estimated trajectory CSV");
  c_eval->add_option("--truth", eval_truth, "Ground-truth trajectory CSV");
  c_eval->add_option("--out", eval_out, "Directory for report.csv")->capture_default_str();

  auto* c_pipe = app.add_subcommand("pipeline", "Run every configured stage end to end");
  add_common(c_pipe, pipe, false);
  c_pipe->add_option("--mode", pipe.mode, "Fusion mode: lc, tc or free")
      ->check(CLI::IsMember({"lc", "tc", "free"}));

  auto* c_swp = app.add_subcommand("sweep", "Grid of scenario runs over seeds");
  add_common(c_swp, swp, false);
  c_swp->add_option("--mode", swp.mode, "Fusion mode: lc, tc or free")
      ->check(CLI::IsMember({"lc", "tc", "free"}));
  c_swp->add_option("--grid", grid_path, "JSON object of dotted key -> value list")
      ->required()
      ->check(CLI::ExistingFile);
  c_swp->add_option("--seeds", seeds, "Seeds per cell")->capture_default_str();
  c_swp->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  c_swp->add_flag("--keep-runs", keep_runs, "Persist every run under <out>/cell_i/seed_j");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  MetricsReport report;
  if (*c_sim) {
    ScenarioConfig cfg = base_config(sim);
    cfg.stages = {Stage::kSimulate};
    report = run_scenario(cfg);
  } else if (*c_cal) {
    ScenarioConfig cfg = base_config(cal);
    cfg.stages = {Stage::kCalibrate};
    if (cal.mode == "scalar") cfg.calibration_mode = CalibrationMode::kScalar;
    if (cal.mode == "full") cfg.calibration_mode = CalibrationMode::kFull;
    report = run_scenario(cfg);
  } else if (*c_aln) {
    ScenarioConfig cfg = base_config(aln);
    if (aln.mode == "initial") {
      cfg.stages = {Stage::kAlignInitial};
      if (!align_method.empty()) cfg.initial_method = alignment_method_from_string(align_method);
      if (!windows.empty()) cfg.initial_windows = windows;
    } else {
      cfg.stages = {Stage::kAlignMounting};
      if (!windows.empty()) cfg.mounting_windows = windows;
    }
    report = run_scenario(cfg);
  } else if (*c_fus) {
    ScenarioConfig cfg = base_config(fus);
    cfg.stages = {Stage::kFuse};
    if (!fus.mode.empty()) cfg.fusion.mode = coupling_mode_from_string(fus.mode);
    if (!adaptive.empty()) cfg.fusion.adaptive = adaptive == "on";
    if (beam_sign) cfg.fusion.beam_sign = *beam_sign;
    report = run_scenario(cfg);
  } else if (*c_eval) {
    const std::string dir = eval_in.empty() ? eval_out : eval_in;
    const std::string est = eval_est.empty() ? dir + "/est.csv" : eval_est;
    const std::string truth = eval_truth.empty() ? dir + "/truth.csv" : eval_truth;
    std::filesystem::create_directories(eval_out);
    report = evaluate_files(est, truth, eval_out + "/report.csv");
  } else if (*c_pipe) {
    ScenarioConfig cfg = base_config(pipe);
    if (!pipe.mode.empty()) cfg.fusion.mode = coupling_mode_from_string(pipe.mode);
    report = run_scenario(cfg);
  } else if (*c_swp) {
    json doc = load_doc(swp.config);
    if (swp.seed) doc["seed"] = *swp.seed;
    if (!swp.mode.empty()) doc["fusion"]["mode"] = swp.mode;
    const json grid_doc = load_doc(grid_path);
    if (!grid_doc.is_object()) throw NavError(ErrorCode::kInvalidArgument, "grid must be a JSON object");
    std::map<std::string, std::vector<json>> grid;
    for (const auto& item : grid_doc.items()) {
      if (!item.value().is_array()) {
        throw NavError(ErrorCode::kInvalidArgument, "grid values for '" + item.key() + "' must be a list");
      }
      grid[item.key()] = item.value().get<std::vector<json>>();
    }
    std::filesystem::create_directories(swp.out);
    const auto cells = sweep(doc, grid, SweepOptions{seeds, jobs, keep_runs}, swp.out);
    write_sweep_table(cells, swp.out + "/sweep.csv");
    std::cout << "wrote " << cells.size() << " cell(s) to " << swp.out << "/sweep.csv\n";
    return 0;
  }
  print_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NavError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kExitValidation;
  }
}
