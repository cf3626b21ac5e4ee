#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "auvnav/alignment.hpp"
#include "auvnav/fusion.hpp"
#include "auvnav/metrics.hpp"
#include "auvnav/scenario.hpp"
#include "auvnav/strapdown.hpp"

namespace py = pybind11;
using namespace auvnav;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

// Tables mirror the CSV schemas: imu (t, fx..wz), dvl (t, y1..y4, v1..v4),
// nav (t, lat, lon, h, vn, ve, vd, roll, pitch, yaw).

void need_cols(const RowMatrix& m, Eigen::Index cols, const char* what) {
  if (m.cols() != cols) {
    throw NavError(ErrorCode::kSchemaMismatch,
                   std::string(what) + " table needs " + std::to_string(cols) + " columns");
  }
}

std::vector<ImuSample> imu_from(const RowMatrix& m) {
  need_cols(m, 7, "imu");
  std::vector<ImuSample> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        ImuSample{m(i, 0), Vec3(m(i, 1), m(i, 2), m(i, 3)), Vec3(m(i, 4), m(i, 5), m(i, 6))};
  }
  return out;
}

RowMatrix imu_to(std::span<const ImuSample> s) {
  RowMatrix m(static_cast<Eigen::Index>(s.size()), 7);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = s[i].t;
    m.block<1, 3>(r, 1) = s[i].specific_force_b.transpose();
    m.block<1, 3>(r, 4) = s[i].angular_rate_b.transpose();
  }
  return m;
}

std::vector<DvlBeamSample> dvl_from(const RowMatrix& m) {
  need_cols(m, 9, "dvl");
  std::vector<DvlBeamSample> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    DvlBeamSample& d = out[static_cast<std::size_t>(i)];
    d.t = m(i, 0);
    for (std::size_t b = 0; b < 4; ++b) {
      d.beam_velocity[b] = m(i, 1 + static_cast<Eigen::Index>(b));
      d.valid[b] = m(i, 5 + static_cast<Eigen::Index>(b)) != 0.0;
    }
  }
  return out;
}

RowMatrix dvl_to(std::span<const DvlBeamSample> s) {
  RowMatrix m(static_cast<Eigen::Index>(s.size()), 9);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = s[i].t;
    for (std::size_t b = 0; b < 4; ++b) {
      m(r, 1 + static_cast<Eigen::Index>(b)) = s[i].beam_velocity[b];
      m(r, 5 + static_cast<Eigen::Index>(b)) = s[i].valid[b] ? 1.0 : 0.0;
    }
  }
  return m;
}

NavState nav_from_row(const Eigen::Ref<const Eigen::VectorXd>& r) {
  if (r.size() != 10) throw NavError(ErrorCode::kSchemaMismatch, "nav state needs 10 values");
  NavState s;
  s.t = r(0);
  s.position = GeodeticPosition{r(1), r(2), r(3)};
  s.velocity_n = Vec3(r(4), r(5), r(6));
  s.attitude = rotation_from_euler(EulerAngles{r(7), r(8), r(9)});
  return s;
}

std::vector<NavState> nav_from(const RowMatrix& m) {
  need_cols(m, 10, "nav");
  std::vector<NavState> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(nav_from_row(m.row(i).transpose()));
  return out;
}

RowMatrix nav_to(std::span<const NavState> s) {
  RowMatrix m(static_cast<Eigen::Index>(s.size()), 10);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const EulerAngles e = euler_from_rotation(s[i].attitude);
    m.row(r) << s[i].t, s[i].position.latitude, s[i].position.longitude, s[i].position.height,
        s[i].velocity_n.transpose(), e.roll, e.pitch, e.yaw;
  }
  return m;
}

std::vector<Vec3> vecs_from(const RowMatrix& m) {
  need_cols(m, 3, "vector");
  std::vector<Vec3> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m(i, 0), m(i, 1), m(i, 2));
  return out;
}

ScenarioConfig config_from(const std::string& text) {
  return scenario_from_json(nlohmann::json::parse(text));
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  for (const ReportRow& row : report_rows(r)) {
    d[py::str(row.metric)] = row.value ? py::cast(*row.value) : py::none();
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AUV inertial/DVL navigation core";

  static py::exception<NavError> nav_error(m, "NavError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NavError& e) {
      py::set_error(nav_error, e.what());
    } catch (const nlohmann::json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("rotation_from_euler", [](double roll, double pitch, double yaw) {
    return rotation_from_euler(EulerAngles{roll, pitch, yaw}).matrix();
  }, py::arg("roll"), py::arg("pitch"), py::arg("yaw"));
  m.def("euler_from_rotation", [](const Mat3& r) {
    const EulerAngles e = euler_from_rotation(RotationMatrix::from_matrix(r));
    return py::make_tuple(e.roll, e.pitch, e.yaw);
  });
  m.def("gravity_n", [](double lat, double h) { return gravity_n(GeodeticPosition{lat, 0.0, h}); },
        py::arg("lat"), py::arg("h") = 0.0);

  m.def("simulate", [](const std::string& config_json) {
    const SimulatedStreams s = simulate_streams(config_from(config_json));
    RowMatrix gnss(static_cast<Eigen::Index>(s.gnss.size()), 4);
    for (std::size_t i = 0; i < s.gnss.size(); ++i) {
      gnss.row(static_cast<Eigen::Index>(i)) << s.gnss[i].t, s.gnss[i].v_n.transpose();
    }
    py::dict d;
    d["truth"] = nav_to(s.truth);
    d["imu"] = imu_to(s.imu);
    d["dvl"] = dvl_to(s.dvl);
    d["gnss"] = gnss;
    return d;
  }, py::arg("config_json"), "Simulate truth and sensor tables from a JSON config string.");

  m.def("run_scenario", [](const std::string& config_json) {
    py::gil_scoped_release release;
    const MetricsReport r = run_scenario(config_from(config_json));
    py::gil_scoped_acquire acquire;
    return report_dict(r);
  }, py::arg("config_json"));

  m.def("dead_reckon", [](const Eigen::VectorXd& initial, const RowMatrix& imu) {
    return nav_to(dead_reckon(nav_from_row(initial), imu_from(imu)));
  }, py::arg("initial"), py::arg("imu"));

  m.def("ls_beam_velocity", [](const RowMatrix& dvl_row, double beam_pitch_deg) {
    const auto s = dvl_from(dvl_row);
    if (s.size() != 1) throw NavError(ErrorCode::kInvalidArgument, "expected one dvl row");
    return ls_beam_velocity(s.front(), janus_beam_geometry(beam_pitch_deg * kDegToRad));
  }, py::arg("dvl_row"), py::arg("beam_pitch_deg") = 20.0);

  m.def("fuse", [](const RowMatrix& imu, const RowMatrix& dvl, const Eigen::VectorXd& initial,
                   const std::string& mode, bool adaptive, const Vec3& mounting_rpy) {
    FusionConfig cfg;
    cfg.mode = coupling_mode_from_string(mode);
    cfg.adaptive = adaptive;
    cfg.mounting = rotation_from_euler(EulerAngles{mounting_rpy(0), mounting_rpy(1), mounting_rpy(2)});
    const FusionRun run = run_fusion(imu_from(imu), dvl_from(dvl), nav_from_row(initial), cfg);
    Eigen::VectorXd nis(static_cast<Eigen::Index>(run.log.epochs.size()));
    for (std::size_t i = 0; i < run.log.epochs.size(); ++i) {
      nis(static_cast<Eigen::Index>(i)) = run.log.epochs[i].nis;
    }
    py::dict d;
    d["est"] = nav_to(run.trajectory);
    d["nis"] = nis;
    return d;
  }, py::arg("imu"), py::arg("dvl"), py::arg("initial"), py::arg("mode") = "lc",
     py::arg("adaptive") = false, py::arg("mounting_rpy") = Vec3::Zero());

  m.def("align_heading", [](const RowMatrix& imu, double lat, double window,
                            const std::string& method, double height) {
    const auto samples = imu_from(imu);
    if (samples.size() < 2) throw NavError(ErrorCode::kInvalidArgument, "need at least 2 IMU rows");
    const double t0 = samples[0].t - (samples[1].t - samples[0].t);
    const AlignmentResult r = align_initial(samples, lat, t0, window,
                                            alignment_method_from_string(method), {}, height);
    return heading_at_end(r, samples, lat, t0 + window);
  }, py::arg("imu"), py::arg("lat"), py::arg("window"), py::arg("method") = "dva",
     py::arg("height") = 0.0, "Heading (rad) at the end of the alignment window.");

  m.def("wahba_svd", [](const RowMatrix& v_body, const RowMatrix& v_dvl) {
    return wahba_svd(vecs_from(v_body), vecs_from(v_dvl)).rotation.matrix();
  }, py::arg("v_body"), py::arg("v_dvl"));

  m.def("evaluate_trajectory", [](const RowMatrix& est, const RowMatrix& truth, bool horizontal) {
    const TrajectoryMetrics t = evaluate_trajectory(nav_from(est), nav_from(truth), horizontal);
    py::dict d;
    d["prmse"] = t.prmse;
    d["mate"] = t.mate;
    d["tde"] = t.tde;
    d["fde"] = t.fde;
    return d;
  }, py::arg("est"), py::arg("truth"), py::arg("horizontal_only") = true);

  m.def("cyclic_error", &cyclic_error, py::arg("psi_hat"), py::arg("psi"));
  m.def("chi_square_bounds", &chi_square_bounds, py::arg("dof"), py::arg("probability"));
}
