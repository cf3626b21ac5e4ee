import math

import numpy as np
import pytest

import auvnav


def small_config(**over):
    cfg = {
        "seed": 11,
        "profile": {"kind": "lawnmower", "duration": 60, "leg_length": 40,
                    "surge_amplitude": 0.3, "crab_amplitude": 0.3, "heave_amplitude": 0.1},
        "dvl": {"mounting_rpy_deg": [0.5, -1.0, 45.0]},
        "imu": {"grade": "navigation"},
        "alignment": {"initial_windows": [30], "mounting_windows": [60]},
    }
    cfg.update(over)
    return cfg


def test_rotation_round_trip():
    r = auvnav.rotation_from_euler(0.1, -0.2, 2.5)
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-14)
    assert np.allclose(auvnav.euler_from_rotation(r), (0.1, -0.2, 2.5), atol=1e-12)


def test_gravity_is_down_positive():
    g = auvnav.gravity_n(math.radians(45.0))
    assert g[0] == 0.0 and g[1] == 0.0
    assert 9.80 < g[2] < 9.81


def test_simulate_table_shapes():
    s = auvnav.simulate(small_config())
    assert s["imu"].shape[1] == 7
    assert s["dvl"].shape[1] == 9
    assert s["truth"].shape[1] == 10
    assert s["gnss"].shape[1] == 4
    assert s["truth"].shape[0] == s["imu"].shape[0] + 1


def test_simulate_is_seeded():
    a = auvnav.simulate(small_config())
    b = auvnav.simulate(small_config())
    c = auvnav.simulate(small_config(seed=12))
    assert np.array_equal(a["dvl"], b["dvl"])
    assert not np.array_equal(a["dvl"], c["dvl"])


def test_fusion_beats_free_inertial():
    s = auvnav.simulate(small_config(imu={"grade": "tactical"}))
    init = s["truth"][0]
    mount = np.radians([0.5, -1.0, 45.0])
    free = auvnav.dead_reckon(init, s["imu"])
    fused = auvnav.fuse(s["imu"], s["dvl"], init, mode="tc", mounting_rpy=mount)
    m_free = auvnav.evaluate_trajectory(free, s["truth"])
    m_fused = auvnav.evaluate_trajectory(fused["est"], s["truth"])
    assert m_fused["prmse"] < m_free["prmse"]
    assert fused["est"].shape == s["truth"].shape
    assert np.all(np.isfinite(fused["nis"]))


def test_ls_beam_velocity_on_clean_beams():
    s = auvnav.simulate(small_config(dvl={"beam_noise_std": 0.0}))
    v = auvnav.ls_beam_velocity(s["dvl"][5:6])
    assert v.shape == (3,)
    assert np.linalg.norm(v) > 0.5


def test_wahba_recovers_rotation():
    rng = np.random.default_rng(3)
    r = auvnav.rotation_from_euler(0.02, -0.01, 0.7)
    v_dvl = rng.normal(size=(50, 3))
    v_body = v_dvl @ r.T
    assert np.allclose(auvnav.wahba_svd(v_body, v_dvl), r, atol=1e-12)


def test_align_heading_static():
    lat = math.radians(32.0)
    yaw = math.radians(60.0)
    c = auvnav.rotation_from_euler(0.0, 0.0, yaw)
    g = auvnav.gravity_n(lat)
    w_ie = 7.292115e-5 * np.array([math.cos(lat), 0.0, -math.sin(lat)])
    f_b = c.T @ (-g)
    w_b = c.T @ w_ie
    t = np.arange(1, 6001) * 0.01
    imu = np.column_stack([t, np.tile(np.concatenate([f_b, w_b]), (t.size, 1))])
    psi = auvnav.align_heading(imu, lat, 60.0, method="dva")
    assert abs(auvnav.cyclic_error(psi, yaw)) < math.radians(0.1)


def test_chi_square_bounds():
    lo, hi = auvnav.chi_square_bounds(3, 0.95)
    assert lo == pytest.approx(0.2158, abs=1e-4)
    assert hi == pytest.approx(9.348, abs=1e-3)


def test_run_scenario_report():
    r = auvnav.run_scenario(small_config())
    for key in ("vrmse", "heading_ae", "mounting_rmse", "prmse", "mate", "tde", "fde"):
        assert key in r
    assert r["prmse"] is not None and r["prmse"] >= 0.0


def test_errors_map_to_value_error():
    with pytest.raises(auvnav.NavError, match="colour"):
        auvnav.run_scenario({"colour": "red"})
    with pytest.raises(ValueError):
        auvnav.dead_reckon(np.zeros(10), np.zeros((4, 3)))
