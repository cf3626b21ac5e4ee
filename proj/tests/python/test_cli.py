import csv
import json
import os
import pathlib
import subprocess

import pytest

CLI = os.environ.get("AUVNAV_CLI", "auvnav")
ROOT = pathlib.Path(__file__).resolve().parents[2]
EXAMPLE = ROOT / "config" / "example_pipeline.json"

HEADERS = {
    "imu.csv": "t,fx,fy,fz,wx,wy,wz",
    "dvl_beams.csv": "t,y1,y2,y3,y4,v1,v2,v3,v4",
    "gnss_vel.csv": "t,vn,ve,vd",
    "truth.csv": "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw",
    "est.csv": "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw",
    "report.csv": "metric,value,unit",
}


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def small(**over):
    doc = {
        "seed": 5,
        "profile": {"kind": "lawnmower", "duration": 60, "leg_length": 40,
                    "surge_amplitude": 0.3, "crab_amplitude": 0.3, "heave_amplitude": 0.1},
        "dvl": {"mounting_rpy_deg": [0.5, -1.0, 45.0]},
        "imu": {"grade": "navigation"},
        "alignment": {"initial_windows": [30], "mounting_windows": [60]},
    }
    doc.update(over)
    return doc


def first_line(path):
    with open(path) as f:
        return f.readline().rstrip("\n")


def test_pipeline_example_exit_zero_and_headers(tmp_path):
    out = tmp_path / "run"
    r = run("pipeline", "--config", EXAMPLE, "--out", out)
    assert r.returncode == 0, r.stderr
    for name, header in HEADERS.items():
        assert first_line(out / name) == header
    with open(out / "report.csv") as f:
        rows = {row["metric"]: row for row in csv.DictReader(f)}
    assert float(rows["prmse"]["value"]) >= 0.0
    assert rows["heading_ae"]["unit"] == "deg"


def test_stagewise_matches_pipeline(tmp_path):
    # Stand-alone fuse uses the configured mounting, so the pipeline must not hand its estimates on.
    cfg = write_config(tmp_path, small(fusion={"use_calibration": False,
                                               "use_mounting_estimate": False}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("pipeline", "--config", cfg, "--out", a, "--mode", "tc").returncode == 0
    for cmd in (["simulate"], ["calibrate"], ["align", "--mode", "initial"],
                ["align", "--mode", "mounting"], ["fuse", "--mode", "tc"]):
        r = run(*cmd, "--config", cfg, "--out", b)
        assert r.returncode == 0, (cmd, r.stderr)
    assert (a / "est.csv").read_bytes() == (b / "est.csv").read_bytes()
    r = run("evaluate", "--in", b, "--out", b)
    assert r.returncode == 0, r.stderr
    assert first_line(b / "report.csv") == HEADERS["report.csv"]


def test_seed_flag_changes_output(tmp_path):
    cfg = write_config(tmp_path, small())
    outs = []
    for i, seed in enumerate((1, 1, 2)):
        o = tmp_path / f"s{i}"
        assert run("simulate", "--config", cfg, "--seed", seed, "--out", o).returncode == 0
        outs.append((o / "dvl_beams.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


@pytest.mark.parametrize("doc", [
    {"colour": "red"},
    {"profile": {"speeed": 1.0}},
    {"profile": {"duration": -5}},
    {"fusion": {"mode": "sideways"}},
])
def test_validation_errors_exit_two(tmp_path, doc):
    cfg = write_config(tmp_path, doc)
    r = run("pipeline", "--config", cfg, "--out", tmp_path / "o")
    assert r.returncode == 2
    assert r.stderr.strip()


def test_bad_flags_exit_two(tmp_path):
    assert run("pipeline", "--mode", "sideways", "--out", tmp_path).returncode == 2
    assert run("frobnicate").returncode == 2
    assert run("pipeline", "--config", tmp_path / "missing.json").returncode == 2


def test_malformed_csv_exit_two(tmp_path):
    cfg = write_config(tmp_path, small())
    out = tmp_path / "o"
    assert run("simulate", "--config", cfg, "--out", out).returncode == 0
    (out / "imu.csv").write_text("t,ax,ay,az,wx,wy,wz\n0,0,0,0,0,0,0\n")
    r = run("fuse", "--config", cfg, "--out", out)
    assert r.returncode == 2
    assert "t,fx,fy,fz,wx,wy,wz" in r.stderr


def test_unobservable_mounting_exits_three(tmp_path):
    doc = small(profile={"kind": "constant_velocity_line", "duration": 60, "surge_amplitude": 0,
                         "crab_amplitude": 0, "heave_amplitude": 0},
                stages=["simulate", "align_mounting"])
    cfg = write_config(tmp_path, doc)
    r = run("pipeline", "--config", cfg, "--out", tmp_path / "o")
    assert r.returncode == 3, r.stderr


def test_sweep_summary(tmp_path):
    cfg = write_config(tmp_path, small())
    grid = write_config(tmp_path, {"fusion.mode": ["lc", "tc"]}, "grid.json")
    out = tmp_path / "sw"
    r = run("sweep", "--config", cfg, "--grid", grid, "--seeds", 2, "--out", out)
    assert r.returncode == 0, r.stderr
    csvs = list(out.glob("*.csv"))
    assert csvs
    with open(csvs[0]) as f:
        rows = list(csv.reader(f))
    assert len(rows) == 3
