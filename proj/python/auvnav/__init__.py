"""Python access to the auvnav C++ core.

Tables follow the CSV schemas: imu rows are (t, fx, fy, fz, wx, wy, wz), dvl rows
(t, y1..y4, v1..v4) and navigation rows (t, lat, lon, h, vn, ve, vd, roll, pitch, yaw).
"""

import json as _json

from ._core import (
    NavError,
    align_heading,
    chi_square_bounds,
    cyclic_error,
    dead_reckon,
    euler_from_rotation,
    evaluate_trajectory,
    fuse,
    gravity_n,
    ls_beam_velocity,
    rotation_from_euler,
    wahba_svd,
)
from . import _core


def simulate(config=None):
    """Simulated truth/imu/dvl/gnss tables for a config dict."""
    return _core.simulate(_json.dumps(config or {}))


def run_scenario(config=None):
    """Runs the configured stages and returns the metric report as a dict."""
    return _core.run_scenario(_json.dumps(config or {}))


__all__ = [
    "NavError",
    "align_heading",
    "chi_square_bounds",
    "cyclic_error",
    "dead_reckon",
    "euler_from_rotation",
    "evaluate_trajectory",
    "fuse",
    "gravity_n",
    "ls_beam_velocity",
    "rotation_from_euler",
    "run_scenario",
    "simulate",
    "wahba_svd",
]
