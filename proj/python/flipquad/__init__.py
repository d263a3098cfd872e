"""Flip-capable quadrotor simulation, control and evaluation."""

import json as _json

from ._flipquad import (
    ConfigError,
    SimulationFault,
    chart_north,
    chart_south,
    evaluate,
    hopf_project,
    min_snap,
    pgd_solve,
    position_metrics,
    quat_exp,
    quat_log,
    quat_multiply,
    rate_of_thrust,
    settling_time,
    simulate,
    thrust_of_rate,
    yaw_quat,
)


def default_config():
    """Built-in configuration as a dict."""
    return _json.loads(_flipquad.default_config_json())


def load_config(path):
    """Validated configuration file merged over the defaults, as a dict."""
    return _json.loads(_flipquad.load_config_json(str(path)))


from . import _flipquad  # noqa: E402

__all__ = [
    "ConfigError",
    "SimulationFault",
    "chart_north",
    "chart_south",
    "default_config",
    "evaluate",
    "hopf_project",
    "load_config",
    "min_snap",
    "pgd_solve",
    "position_metrics",
    "quat_exp",
    "quat_log",
    "quat_multiply",
    "rate_of_thrust",
    "settling_time",
    "simulate",
    "thrust_of_rate",
    "yaw_quat",
]
