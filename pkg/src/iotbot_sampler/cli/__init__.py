"""
iotbot_sampler.cli

Command-line surface, configuration files and artifact I/O.
"""

from .artifacts import (
    REPORT_COLUMNS,
    TRACE_COLUMNS,
    iter_trace,
    report_frame,
    write_attack_set,
    write_ground_truth,
    write_histogram,
    write_report,
    write_schedule,
    write_sweep,
    write_trace,
)
from .commands import cli
from .config import CONFIG_KEYS, load_config, parse_config, render_config

__all__ = [
    "CONFIG_KEYS",
    "REPORT_COLUMNS",
    "TRACE_COLUMNS",
    "cli",
    "iter_trace",
    "load_config",
    "parse_config",
    "render_config",
    "report_frame",
    "write_attack_set",
    "write_ground_truth",
    "write_histogram",
    "write_report",
    "write_schedule",
    "write_sweep",
    "write_trace",
]
