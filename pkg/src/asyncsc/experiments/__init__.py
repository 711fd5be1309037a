"""Scenario runner, metrics and parameter sweeps."""

from .runner import SecurityReport, check_security_properties, execute, metrics_of, run_scenario, sweep
from .scenario import METRIC_COLUMNS, RunMetrics, Scenario, metrics_csv

__all__ = [
    "METRIC_COLUMNS",
    "RunMetrics",
    "Scenario",
    "SecurityReport",
    "check_security_properties",
    "execute",
    "metrics_csv",
    "metrics_of",
    "run_scenario",
    "sweep",
]
