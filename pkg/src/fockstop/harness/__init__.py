"""Random instances, theorem suites, refinement studies and reports."""

from __future__ import annotations

from .config import SUITES, ConfigError, SuiteConfig, load_config
from .report import ANCHORS, Record, SuiteReport
from .runner import run_suites
from .truncation import calibrate_tolerance, convergence_study, truncation_defects

__all__ = [
    "ANCHORS",
    "SUITES",
    "ConfigError",
    "Record",
    "SuiteConfig",
    "SuiteReport",
    "calibrate_tolerance",
    "convergence_study",
    "load_config",
    "run_suites",
    "truncation_defects",
]
