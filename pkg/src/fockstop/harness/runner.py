"""Run the enabled suites over all seeds and assemble a report."""

from __future__ import annotations

import os
import zlib
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .checks import (
    Tolerances,
    applebaum_cell,
    cocycle_cell,
    convergence_records,
    convolution_cell,
    flow_cell,
    markov_cell,
    stoptime_cell,
)
from .config import SUITES, SuiteConfig
from .report import SuiteReport
from .truncation import calibrate_tolerance, convergence_study

CELLS = {
    "stoptime": stoptime_cell,
    "markov": markov_cell,
    "convolution": convolution_cell,
    "flow": flow_cell,
    "cocycle": cocycle_cell,
    "applebaum": applebaum_cell,
}


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FOCKSTOP_THREADS", "1")))
    except ValueError:
        return 1


def cell_rng(suite: str, seed: int) -> np.random.Generator:
    """Generator for one (suite, seed) cell; independent of run order and thread count."""
    return np.random.default_rng([int(seed), zlib.crc32(suite.encode())])


def resolve(config: SuiteConfig) -> SuiteConfig:
    """Fill in a calibrated ``tol_trunc`` when the config leaves it open.

    A calibrated value at or below ``tol_exact`` (tiny amplitudes) is raised
    to ``10 × tol_exact`` so that the ordering of the two tolerances holds.
    """
    if config.tol_trunc is None:
        tau = calibrate_tolerance(config)
        if tau <= config.tol_exact:
            tau = 10.0 * config.tol_exact
        return config.with_tolerance(tau)
    return config


def run_suites(config: SuiteConfig) -> SuiteReport:
    config = resolve(config)
    tol = Tolerances(config.tol_exact, config.tol_trunc)
    params = config.model
    amp = config.amplitude_cap
    ordered = [s for s in SUITES if s in config.suites]

    def run(cell):
        suite, seed = cell
        rng = cell_rng(suite, seed)
        if suite == "applebaum":
            return applebaum_cell(params, rng, tol, amp, trials=config.trials)
        return CELLS[suite](params, rng, tol, amp)

    cells = [(s, seed) for s in ordered if s != "convergence" for seed in config.seeds]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(run, cells))

    report = SuiteReport(config=config.to_dict())
    for (suite, seed), (records, exploratory) in zip(cells, results):
        report.records += [_tag(r, seed) for r in records]
        report.exploratory += [_tag(r, seed) for r in exploratory]
    if "convergence" in ordered:
        report.records += convergence_records(convergence_study(config), tol)
    return report


def _tag(record, seed):
    return replace(record, name=f"{record.name}[seed={seed}]")
