from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from fockstop.harness import ANCHORS, SUITES, ConfigError, Record, SuiteConfig, SuiteReport, load_config, run_suites
from fockstop.harness.checks import Tolerances, convergence_records, stoptime_cell
from fockstop.harness.runner import cell_rng, resolve
from fockstop.harness.truncation import (
    TOL_FLOOR,
    calibrate_tolerance,
    convergence_study,
    growth_ratio,
    projector_algebra_residuals,
    refine_stoptime,
    threshold_stoptime,
    truncation_defects,
    write_csv,
)
from fockstop.model import ModelParams, ModelTooLargeError
from fockstop.stoptime import first_arrival, random_stoptime, validate

GOLDEN = Path(__file__).parent / "golden" / "small_report.json"
SMALL = ModelParams(n_bins=3, cutoff_N=2, init_dim=2)


def small_config(**changes) -> SuiteConfig:
    base = SuiteConfig(model=SMALL, seeds=(0,), suites=("stoptime", "markov", "convolution", "flow"))
    return base.replace(**changes)


# configuration


def test_default_config_matches_desk_scale():
    config = SuiteConfig()
    assert config.model.ambient_dim <= 2048
    assert config.suites == SUITES


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        SuiteConfig(suites=("nope",))
    with pytest.raises(ConfigError):
        SuiteConfig(tol_exact=1e-10, tol_trunc=1e-11)
    with pytest.raises(ConfigError):
        SuiteConfig.from_dict({"colour": "blue"})
    with pytest.raises(ConfigError):
        SuiteConfig(model=ModelParams(n_bins=1), suites=("flow",))
    with pytest.raises(ModelTooLargeError, match="sizes within the cap"):
        SuiteConfig(model=ModelParams(n_bins=8, cutoff_N=3))


def test_config_round_trip(tmp_path):
    config = small_config(tol_trunc=1e-3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config.to_dict()))
    assert load_config(path) == config
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


# calibration


def test_calibration_floor_and_monotonicity():
    assert calibrate_tolerance(SuiteConfig(amplitude_cap=0.0)) == TOL_FLOOR
    taus = [calibrate_tolerance(SuiteConfig(amplitude_cap=a)) for a in (0.05, 0.1, 0.2, 0.3)]
    assert taus == sorted(taus)


def test_calibration_values():
    # the dominant defect is ‖W(α)Ω − e^{−α²/2} ê(α)‖ on one bin
    tau = calibrate_tolerance(SuiteConfig())
    assert 1e-3 < tau < 3e-3
    tau4 = calibrate_tolerance(SuiteConfig(model=ModelParams(n_bins=4, cutoff_N=4, init_dim=2)))
    assert 1e-4 < tau4 < 4e-4
    # closed-form leading term α^{N+1}/√((N+1)!) for the truncated-series part
    defects = truncation_defects(ModelParams(n_bins=1, cutoff_N=3, init_dim=1), 0.3)
    assert defects["exp_inner"] == pytest.approx(0.3**8 / math.factorial(4), rel=0.05)


def test_resolved_tolerance_exceeds_exact():
    config = resolve(small_config(amplitude_cap=0.0))
    assert config.tol_trunc > config.tol_exact


# records and reports


def test_record_rejects_unknown_anchor():
    with pytest.raises(ValueError):
        Record("x", "nope", 0.0, 1.0)
    assert not Record("x", "keyip", math.nan, 1.0).passed


def test_empty_suite_list_gives_empty_passing_report():
    report = run_suites(small_config(suites=()))
    assert report.records == [] and report.ok


def test_zero_exact_tolerance_fails_projector_checks():
    report = run_suites(small_config(tol_exact=0.0, tol_trunc=1e-3, suites=("stoptime",)))
    assert not report.ok
    assert any(r.anchor in {"def:qst", "thm:expS"} for r in report.failures)


def test_all_cell_anchors_are_known():
    rng = cell_rng("stoptime", 0)
    records, _ = stoptime_cell(SMALL, rng, Tolerances(1e-10, 1e-3), 0.3)
    assert {r.anchor for r in records} <= ANCHORS


def test_report_matches_golden_structure():
    golden = json.loads(GOLDEN.read_text())
    data = run_suites(small_config()).to_dict()
    assert sorted(data) == golden["top_level_keys"]
    assert sorted(data["records"][0]) == golden["record_keys"]
    assert [[r["name"], r["anchor"]] for r in data["records"]] == golden["records"]
    assert [[r["name"], r["anchor"]] for r in data["exploratory"]] == golden["exploratory"]
    config, expected = dict(data["config"]), dict(golden["config"])
    assert config.pop("tol_trunc") == pytest.approx(expected.pop("tol_trunc"), rel=1e-12)
    assert config == expected
    assert data["passed"]


def test_reports_are_byte_identical_and_thread_independent(tmp_path, monkeypatch):
    config = small_config()
    first = run_suites(config).to_json()
    monkeypatch.setenv("FOCKSTOP_THREADS", "4")
    second = run_suites(config).to_json()
    assert first == second
    json_path, md_path = run_suites(config).write(tmp_path)
    assert json_path.read_text() == first
    assert "| name | anchor |" in md_path.read_text()


def test_cell_generators_are_independent():
    a = cell_rng("flow", 1).normal(size=3)
    assert np.array_equal(a, cell_rng("flow", 1).normal(size=3))
    assert not np.array_equal(a, cell_rng("flow", 2).normal(size=3))
    assert not np.array_equal(a, cell_rng("cocycle", 1).normal(size=3))


def test_markdown_lists_exploratory_records():
    report = SuiteReport(config={}, records=[Record("a", "keyip", 1.0, 0.5)], exploratory=[Record("b", "thm:SstarT", 0.0, 1.0)])
    md = report.to_markdown()
    assert "**FAIL**" in md and "Exploratory" in md
    assert report.to_dict()["counts"] == {"records": 1, "failures": 1}


# refinement


def test_growth_ratio():
    assert growth_ratio([1e-2, 1e-3, 1e-4]) == pytest.approx(0.1)
    assert growth_ratio([1e-3, 3e-3]) == pytest.approx(3.0)
    assert growth_ratio([1e-15, 1e-16]) == 0.0


def test_dyadic_refinement_preserves_stop_times():
    params = ModelParams(n_bins=2, cutoff_N=1)
    rng = np.random.default_rng(0)
    for S in (threshold_stoptime(params, rng), first_arrival(params), random_stoptime(params, rng)):
        fine = refine_stoptime(S)
        assert fine.params.n_bins == 4
        assert validate(fine).ok
        assert max(projector_algebra_residuals(fine).values()) <= 1e-12


def test_convergence_study_rows_and_csv(tmp_path):
    config = SuiteConfig(refinements=((2, 2), (2, 3), (2, 4), (2, 5)))
    rows = convergence_study(config)
    idents = {r["identity"] for r in rows}
    assert {"exp_inner", "weyl_action", "keyip"} <= idents
    assert any(i.startswith("refined_") for i in idents)
    recs = convergence_records(rows, Tolerances(1e-10, 1e-3))
    assert recs and all(r.passed for r in recs)
    path = tmp_path / "c.csv"
    write_csv(rows, path)
    assert path.read_text().splitlines()[0] == "n_bins,cutoff_N,identity,residual"
