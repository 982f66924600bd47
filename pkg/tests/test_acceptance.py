"""Acceptance criteria at their stated tolerances on the default desk-scale model.

Each test records one line ``criterion N: PASS|FAIL ...``; the lines are
printed at the end of the pytest run (see ``conftest.py``) and by running
this file directly.
"""

from __future__ import annotations

import numpy as np
import pytest

from fockstop import fock
from fockstop.harness import SuiteConfig, run_suites
from fockstop.harness.checks import (
    Tolerances,
    applebaum_cell,
    cocycle_cell,
    convergence_records,
    convolution_cell,
    flow_cell,
)
from fockstop.harness.runner import cell_rng, resolve
from fockstop.harness.truncation import convergence_study, keyip_residual
from fockstop.model import StepFunction
from fockstop.stoptime import (
    AdaptedFamily,
    StrongMarkov,
    first_arrival,
    random_stoptime,
    safe_basis,
    stop_integral,
    stopped_shift,
    time_projection_ES,
    validate,
)

CONFIG = resolve(SuiteConfig())
PARAMS = CONFIG.model
TAU = CONFIG.tol_trunc
TOL = Tolerances(CONFIG.tol_exact, TAU)
AMP = CONFIG.amplitude_cap
RESULTS: dict[int, str] = {}


def record(criterion: int, worst: float, tolerance: float, what: str) -> None:
    ok = worst <= tolerance
    RESULTS[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {what}  worst {worst:.3e} <= {tolerance:.1e}"
    assert ok, RESULTS[criterion]


def record_cells(criterion: int, records, what: str) -> None:
    """Worst ``residual / tolerance`` over harness records; passes when ≤ 1."""
    failures = [r for r in records if not r.passed]
    worst = max(records, key=lambda r: r.residual / r.tolerance if r.tolerance > 0 else np.inf)
    ok = not failures
    RESULTS[criterion] = (
        f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {what}  {len(records)} checks, "
        f"tightest {worst.name} {worst.residual:.3e} <= {worst.tolerance:.1e}"
    )
    assert ok, [f"{r.name}: {r.residual:.3e} > {r.tolerance:.1e}" for r in failures]


def _orthonormality(M: np.ndarray) -> float:
    return float(np.linalg.norm(M.conj().T @ M - np.eye(M.shape[1])))


def test_criterion_01_stop_time_axioms():
    worst = max(max(validate(random_stoptime(PARAMS, seed)).residuals.values()) for seed in range(100))
    record(1, worst, 1e-10, "100 random stop times validate")


def test_criterion_02_time_projections():
    n = PARAMS.n_bins
    worst = 0.0
    for seed in range(50):
        S = random_stoptime(PARAMS, 1000 + seed)
        E = [time_projection_ES(S, t) for t in range(n + 1)]
        ES = E[n]
        for s in range(n + 1):
            worst = max(worst, (S.cumulative(s) @ ES).distance(E[s]))
            for t in range(n + 1):
                worst = max(worst, (E[s] @ E[t]).distance(E[min(s, t)]))
    record(2, worst, 1e-12, "E_{S,s}E_{S,t} and S([0,s])E_S over 50 stop times")


def test_criterion_03_stopped_shift_and_strong_markov():
    n = PARAMS.n_bins
    rng = np.random.default_rng(3)
    worst = 0.0
    for trial in range(10):
        K = 1 + trial % (n - 1)
        S = random_stoptime(PARAMS, rng, last_bin=K) if trial % 2 else first_arrival(PARAMS, last_bin=K)
        worst = max(worst, _orthonormality(stopped_shift(S).matrix @ safe_basis(PARAMS, K)))
        jS = StrongMarkov(S)
        J, _, _ = jS.matrix()
        worst = max(worst, _orthonormality(J))
        f = StepFunction.random(PARAMS, rng, AMP)
        g = StepFunction.random(PARAMS, rng, AMP, support=n - K)
        ef, eg = fock.exp_vector(PARAMS, f), fock.exp_vector(PARAMS, g)
        F = AdaptedFamily.shifted(PARAMS, eg)
        for t in range(n + 1):
            lhs = jS.apply_preimage(time_projection_ES(S, t).matrix @ ef.amplitudes, eg.amplitudes)
            worst = max(worst, float(np.linalg.norm(lhs - stop_integral(S, f, F, t).amplitudes)))
    record(3, worst, TAU, "Γ_S and j_S isometric, j_S on exponential vectors, 10 stop times")


def test_criterion_04_key_lemma():
    n = PARAMS.n_bins
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        S = random_stoptime(PARAMS, rng)
        f, g = StepFunction.random(PARAMS, rng, AMP), StepFunction.random(PARAMS, rng, AMP)
        F, G = AdaptedFamily.random(PARAMS, rng), AdaptedFamily.random(PARAMS, rng)
        worst = max(worst, keyip_residual(PARAMS, S, f, g, F, G))
        integrals = [stop_integral(S, f, F, t).amplitudes for t in range(n + 1)]
        for r in range(n + 1):
            cut = S.cumulative(r).matrix
            for t in range(n + 1):
                worst = max(worst, float(np.linalg.norm(cut @ integrals[t] - integrals[min(r, t)])))
    record(4, worst, TAU, "inner-product and truncation identities over 50 draws")


def test_criterion_05_convolution():
    records = []
    for seed in range(10):
        records += convolution_cell(PARAMS, cell_rng("convolution", seed), TOL, AMP)[0]
    record_cells(5, records, "S⋆T, S⋆δ = S+t, Γ_{S⋆T} = Γ_SΓ_T, j_{S,T} over 10 pairs")


def test_criterion_06_flow():
    records = []
    for seed in range(5):
        records += flow_cell(PARAMS, cell_rng("flow", seed), TOL, AMP)[0]
    assert all(r.tolerance <= max(1e-9, TAU) for r in records)
    record_cells(6, records, "stopped flow homomorphism, shift relations, σ_{S⋆T}, σ_S(E_T)")


def test_criterion_07_cocycles():
    records = []
    for seed in range(3):
        records += cocycle_cell(PARAMS, cell_rng("cocycle", seed), TOL, AMP)[0]
    assert all(r.tolerance <= TAU + CONFIG.tol_exact for r in records)
    record_cells(7, records, "Weyl and vacuum-Weyl cocycles, stopped norms")


def test_criterion_08_stopped_cocycle_relations():
    records = []
    for seed in range(5):
        records += applebaum_cell(PARAMS, cell_rng("applebaum", seed), TOL, AMP, trials=4)[0]
    assert all(r.tolerance == TAU for r in records)
    record_cells(8, records, "stopped cocycle relation and identities (a)–(e) over 20 (V, S, j)")


def test_criterion_09_convergence():
    rows = convergence_study(CONFIG)
    cutoffs = sorted({r["cutoff_N"] for r in rows})
    assert cutoffs == [2, 3, 4, 5]
    records = convergence_records(rows, TOL)
    assert any(r.name == "convergence.dyadic_refinement" for r in records)
    record_cells(9, records, "growth ratio ≤ 2 for N = 2..5 at amplitude 0.2, dyadic refinement")


def test_criterion_10_reproducibility(tmp_path):
    config = SuiteConfig(seeds=(0,))
    first = run_suites(config).write(tmp_path / "a")[0].read_bytes()
    second = run_suites(config).write(tmp_path / "b")[0].read_bytes()
    same = first == second
    RESULTS[10] = f"criterion 10: {'PASS' if same else 'FAIL'}  two runs give byte-identical JSON ({len(first)} bytes)"
    assert same


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
