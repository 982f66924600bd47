"""Truncation defects, tolerance calibration and refinement studies."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .. import fock
from ..model import ModelParams, Operator, StepFunction, kron_all
from ..stoptime import (
    AdaptedFamily,
    StopTime,
    _lift,
    sfg_measure,
    stop_integral,
    time_projection_ES,
    validate,
)
from .config import SuiteConfig

TOL_FLOOR = 1e-12
NOISE_FLOOR = 1e-13
REFINE_DIM = 1024  # largest fine Fock dimension for the dyadic refinement check


def truncation_defects(params: ModelParams, amplitude: float) -> dict[str, float]:
    """Exact-exponential comparisons with the same real amplitude ``α`` on every bin.

    ``exp_inner``: ``|⟨ê(f), ê(f)⟩ − exp‖f‖²|``; ``weyl_overlap``:
    ``|⟨Ω, W(f)Ω⟩ − exp(−‖f‖²/2)|``; ``weyl_action``:
    ``‖W(f)Ω − exp(−‖f‖²/2) ê(f)‖``; ``weyl_shift``:
    ``‖W(f)ê(f) − exp(−3‖f‖²/2) ê(2f)‖``; all with truncated objects.  A
    real amplitude on one mode is the worst case for the inner product since
    every discarded term is then positive.
    """
    alpha = np.zeros(params.mult_d, dtype=complex)
    alpha[0] = amplitude
    f = StepFunction(np.tile(alpha, (params.n_bins, 1)))
    e = fock.exp_vector(params, f).amplitudes
    norm2 = f.norm() ** 2
    disp = kron_all([fock.bin_displacement(params, alpha)] * params.n_bins)
    moved = disp @ e
    return {
        "exp_inner": float(abs(np.vdot(e, e) - math.exp(norm2))),
        "weyl_overlap": float(abs(disp[0, 0] - math.exp(-0.5 * norm2))),
        "weyl_action": float(np.linalg.norm(disp[:, 0] - math.exp(-0.5 * norm2) * e)),
        "weyl_shift": float(np.linalg.norm(moved - math.exp(-1.5 * norm2) * fock.exp_vector(params, f * 2).amplitudes)),
    }


CALIBRATION_DEFECTS = ("exp_inner", "weyl_overlap", "weyl_action")


def calibrate_tolerance(config: SuiteConfig) -> float:
    """``τ_trunc = 10 ×`` the largest single-bin defect at the amplitude cap, floored at 1e−12.

    Uses the coherent inner product and the Weyl operator on the vacuum;
    ``weyl_shift`` is first order in the top occupation level and is only
    tracked in the convergence study.
    """
    params = config.model.replace(n_bins=1, init_dim=1)
    defects = truncation_defects(params, config.amplitude_cap)
    return max(TOL_FLOOR, 10.0 * max(defects[k] for k in CALIBRATION_DEFECTS))


def keyip_residual(params: ModelParams, S: StopTime, f, g, F, G) -> float:
    """``|⟨∫S e(f)F, ∫S e(g)G⟩ − Σ_k ⟨F_k, G_k⟩ S^{f,g}({t_k})|``."""
    lhs = stop_integral(S, f, F).inner(stop_integral(S, g, G))
    measure = sfg_measure(S, f, g)
    rhs = sum(np.vdot(F[k], G[k]) * m for k, m in measure.atoms)
    return float(abs(lhs - rhs))


def projector_algebra_residuals(S: StopTime) -> dict[str, float]:
    """Stop-time axioms and ``E_{S,s}E_{S,t} = E_{S,s∧t}``, ``S([0,s])E_S = E_{S,s}``."""
    n = S.params.n_bins
    out = dict(validate(S).residuals)
    E = [time_projection_ES(S, t) for t in range(n + 1)]
    prod = trunc = 0.0
    for s in range(n + 1):
        trunc = max(trunc, (S.cumulative(s) @ E[n]).distance(E[s]))
        # E_t E_s is the adjoint of E_s E_t, so s ≤ t suffices
        for t in range(s, n + 1):
            prod = max(prod, (E[s] @ E[t]).distance(E[s]))
    out["expS_product"] = prod
    out["expS_truncation"] = trunc
    return out


def refine_stoptime(S: StopTime) -> StopTime:
    """Embed ``S`` in a grid with twice as many bins.

    Coarse bin ``k`` becomes fine bins ``2k − 1, 2k``; the coarse atom ``Q_k``
    acts on the odd fine bins ``1, 3, ..., 2k − 1`` and sits at fine boundary
    ``2k``.  The per-bin space is unchanged, so this is an exact embedding.
    """
    params = S.params
    fine = params.replace(n_bins=2 * params.n_bins)
    b = params.bin_dim
    masses = []
    for k, P in S.masses:
        Q = P.matrix.reshape(b**k, b ** (params.n_bins - k), b**k, b ** (params.n_bins - k))[:, 0, :, 0]
        # Q on odd bins ⊗ I on even bins, then interleave the bin order
        op = np.kron(Q, np.eye(b**k)).reshape((b,) * (4 * k))
        order = [i for pair in zip(range(k), range(k, 2 * k)) for i in pair]
        op = op.transpose(order + [2 * k + i for i in order]).reshape(b ** (2 * k), b ** (2 * k))
        masses.append((2 * k, Operator(np.kron(op, np.eye(b ** (fine.n_bins - 2 * k))), fine)))
    return StopTime(fine, tuple(masses))


def threshold_stoptime(params: ModelParams, rng: np.random.Generator, last_bin: int | None = None) -> StopTime:
    """Stop at the first bin ``k`` holding at least ``m_k`` particles.

    The thresholds ``m_k ∈ {1, 2}`` are random; the all-below-threshold
    remainder is assigned to ``last_bin``.  The rule does not refer to the
    cutoff, so the same stop time can be compared across cutoffs.
    """
    K = params.n_bins if last_bin is None else last_bin
    counts = np.array([sum(occ) for occ in params.bin_basis])
    thresholds = rng.integers(1, 3, size=K)
    below = [np.diag((counts < m).astype(float)) for m in thresholds]
    masses = []
    head = np.eye(1)
    for k in range(1, K):
        Q = np.kron(head, np.eye(params.bin_dim) - below[k - 1])
        masses.append((k, _lift(params, Q, k)))
        head = np.kron(head, below[k - 1])
    masses.append((K, _lift(params, head, K - 1)))
    return StopTime(params, tuple(masses))


def _unit_amplitudes(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    raw = rng.normal(size=(params.n_bins, params.mult_d)) + 1j * rng.normal(size=(params.n_bins, params.mult_d))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _row(params: ModelParams, identity: str, residual: float) -> dict:
    return {
        "n_bins": params.n_bins,
        "cutoff_N": params.cutoff_N,
        "identity": identity,
        "residual": float(residual),
    }


def convergence_study(config: SuiteConfig, refinements=None) -> list[dict]:
    """Residual table over ``(n_bins, cutoff_N)`` refinements.

    Exponential-vector identities are evaluated at ``config.convergence_amplitude``
    on a threshold stop time and step functions that depend only on the first
    seed and ``n_bins``.  Where the doubled grid is small, projector-algebra
    residuals are reported for that stop time and for its dyadic refinement
    (rows prefixed ``refined_``).
    """
    refinements = config.refinements if refinements is None else refinements
    seed = config.seeds[0] if config.seeds else 0
    amp = config.convergence_amplitude
    rows = []
    for n, N in refinements:
        params = config.model.replace(n_bins=int(n), cutoff_N=int(N))
        params.check_capacity(config.dimension_cap)
        for name, value in truncation_defects(params.replace(init_dim=1), amp).items():
            rows.append(_row(params, name, value))
        rng = np.random.default_rng([seed, int(n)])
        S = threshold_stoptime(params, rng)
        f = StepFunction(_unit_amplitudes(params, rng) * amp)
        g = StepFunction(_unit_amplitudes(params, rng) * amp)
        half = params.n_bins // 2
        F = AdaptedFamily.shifted(params, fock.exp_vector(params, f.head(half)))
        G = AdaptedFamily.shifted(params, fock.exp_vector(params, g.head(half)))
        rows.append(_row(params, "keyip", keyip_residual(params, S, f, g, F, G)))
        if params.bin_dim ** (2 * params.n_bins) <= min(REFINE_DIM, config.dimension_cap):
            coarse = projector_algebra_residuals(S)
            for key, value in coarse.items():
                rows.append(_row(params, key, value))
            refined = projector_algebra_residuals(refine_stoptime(S))
            for key, value in refined.items():
                rows.append(_row(params, f"refined_{key}", value))
                rows.append(_row(params, f"refined_{key}_change", abs(value - coarse[key])))
    return rows


def write_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["n_bins", "cutoff_N", "identity", "residual"], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "residual": repr(row["residual"])})


def growth_ratio(values: list[float], floor: float = NOISE_FLOOR) -> float:
    """Largest ``r_{i+1} / r_i`` along a refinement sweep; values at the noise floor count as converged."""
    worst = 0.0
    for prev, cur in zip(values, values[1:]):
        if cur <= floor:
            continue
        worst = max(worst, cur / max(prev, floor))
    return worst
