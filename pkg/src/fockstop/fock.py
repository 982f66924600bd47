"""Truncated, time-binned Fock space primitives.

Exponential vectors, the time projections ``E_k``, the right shifts
``Γ_j``, Weyl operators and the adaptedness predicate.  Bin indices are
1-based; a time index ``k`` refers to the boundary after bin ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .model import (
    DEFAULT_DIMENSION_CAP,
    DomainError,
    ModelParams,
    Operator,
    StateVector,
    StepFunction,
    kron_all,
)

# ---------------------------------------------------------------------------
# single-bin building blocks


@lru_cache(maxsize=None)
def _bin_creation(cutoff: int, d: int) -> tuple[np.ndarray, ...]:
    params = ModelParams(n_bins=1, cutoff_N=cutoff, mult_d=d, init_dim=1)
    basis = params.bin_basis
    index = {occ: i for i, occ in enumerate(basis)}
    ops = []
    for mode in range(d):
        a_dag = np.zeros((len(basis), len(basis)))
        for col, occ in enumerate(basis):
            up = list(occ)
            up[mode] += 1
            row = index.get(tuple(up))
            if row is not None:
                a_dag[row, col] = math.sqrt(occ[mode] + 1)
        a_dag.setflags(write=False)
        ops.append(a_dag)
    return tuple(ops)


def bin_creation_ops(params: ModelParams) -> tuple[np.ndarray, ...]:
    """Truncated creation operators ``a_i^*`` of one bin, one per mode."""
    return _bin_creation(params.cutoff_N, params.mult_d)


def bin_coherent(params: ModelParams, alpha) -> np.ndarray:
    """Truncated unnormalised coherent vector ``Σ_m α^{⊗m}/√m!`` of one bin."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=complex), (params.mult_d,))
    out = np.empty(params.bin_dim, dtype=complex)
    for i, occ in enumerate(params.bin_basis):
        amp = 1.0 + 0j
        for a, m in zip(alpha, occ):
            amp *= a**m / math.sqrt(math.factorial(m))
        out[i] = amp
    return out


def bin_displacement(params: ModelParams, alpha) -> np.ndarray:
    """``exp(a^*(α) − a(α))`` on the truncated single-bin space."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=complex), (params.mult_d,))
    gen = np.zeros((params.bin_dim, params.bin_dim), dtype=complex)
    for a, a_dag in zip(alpha, bin_creation_ops(params)):
        gen += a * a_dag - np.conj(a) * a_dag.T
    return expm(gen)


def bin_second_quantisation(params: ModelParams, A) -> np.ndarray:
    """``Γ(A)`` of a ``d × d`` matrix on one bin; preserves particle number."""
    A = np.asarray(A, dtype=complex)
    basis = params.bin_basis
    index = {occ: i for i, occ in enumerate(basis)}
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    for col, occ in enumerate(basis):
        # expand Π_i (Σ_j A_ji a_j^*)^{m_i} |0⟩ over normalised occupation states
        state = {(0,) * params.mult_d: 1.0 + 0j}
        for mode, m in enumerate(occ):
            for _ in range(m):
                nxt: dict[tuple[int, ...], complex] = {}
                for cur, amp in state.items():
                    for j in range(params.mult_d):
                        if A[j, mode] == 0:
                            continue
                        up = list(cur)
                        up[j] += 1
                        key = tuple(up)
                        nxt[key] = nxt.get(key, 0) + amp * A[j, mode] * math.sqrt(cur[j] + 1)
                state = nxt
        norm = math.sqrt(math.prod(math.factorial(m) for m in occ))
        for cur, amp in state.items():
            out[index[cur], col] = amp / norm
    return out


def bin_vacuum_projection(params: ModelParams) -> np.ndarray:
    p = np.zeros((params.bin_dim, params.bin_dim))
    p[0, 0] = 1.0
    return p


# ---------------------------------------------------------------------------
# whole-space operators


def _wrap(matrix: np.ndarray, params: ModelParams, includes_initial: bool) -> Operator:
    if includes_initial:
        matrix = np.kron(np.eye(params.init_dim), matrix)
    return Operator(matrix, params, includes_initial)


def exp_vector(
    params: ModelParams, f: StepFunction, cap: int = DEFAULT_DIMENSION_CAP
) -> StateVector:
    """``⊗_k ê(f_k)``: the truncated exponential vector of a step function."""
    params.check_capacity(cap)
    if f.n_bins != params.n_bins:
        raise DomainError(f"step function has {f.n_bins} bins, model has {params.n_bins}")
    return StateVector(
        kron_all(bin_coherent(params, f.amplitudes[k]) for k in range(params.n_bins)),
        params,
    )


def vacuum(params: ModelParams) -> StateVector:
    v = np.zeros(params.fock_dim, dtype=complex)
    v[0] = 1.0
    return StateVector(v, params)


def tail_vacuum_mask(params: ModelParams, j: int) -> np.ndarray:
    """Boolean mask over the Fock basis: vacuum in each of the last ``j`` bins."""
    return np.arange(params.fock_dim) % (params.bin_dim**j) == 0


def head_vacuum_mask(params: ModelParams, k: int) -> np.ndarray:
    """Boolean mask over the Fock basis: vacuum in each of the first ``k`` bins."""
    return np.arange(params.fock_dim) < params.bin_dim ** (params.n_bins - k)


def time_projection_Et(
    params: ModelParams, k: int, includes_initial: bool = False
) -> Operator:
    """Projection onto (anything on bins ≤ k) ⊗ (vacuum on bins > k)."""
    if not 0 <= k <= params.n_bins:
        raise DomainError(f"time index {k} outside 0..{params.n_bins}")
    diag = tail_vacuum_mask(params, params.n_bins - k).astype(float)
    return _wrap(np.diag(diag), params, includes_initial)


def shift_Gamma(params: ModelParams, j: int, includes_initial: bool = False) -> Operator:
    """Second-quantised right shift by ``j`` bins.

    Basis tuples whose last ``j`` bins are empty move right; all others are
    annihilated, so ``Γ_j`` is isometric only on that horizon-safe subspace.
    """
    if not 0 <= j <= params.n_bins:
        raise DomainError(f"shift {j} outside 0..{params.n_bins}")
    step = params.bin_dim**j
    m = np.zeros((params.fock_dim, params.fock_dim))
    src = np.arange(0, params.fock_dim, step)
    m[src // step, src] = 1.0
    return _wrap(m, params, includes_initial)


def shift_Gamma_star(
    params: ModelParams, j: int, includes_initial: bool = False
) -> Operator:
    return shift_Gamma(params, j, includes_initial).dag()


def weyl(params: ModelParams, f: StepFunction, includes_initial: bool = False) -> Operator:
    """Tensor product of truncated per-bin displacement operators."""
    if f.n_bins != params.n_bins:
        raise DomainError(f"step function has {f.n_bins} bins, model has {params.n_bins}")
    mats = [bin_displacement(params, f.amplitudes[k]) for k in range(params.n_bins)]
    return _wrap(kron_all(mats), params, includes_initial)


def second_quantisation_tail(
    params: ModelParams, p, k: int, includes_initial: bool = False
) -> Operator:
    """``I_{bins ≤ k} ⊗ Γ(p)^{⊗ bins > k}``."""
    gp = bin_second_quantisation(params, p)
    mats = [np.eye(params.bin_dim ** k), *([gp] * (params.n_bins - k))]
    return _wrap(kron_all(mats), params, includes_initial)


def local_operator(
    params: ModelParams, A: np.ndarray, bin_index: int, includes_initial: bool = False
) -> Operator:
    """A single-bin operator acting on bin ``bin_index``, identity elsewhere."""
    b = params.bin_dim
    mats = [np.eye(b ** (bin_index - 1)), A, np.eye(b ** (params.n_bins - bin_index))]
    return _wrap(kron_all(mats), params, includes_initial)


def number_operator(params: ModelParams, bin_index: int) -> Operator:
    n = sum(a @ a.T for a in bin_creation_ops(params))
    return local_operator(params, n, bin_index)


# ---------------------------------------------------------------------------
# splitting vectors at a bin boundary


def head_part(params: ModelParams, v: np.ndarray, k: int) -> np.ndarray:
    """Bins ``≤ k`` component of a Fock vector lying in ``ran E_k``."""
    b, n = params.bin_dim, params.n_bins
    return np.asarray(v).reshape(b**k, b ** (n - k))[:, 0]


def tail_part(params: ModelParams, v: np.ndarray, k: int) -> np.ndarray:
    """Bins ``> k`` component of a Fock vector that is vacuum on bins ``≤ k``."""
    b, n = params.bin_dim, params.n_bins
    return np.asarray(v).reshape(b**k, b ** (n - k))[0, :]


def shifted_tail(params: ModelParams, y: np.ndarray, k: int) -> np.ndarray:
    """Tail (bins ``> k``) of ``Γ_k y``: the first ``n − k`` bins of ``y``.

    Exact when ``y`` is vacuum on its last ``k`` bins.
    """
    b, n = params.bin_dim, params.n_bins
    return np.asarray(y).reshape(b ** (n - k), b**k)[:, 0]


# ---------------------------------------------------------------------------
# adaptedness


@dataclass(frozen=True)
class AdaptednessReport:
    adapted: bool
    residual: float


def _bin_tensor(X: Operator, i: int) -> np.ndarray:
    params = X.params
    b = params.bin_dim
    left = (params.init_dim if X.includes_initial else 1) * b ** (i - 1)
    right = b ** (params.n_bins - i)
    return X.matrix.reshape(left, b, right, left, b, right)


def bin_commutant_residual(X: Operator, i: int) -> float:
    """Max Frobenius norm of ``[X, I ⊗ |a⟩⟨c| ⊗ I]`` over matrix units on bin ``i``."""
    t = _bin_tensor(X, i)
    b = X.params.bin_dim
    # block[ρ, γ] = ‖X restricted to (row bin ρ, column bin γ)‖²
    block = np.einsum("lrmLgM->rg", np.abs(t) ** 2)
    off = ~np.eye(b, dtype=bool)
    col_off = np.where(off, block, 0).sum(axis=0)  # Σ_{ρ≠a} block[ρ, a]
    row_off = np.where(off, block, 0).sum(axis=1)  # Σ_{γ≠c} block[c, γ]
    diag = [t[:, a, :, :, a, :] for a in range(b)]
    worst = 0.0
    for a in range(b):
        for c in range(b):
            sq = col_off[a] + row_off[c]
            if a != c:
                sq += np.linalg.norm(diag[a] - diag[c]) ** 2
            worst = max(worst, sq)
    return math.sqrt(worst)


def adaptedness_check(X: Operator, k: int, tol: float = 1e-10) -> AdaptednessReport:
    """Is ``X`` in ``B(init ⊗ bins ≤ k) ⊗ I``?

    Tested by commutators with every matrix unit on every bin after ``k``;
    the residual is the largest commutator norm.
    """
    if not 0 <= k <= X.params.n_bins:
        raise DomainError(f"time index {k} outside 0..{X.params.n_bins}")
    residual = max(
        (bin_commutant_residual(X, i) for i in range(k + 1, X.params.n_bins + 1)),
        default=0.0,
    )
    return AdaptednessReport(residual <= tol, residual)


def horizon_residual(X: Operator, j: int) -> float:
    """Norm of the commutator of ``X`` with the vacuum projection on the last ``j`` bins.

    Operators with zero residual are compressed multiplicatively by the flow
    and the shifts; this is the horizon-safety predicate.
    """
    mask = tail_vacuum_mask(X.params, j)
    if X.includes_initial:
        mask = np.tile(mask, X.params.init_dim)
    differs = mask[:, None] != mask[None, :]
    return float(np.linalg.norm(X.matrix[differs]))


def is_horizon_safe(X: Operator, j: int, tol: float = 1e-10) -> bool:
    return horizon_residual(X, j) <= tol


def vector_horizon_residual(v: StateVector, j: int) -> float:
    """Norm of the part of ``v`` that is not vacuum on the last ``j`` bins."""
    mask = tail_vacuum_mask(v.params, j)
    if v.includes_initial:
        mask = np.tile(mask, v.params.init_dim)
    return float(np.linalg.norm(v.amplitudes[~mask]))
