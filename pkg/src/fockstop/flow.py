"""The CCR flow and its stopped version."""

from __future__ import annotations

import numpy as np

from . import fock
from .model import HorizonError, ModelParams, Operator


def sigma_t(params: ModelParams, j: int, X: Operator) -> Operator:
    """``σ_j(X) = I_{bins ≤ j} ⊗ Γ_j X Γ_j^*``.

    The shifted factor is the compression of ``X`` to vectors that are vacuum
    on the last ``j`` bins.  ``σ_j`` is multiplicative on operators commuting
    with that vacuum projection (see :func:`fock.is_horizon_safe`).  An initial
    factor, if present, is carried along untouched.
    """
    if j == 0:
        return X
    if not 0 <= j <= params.n_bins:
        raise HorizonError(f"shift {j} outside 0..{params.n_bins}")
    h = params.init_dim if X.includes_initial else 1
    keep = np.flatnonzero(fock.tail_vacuum_mask(params, j))
    m = keep.size
    idx = (np.arange(h)[:, None] * params.fock_dim + keep[None, :]).ravel()
    C = X.matrix[np.ix_(idx, idx)].reshape(h, m, h, m)
    head = np.eye(params.bin_dim**j)
    out = np.einsum("iyjz,ab->iayjbz", C, head).reshape(X.dim, X.dim)
    return Operator(out, params, X.includes_initial)


def _stop_atoms(S):
    return [(k, P) for k, P in S.masses]


def sigma_S(S, X: Operator, tol: float = 1e-10, check: bool = True) -> Operator:
    """``σ_S(X) = Σ_k σ_k(X) P_k``.

    With ``check`` set, ``X`` must commute with the vacuum projection on the
    last ``S.latest`` bins, otherwise :class:`HorizonError` is raised.
    """
    params = S.params
    K = S.latest
    if check:
        r = fock.horizon_residual(X, K)
        if r > tol * max(1.0, float(np.linalg.norm(X.matrix))):
            raise HorizonError(f"operator is not horizon safe for shifts up to {K} (residual {r:.3g})")
    out = np.zeros_like(X.matrix)
    for k, P in _stop_atoms(S):
        Pm = P.ampliate().matrix if X.includes_initial else P.matrix
        out += sigma_t(params, k, X).matrix @ Pm
    return Operator(out, params, X.includes_initial)


def random_safe_operator(
    params: ModelParams,
    rng: np.random.Generator,
    free_bins: int,
    includes_initial: bool = False,
) -> Operator:
    """Random operator on ``(init ⊗) bins ≤ free_bins``, identity on later bins.

    Normalised to unit Frobenius norm on its active factor.
    """
    h = params.init_dim if includes_initial else 1
    dim = h * params.bin_dim**free_bins
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g /= np.linalg.norm(g)
    out = np.kron(g, np.eye(params.bin_dim ** (params.n_bins - free_bins)))
    return Operator(out, params, includes_initial)


def homomorphism_suite(S, T, rng: np.random.Generator, samples: int = 5) -> dict[str, float]:
    """Max residuals of ``σ_{S⋆T} = σ_S ∘ σ_T`` and ``σ_S(E_T) = E_{S⋆T}``."""
    from .stoptime import convolve, time_projection_ES

    params = S.params
    ST = convolve(S, T)
    free = params.n_bins - S.latest - T.latest
    comp = 0.0
    for _ in range(samples):
        X = random_safe_operator(params, rng, free)
        lhs = sigma_S(ST, X)
        rhs = sigma_S(S, sigma_S(T, X))
        comp = max(comp, lhs.distance(rhs))
    ET = time_projection_ES(T)
    proj = sigma_S(S, ET).distance(time_projection_ES(ST))
    return {"composition": comp, "time_projection": proj}
