"""p-adapted operator cocycles and their stopped versions.

A cocycle is stored as the explicit family ``V_0, ..., V_n`` of operators on
``init ⊗ Fock`` together with the multiplicity projection ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock
from .flow import random_safe_operator, sigma_S, sigma_t
from .model import (
    AdaptednessError,
    HorizonError,
    ModelParams,
    Operator,
    StepFunction,
    ValidationError,
)
from .stoptime import StopTime, safe_basis, shift_stoptime, stopped_shift, time_projection_ES


def check_projection(p, tol: float = 1e-12) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    r = max(np.linalg.norm(p @ p - p), np.linalg.norm(p - p.conj().T))
    if r > tol:
        raise ValidationError(f"multiplicity matrix is not an orthogonal projection (residual {r:.3g})")
    return p


@dataclass(frozen=True)
class Cocycle:
    params: ModelParams
    p: np.ndarray
    entries: tuple[Operator, ...]

    def __post_init__(self):
        p = check_projection(self.p)
        if p.shape != (self.params.mult_d,) * 2:
            raise ValidationError(f"p has shape {p.shape}, multiplicity dimension is {self.params.mult_d}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if len(self.entries) != self.params.n_bins + 1:
            raise ValidationError("a cocycle needs entries V_0..V_n")
        object.__setattr__(self, "entries", tuple(V.ampliate() for V in self.entries))

    def __getitem__(self, k: int) -> Operator:
        return self.entries[k]

    @property
    def identity_adapted(self) -> bool:
        return bool(np.allclose(self.p, np.eye(self.params.mult_d)))

    @property
    def vacuum_adapted(self) -> bool:
        return bool(np.allclose(self.p, 0))

    def tail_factor(self, k: int) -> np.ndarray:
        """``Γ(p)`` on each bin after ``k``."""
        params = self.params
        gp = fock.bin_second_quantisation(params, self.p)
        out = np.eye(1)
        for _ in range(params.n_bins - k):
            out = np.kron(out, gp)
        return out


# ---------------------------------------------------------------------------
# constructors


def _from_heads(params: ModelParams, p, heads) -> Cocycle:
    """Cocycle with ``V_k = heads[k] ⊗ Γ(p)^{⊗ bins > k}``."""
    gp = fock.bin_second_quantisation(params, check_projection(p))
    entries = []
    for k, head in enumerate(heads):
        tail = np.eye(1)
        for _ in range(params.n_bins - k):
            tail = np.kron(tail, gp)
        entries.append(Operator(np.kron(head, tail), params, True))
    return Cocycle(params, p, tuple(entries))


def weyl_cocycle(params: ModelParams, c, p=None) -> Cocycle:
    """``V_k = I ⊗ W(1_{bins ≤ k} c) ⊗ Γ(p)^{⊗ bins > k}``.

    ``p`` defaults to the identity (the Weyl cocycle proper); ``p = 0`` gives
    the vacuum-adapted Weyl cocycle.  Other projections (``mult_d ≥ 2``) are
    experimental: they yield isometric ``p``-adapted cocycles in the discrete
    model but have no continuous-time counterpart to compare with.
    """
    p = np.eye(params.mult_d) if p is None else p
    f = StepFunction.constant(params, c)
    disp = [fock.bin_displacement(params, f.amplitudes[k]) for k in range(params.n_bins)]
    heads = []
    head = np.eye(params.init_dim)
    heads.append(head)
    for k in range(params.n_bins):
        head = np.kron(head, disp[k])
        heads.append(head)
    return _from_heads(params, p, heads)


def vacuum_weyl_cocycle(params: ModelParams, c) -> Cocycle:
    """``V_k = I ⊗ E_k W(1_{bins ≤ k} c)``."""
    return weyl_cocycle(params, c, p=np.zeros((params.mult_d, params.mult_d)))


def init_bin_operator(params: ModelParams, U: np.ndarray, bin_index: int) -> np.ndarray:
    """Matrix of ``U`` acting on ``init ⊗ bin_index`` inside ``init ⊗ Fock``."""
    h, b = params.init_dim, params.bin_dim
    U4 = np.asarray(U).reshape(h, b, h, b)
    left = np.eye(b ** (bin_index - 1))
    right = np.eye(b ** (params.n_bins - bin_index))
    out = np.einsum("xayb,LM,RS->xLaRyMbS", U4, left, right)
    return out.reshape(params.ambient_dim, params.ambient_dim)


def interaction_cocycle(params: ModelParams, U: np.ndarray, p=None) -> Cocycle:
    """Repeated-interaction cocycle ``V_k = U^{(1)} U^{(2)} ... U^{(k)} ⊗ Γ(p)``.

    ``U^{(i)}`` is the unitary ``U`` on ``init ⊗ bin i``.  Unlike the Weyl
    family this couples the initial space to the noise.
    """
    p = np.eye(params.mult_d) if p is None else p
    h, b, n = params.init_dim, params.bin_dim, params.n_bins
    heads = [np.eye(h)]
    head = np.eye(h)
    for k in range(1, n + 1):
        sub = params.replace(n_bins=k)
        head = np.kron(head, np.eye(b)) @ init_bin_operator(sub, U, k)
        heads.append(head)
    return _from_heads(params, p, heads)


def random_interaction_unitary(params: ModelParams, rng: np.random.Generator, strength: float = 0.5) -> np.ndarray:
    """``exp(−i strength H)`` for a random Hermitian ``H`` on ``init ⊗ bin``."""
    from scipy.linalg import expm

    dim = params.init_dim * params.bin_dim
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = (g + g.conj().T) / 2
    H /= np.linalg.norm(H, 2)
    return expm(-1j * strength * H)


# ---------------------------------------------------------------------------
# identity-adapted projection


def factor_across(V: Operator, k: int, tail: np.ndarray) -> tuple[np.ndarray, float]:
    """Best ``A`` with ``V ≈ A ⊗ tail`` across the bin-``k`` cut, and the residual."""
    params = V.params
    h = params.init_dim if V.includes_initial else 1
    left = h * params.bin_dim**k
    right = params.bin_dim ** (params.n_bins - k)
    t = V.matrix.reshape(left, right, left, right)
    A = np.einsum("xayb,ab->xy", t, tail.conj()) / np.vdot(tail, tail).real
    residual = float(np.linalg.norm(V.matrix - np.kron(A, tail)))
    return A, residual


def hat(V: Cocycle, k: int, tol: float = 1e-10) -> Operator:
    """``V̂_k = V_{k)} ⊗ I``: the tail factor ``Γ(p)^{⊗}`` replaced by the identity."""
    params = V.params
    A, r = factor_across(V[k], k, V.tail_factor(k))
    if r > tol * max(1.0, float(np.linalg.norm(V[k].matrix))):
        raise AdaptednessError(f"V_{k} does not factor across bin {k} (residual {r:.3g})")
    return Operator(np.kron(A, np.eye(params.bin_dim ** (params.n_bins - k))), params, True)


def cocycle_residuals(V: Cocycle) -> dict[str, float]:
    """Residuals of the cocycle invariants.

    ``p_adapted``: factorisation ``V_k = V_{k)} ⊗ Γ(p)``; ``cocycle``:
    ``V_{a+b} = V̂_a σ_a(V_b)``; ``isometric``: ``V̂_k^* V̂_k = I``;
    ``vstar_v``: ``V_k^* V_k = I ⊗ I_{≤k} ⊗ Γ(p)``; ``local_products``:
    ``V_s^* V_r`` and ``V_r^* V_s`` (``r ≤ s``) commute with bins ``≤ r``.
    """
    params = V.params
    n = params.n_bins
    out = {"p_adapted": 0.0, "cocycle": 0.0, "isometric": 0.0, "vstar_v": 0.0, "local_products": 0.0}
    hats = []
    for k in range(n + 1):
        tail = V.tail_factor(k)
        _, r = factor_across(V[k], k, tail)
        out["p_adapted"] = max(out["p_adapted"], r)
        H = hat(V, k, tol=np.inf)
        hats.append(H)
        out["isometric"] = max(out["isometric"], H.isometry_residual())
        target = np.kron(np.eye(params.init_dim * params.bin_dim**k), tail)
        vv = V[k].matrix.conj().T @ V[k].matrix
        out["vstar_v"] = max(out["vstar_v"], float(np.linalg.norm(vv - target)))
    for a in range(n + 1):
        for b in range(n + 1 - a):
            rhs = hats[a] @ sigma_t(params, a, V[b])
            out["cocycle"] = max(out["cocycle"], V[a + b].distance(rhs))
    for r in range(1, n + 1):
        for s in range(r, n + 1):
            for X in (V[s].dag() @ V[r], V[r].dag() @ V[s]):
                for i in range(1, r + 1):
                    out["local_products"] = max(out["local_products"], fock.bin_commutant_residual(X, i))
    return out


# ---------------------------------------------------------------------------
# stopping


def _require_isometric(V: Cocycle, tol: float) -> None:
    worst = max(hat(V, k, tol=np.inf).isometry_residual() for k in range(V.params.n_bins + 1))
    if worst > tol:
        raise ValidationError(f"cocycle is not isometric (residual {worst:.3g})")


def stop_cocycle(
    V: Cocycle,
    S: StopTime,
    up_to: int | None = None,
    tol: float = 1e-9,
    use_hat: bool = False,
    check: bool = True,
) -> Operator:
    """``V_{S,t} = Σ_{t_k ≤ t} V_k P_k``; with ``use_hat`` the hat process is stopped.

    Non-isometric cocycles are rejected unless ``check`` is off.
    """
    params = V.params
    t = params.n_bins if up_to is None else up_to
    if S.params != params:
        raise ValidationError("stop time and cocycle live on different models")
    if check:
        _require_isometric(V, tol)
    out = np.zeros((params.ambient_dim,) * 2, dtype=complex)
    for k, P in S.masses:
        if k <= t:
            Vk = hat(V, k) if use_hat else V[k]
            out += Vk.matrix @ P.ampliate().matrix
    return Operator(out, params, True)


def stopped_norm_residuals(
    V: Cocycle, S: StopTime, rng: np.random.Generator, samples: int = 100, tol: float = 1e-9
) -> dict[str, float]:
    """Norm relations of the stopped cocycle on random vectors.

    ``contraction``: ``max(‖V_{S,t}z‖ − ‖S([0,t])z‖, 0)``; ``cauchy``:
    ``max(‖(V_{S,t} − V_{S,s})z‖ − ‖S((s,t])z‖, 0)``; ``range``:
    ``‖V_{S,t} − V_{S,t}S([0,t])‖``.  Vacuum-adapted ``V`` adds ``vacuum_norm``
    (``|‖V_{S,t}z‖ − ‖E_{S,t}z‖|``) and ``vacuum_range``
    (``‖V_{S,t}E_{S,t} − V_{S,t}‖``); identity-adapted ``V`` adds
    ``identity_norm`` (``|‖V_{S,t}z‖ − ‖S([0,t])z‖|``).
    """
    params = V.params
    n = params.n_bins
    dim = params.ambient_dim
    Z = rng.normal(size=(dim, samples)) + 1j * rng.normal(size=(dim, samples))
    Z /= np.linalg.norm(Z, axis=0)
    _require_isometric(V, tol)
    stopped = [stop_cocycle(V, S, t, check=False).matrix for t in range(n + 1)]
    cum = [S.cumulative(t).ampliate().matrix for t in range(n + 1)]
    out = {"contraction": 0.0, "cauchy": 0.0, "range": 0.0}
    if V.vacuum_adapted:
        out.update(vacuum_norm=0.0, vacuum_range=0.0)
    if V.identity_adapted:
        out["identity_norm"] = 0.0

    def col_norms(M):
        return np.linalg.norm(M @ Z, axis=0)

    for t in range(n + 1):
        vz, sz = col_norms(stopped[t]), col_norms(cum[t])
        out["contraction"] = max(out["contraction"], float(np.max(vz - sz, initial=0.0)))
        out["range"] = max(out["range"], float(np.linalg.norm(stopped[t] - stopped[t] @ cum[t])))
        for s in range(t):
            gap = col_norms(stopped[t] - stopped[s]) - col_norms(cum[t] - cum[s])
            out["cauchy"] = max(out["cauchy"], float(np.max(gap, initial=0.0)))
        if V.vacuum_adapted:
            E = time_projection_ES(S, t).ampliate().matrix
            out["vacuum_norm"] = max(out["vacuum_norm"], float(np.max(np.abs(vz - col_norms(E)))))
            out["vacuum_range"] = max(out["vacuum_range"], float(np.linalg.norm(stopped[t] @ E - stopped[t])))
        if V.identity_adapted:
            out["identity_norm"] = max(out["identity_norm"], float(np.max(np.abs(vz - sz))))
    return out


def stopped_hat(V: Cocycle, S: StopTime, tol: float = 1e-9) -> Operator:
    """``V̂_S``."""
    return stop_cocycle(V, S, tol=tol, use_hat=True)


def stopped_cocycle_relation(V: Cocycle, S: StopTime, j: int, tol: float = 1e-9) -> float:
    """Residual of ``V_{S+t_j} = V̂_S σ_S(V_j)``."""
    if S.latest + j > V.params.n_bins:
        raise HorizonError(f"S + {j} leaves the horizon")
    _require_isometric(V, tol)
    lhs = stop_cocycle(V, shift_stoptime(S, j), check=False)
    rhs = stop_cocycle(V, S, use_hat=True, check=False) @ sigma_S(S, V[j])
    return lhs.distance(rhs)


def applebaum_suite(
    V: Cocycle, S: StopTime, j: int, rng: np.random.Generator | None = None, tol: float = 1e-9
) -> dict[str, float]:
    """Residuals of the identities that follow from the stopped cocycle relation.

    ``a``: ``V_{S+t}Γ_S = V̂_S Γ_S V_t``; ``b``: ``V̂_S^* V_{S+t} = σ_S(V_t)``;
    ``c``: ``Γ_S^* V̂_S^* V_{S+t} Γ_S = V_t``, the last two on horizon-safe
    vectors.  For vacuum-adapted ``V``, ``d``: ``V̂_S^*V_{S+t}`` is compressed
    by ``E_{S+t}``.  For identity-adapted ``V``, ``e``: ``V̂_S^*V_{S+t}``
    commutes with ``σ_{S+t}(X)`` for ``X`` in ``I ⊗ B(Fock)``, tested on a
    random element and its adjoint.
    """
    params = V.params
    K = S.latest
    if K + j > params.n_bins:
        raise HorizonError(f"S + {j} leaves the horizon")
    rng = np.random.default_rng(0) if rng is None else rng
    _require_isometric(V, tol)
    St = shift_stoptime(S, j)
    V_St = stop_cocycle(V, St, check=False)
    V_hat_S = stop_cocycle(V, S, use_hat=True, check=False)
    G = stopped_shift(S).ampliate().matrix
    safe = np.kron(np.eye(params.init_dim), safe_basis(params, K))
    Vt = V[j].matrix
    out = {}
    out["a"] = float(np.linalg.norm((V_St.matrix @ G - V_hat_S.matrix @ G @ Vt) @ safe))
    X = V_hat_S.dag() @ V_St
    out["b"] = X.distance(sigma_S(S, V[j]))
    lhs_c = safe.conj().T @ G.conj().T @ X.matrix @ G @ safe
    out["c"] = float(np.linalg.norm(lhs_c - safe.conj().T @ Vt @ safe))
    if V.vacuum_adapted:
        E = time_projection_ES(St).ampliate()
        out["d"] = X.distance(E @ X @ E)
    if V.identity_adapted:
        free = params.n_bins - K - j
        worst = 0.0
        if free > 0:
            Y = Operator(
                random_safe_operator(params, rng, free).matrix, params
            ).ampliate()
            for Z in (Y, Y.dag()):
                image = sigma_S(St, Z)
                worst = max(worst, (X @ image).distance(image @ X))
        out["e"] = worst
    return out
