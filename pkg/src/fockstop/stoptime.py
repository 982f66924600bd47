"""Quantum stop times on bin boundaries and the maps they induce.

A stop time is a projection-valued measure with atoms at the bin boundaries
``t_1, ..., t_n``.  The atom at ``t_k`` has the form ``Q_k ⊗ I_{bins > k}``.
Because the measure is finitely supported, every limit over partitions
collapses to a finite sum over atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fock
from .flow import sigma_t
from .model import (
    DomainError,
    HorizonError,
    ModelParams,
    Operator,
    StateVector,
    StepFunction,
    ValidationError,
)


@dataclass(frozen=True)
class StopTime:
    params: ModelParams
    masses: tuple[tuple[int, Operator], ...]

    def __post_init__(self):
        masses = tuple(sorted(((int(k), P) for k, P in self.masses), key=lambda kp: kp[0]))
        object.__setattr__(self, "masses", masses)

    @property
    def bins(self) -> list[int]:
        return [k for k, _ in self.masses]

    def mass(self, k: int) -> Operator:
        total = Operator.zero(self.params)
        for j, P in self.masses:
            if j == k:
                total = total + P
        return total

    def cumulative(self, t: int) -> Operator:
        """``S([0, t_t])``."""
        return self.interval(0, t)

    def interval(self, s: int, t: int) -> Operator:
        """``S((t_s, t_t])``."""
        total = np.zeros((self.params.fock_dim,) * 2, dtype=complex)
        for k, P in self.masses:
            if s < k <= t:
                total += P.matrix
        return Operator(total, self.params)

    @property
    def latest(self) -> int:
        """Last bin boundary carrying non-zero mass."""
        nonzero = [k for k, P in self.masses if np.any(np.abs(P.matrix) > 1e-14)]
        return max(nonzero, default=0)

    def __iter__(self):
        return iter(self.masses)


@dataclass(frozen=True)
class ComplexMeasure:
    atoms: tuple[tuple[int, complex], ...]

    def total(self) -> complex:
        return sum((v for _, v in self.atoms), 0j)

    def __getitem__(self, k: int) -> complex:
        return sum((v for j, v in self.atoms if j == k), 0j)


@dataclass
class StopTimeReport:
    residuals: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-10

    @property
    def failures(self) -> list[str]:
        return [name for name, r in self.residuals.items() if not r <= self.tol]

    @property
    def ok(self) -> bool:
        return not self.failures

    def raise_if_invalid(self) -> None:
        if not self.ok:
            detail = ", ".join(f"{n}={self.residuals[n]:.3g}" for n in self.failures)
            raise ValidationError(f"invalid stop time: {detail}")


def validate(S: StopTime, tol: float = 1e-10) -> StopTimeReport:
    """Residuals of the four stop-time axioms.

    ``projection``: each atom is an orthogonal projection; ``orthogonality``:
    distinct atoms multiply to zero; ``completeness``: the atoms sum to the
    identity, which also rules out mass at 0 and at infinity; ``adaptedness``:
    the atom at ``t_k`` commutes with everything on bins after ``k``.
    """
    params = S.params
    report = StopTimeReport(tol=tol)
    if any(not 1 <= k <= params.n_bins for k in S.bins):
        report.residuals["support"] = float("inf")
    report.residuals["projection"] = max(
        (P.projection_residual() for _, P in S.masses), default=0.0
    )
    orth = 0.0
    for i, (_, P) in enumerate(S.masses):
        for _, R in S.masses[i + 1 :]:
            orth = max(orth, float(np.linalg.norm(P.matrix @ R.matrix)))
    report.residuals["orthogonality"] = orth
    report.residuals["completeness"] = S.cumulative(params.n_bins).distance(
        Operator.identity(params)
    )
    report.residuals["adaptedness"] = max(
        (
            fock.adaptedness_check(P, min(max(k, 0), params.n_bins), tol).residual
            for k, P in S.masses
        ),
        default=0.0,
    )
    return report


# ---------------------------------------------------------------------------
# generators


def _lift(params: ModelParams, Q: np.ndarray, k: int) -> Operator:
    """``Q ⊗ I_{bins > k}`` for ``Q`` acting on bins ``≤ k``."""
    return Operator(np.kron(Q, np.eye(params.bin_dim ** (params.n_bins - k))), params)


def deterministic(params: ModelParams, k: int) -> StopTime:
    if not 1 <= k <= params.n_bins:
        raise HorizonError(f"deterministic time {k} outside 1..{params.n_bins}")
    return StopTime(params, ((k, Operator.identity(params)),))


def first_arrival(params: ModelParams, last_bin: int | None = None) -> StopTime:
    """Stop at the first bin holding a particle.

    The all-vacuum remainder is assigned to ``last_bin`` (the final bin by
    default) so that the stop time is finite.
    """
    K = params.n_bins if last_bin is None else last_bin
    if not 1 <= K <= params.n_bins:
        raise HorizonError(f"last bin {K} outside 1..{params.n_bins}")
    vac = fock.bin_vacuum_projection(params)
    occupied = np.eye(params.bin_dim) - vac
    masses = []
    for k in range(1, K):
        Q = np.kron(_power(vac, k - 1), occupied)
        masses.append((k, _lift(params, Q, k)))
    masses.append((K, _lift(params, _power(vac, K - 1), K - 1)))
    return StopTime(params, tuple(masses))


def _power(m: np.ndarray, times: int) -> np.ndarray:
    out = np.eye(1)
    for _ in range(times):
        out = np.kron(out, m)
    return out


def random_stoptime(
    params: ModelParams, seed, last_bin: int | None = None
) -> StopTime:
    """Random adapted stop time with atoms on bins ``1..last_bin``.

    The cumulative projection at ``t_k`` grows by a random subspace of the
    remaining complement, drawn inside the bins ``≤ k`` factor; at
    ``last_bin`` the whole complement is absorbed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = params.n_bins if last_bin is None else last_bin
    if not 1 <= K <= params.n_bins:
        raise HorizonError(f"last bin {K} outside 1..{params.n_bins}")
    b = params.bin_dim
    basis = np.zeros((1, 0), dtype=complex)  # cumulative range, bins ≤ k − 1
    masses = []
    for k in range(1, K + 1):
        basis = np.kron(basis, np.eye(b))
        dim = b**k
        complement = np.eye(dim) - basis @ basis.conj().T
        free = dim - basis.shape[1]
        if k == K:
            Q = complement
            Q = (Q + Q.conj().T) / 2
        else:
            rank = int(rng.integers(0, free + 1))
            if rank == 0:
                masses.append((k, Operator.zero(params)))
                continue
            g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
            new, _ = np.linalg.qr(complement @ g)
            new = new - basis @ (basis.conj().T @ new)
            new, _ = np.linalg.qr(new)
            Q = new @ new.conj().T
            basis = np.hstack([basis, new])
        masses.append((k, _lift(params, Q, k)))
    return StopTime(params, tuple(masses))


def shift_stoptime(S: StopTime, j: int) -> StopTime:
    """``S + t_j``: every atom moves ``j`` bins later, unchanged."""
    if S.latest + j > S.params.n_bins:
        raise HorizonError(
            f"shifting by {j} moves mass at {S.latest} past bin {S.params.n_bins}"
        )
    return StopTime(S.params, tuple((k + j, P) for k, P in S.masses if k + j <= S.params.n_bins))


# ---------------------------------------------------------------------------
# measures and stop-time integrals


def sfg_measure(S: StopTime, f: StepFunction, g: StepFunction) -> ComplexMeasure:
    """Atoms ``exp(−Σ_{j>k} ⟨f_j, g_j⟩) ⟨e(f), P_k e(g)⟩``."""
    params = S.params
    ef, eg = fock.exp_vector(params, f), fock.exp_vector(params, g)
    pair = np.sum(np.conj(f.amplitudes) * g.amplitudes, axis=1)
    atoms = []
    for k, P in S.masses:
        weight = np.exp(-pair[k:].sum())
        atoms.append((k, complex(weight * ef.inner(P @ eg))))
    return ComplexMeasure(tuple(atoms))


@dataclass(frozen=True)
class AdaptedFamily:
    """Future-adapted family: ``F_k`` lives on bins ``k+1..n``.

    ``entries[k - 1]`` is ``F_k`` for ``k = 1..n``; ``F_n`` is a scalar.
    """

    params: ModelParams
    entries: tuple[np.ndarray, ...]

    def __post_init__(self):
        params = self.params
        if len(self.entries) != params.n_bins:
            raise DomainError(f"need {params.n_bins} entries, got {len(self.entries)}")
        entries = []
        for k, F in enumerate(self.entries, start=1):
            F = np.array(F, dtype=complex).ravel()
            if F.shape[0] != params.bin_dim ** (params.n_bins - k):
                raise DomainError(f"F_{k} has dimension {F.shape[0]}")
            F.setflags(write=False)
            entries.append(F)
        object.__setattr__(self, "entries", tuple(entries))

    def __getitem__(self, k: int) -> np.ndarray:
        return self.entries[k - 1]

    def at(self, k: int) -> StateVector:
        """``F(t_k) = e(0 on bins ≤ k) ⊗ F_k`` as a full Fock vector."""
        head = np.zeros(self.params.bin_dim**k)
        head[0] = 1.0
        return StateVector(np.kron(head, self[k]), self.params)

    @classmethod
    def vacuum(cls, params: ModelParams) -> AdaptedFamily:
        return cls.from_function(params, lambda k: fock.vacuum(params))

    @classmethod
    def shifted(cls, params: ModelParams, x: StateVector) -> AdaptedFamily:
        """``F(t_k) = Γ_k x``; exact while ``x`` is vacuum on its last ``k`` bins."""
        return cls(
            params,
            tuple(fock.shifted_tail(params, x.amplitudes, k) for k in range(1, params.n_bins + 1)),
        )

    @classmethod
    def from_function(cls, params: ModelParams, fn) -> AdaptedFamily:
        """Family whose ``F(t_k)`` is ``Γ_kΓ_k^* fn(k)``, i.e. ``fn(k)`` cut to bins ``> k``."""
        return cls(
            params,
            tuple(
                fock.tail_part(params, fn(k).amplitudes, k)
                for k in range(1, params.n_bins + 1)
            ),
        )

    @classmethod
    def random(cls, params: ModelParams, rng: np.random.Generator) -> AdaptedFamily:
        """Entries with independent Gaussian amplitudes and unit norm."""
        entries = []
        for k in range(1, params.n_bins + 1):
            dim = params.bin_dim ** (params.n_bins - k)
            v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            entries.append(v / np.linalg.norm(v))
        return cls(params, tuple(entries))


def stop_integral(
    S: StopTime, f: StepFunction, F: AdaptedFamily, up_to: int | None = None
) -> StateVector:
    """``Σ_{t_k ≤ t} P_k (e(f on bins ≤ k) ⊗ F_k)``."""
    params = S.params
    t = params.n_bins if up_to is None else up_to
    if F.params.fock_dim != params.fock_dim:
        raise DomainError("adapted family lives on a different model")
    out = np.zeros(params.fock_dim, dtype=complex)
    for k, P in S.masses:
        if k > t:
            continue
        head = fock.exp_vector(params, f.head(k)).amplitudes
        head = fock.head_part(params, head, k)
        out += P.matrix @ np.kron(head, F[k])
    return StateVector(out, params)


# ---------------------------------------------------------------------------
# stopped time projections and shifts


def time_projection_ES(S: StopTime, up_to: int | None = None) -> Operator:
    """``E_{S,t} = Σ_{t_k ≤ t} P_k E_k``; ``E_S`` when ``up_to`` is omitted."""
    params = S.params
    t = params.n_bins if up_to is None else up_to
    out = np.zeros((params.fock_dim,) * 2, dtype=complex)
    for k, P in S.masses:
        if k <= t:
            mask = fock.tail_vacuum_mask(params, params.n_bins - k)
            out += P.matrix * mask[None, :]
    return Operator(out, params)


def stopped_shift(S: StopTime) -> Operator:
    """``Γ_S = Σ_k P_k Γ_k``; isometric on inputs that are vacuum on the last ``S.latest`` bins."""
    params = S.params
    out = np.zeros((params.fock_dim,) * 2, dtype=complex)
    for k, P in S.masses:
        out += P.matrix @ fock.shift_Gamma(params, k).matrix
    return Operator(out, params)


def safe_basis(params: ModelParams, j: int) -> np.ndarray:
    """Standard basis (as columns) of the vectors that are vacuum on the last ``j`` bins."""
    idx = np.flatnonzero(fock.tail_vacuum_mask(params, j))
    out = np.zeros((params.fock_dim, idx.size))
    out[idx, np.arange(idx.size)] = 1.0
    return out


def range_basis(P: Operator, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the range of a projection."""
    w, v = np.linalg.eigh((P.matrix + P.matrix.conj().T) / 2)
    return v[:, w > 0.5]


class StrongMarkov:
    """The factorisation ``j_S : ran E_S ⊗ ran Γ_S → Fock``.

    On a product ``u ⊗ Γ_S y`` it returns ``Σ_k P_k (head_k(E_k P_k u) ⊗ Γ_k y)``.
    The post-``S`` factor is restricted to ``Γ_S`` of vectors that are vacuum
    on the last ``S.latest`` bins, where ``Γ_S`` is isometric.
    """

    def __init__(self, S: StopTime, tol: float = 1e-10):
        self.S = S
        self.params = S.params
        self.tol = tol
        self.latest = S.latest
        self.E_S = time_projection_ES(S)
        self.Gamma_S = stopped_shift(S)
        self._projected = [
            (k, P.matrix, P.matrix * fock.tail_vacuum_mask(self.params, self.params.n_bins - k)[None, :])
            for k, P in S.masses
        ]

    def apply_preimage(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``j_S(u ⊗ Γ_S y)`` for raw arrays ``u ∈ ran E_S`` and horizon-safe ``y``."""
        params = self.params
        out = np.zeros(params.fock_dim, dtype=complex)
        for k, P, PE in self._projected:
            head = fock.head_part(params, PE @ u, k)
            out += P @ np.kron(head, fock.shifted_tail(params, y, k))
        return out

    def preimage(self, w: StateVector) -> np.ndarray:
        """``y`` with ``Γ_S y = w``; raises if ``w`` is outside the safe range."""
        y = self.Gamma_S.dag().matrix @ w.amplitudes
        y_state = StateVector(y, self.params)
        scale = max(1.0, w.norm())
        if fock.vector_horizon_residual(y_state, self.latest) > self.tol * scale:
            raise DomainError("post-S vector is not the shift of a horizon-safe vector")
        if np.linalg.norm(self.Gamma_S.matrix @ y - w.amplitudes) > self.tol * scale:
            raise DomainError("vector is not in the range of the stopped shift")
        return y

    def __call__(self, u: StateVector, w: StateVector) -> StateVector:
        scale = max(1.0, u.norm())
        if np.linalg.norm(self.E_S.matrix @ u.amplitudes - u.amplitudes) > self.tol * scale:
            raise DomainError("pre-S vector is not in the range of E_S")
        return StateVector(self.apply_preimage(u.amplitudes, self.preimage(w)), self.params)

    def apply_batch(self, U: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Columns ``j_S(U_i ⊗ Γ_S Y_j)``, ordered ``i``-major."""
        params = self.params
        b, n = params.bin_dim, params.n_bins
        out = np.zeros((params.fock_dim, U.shape[1] * Y.shape[1]), dtype=complex)
        for k, P, PE in self._projected:
            heads = (PE @ U).reshape(b**k, b ** (n - k), -1)[:, 0, :]
            tails = Y.reshape(b ** (n - k), b**k, -1)[:, 0, :]
            cols = np.einsum("ai,bj->abij", heads, tails).reshape(params.fock_dim, -1)
            out += P @ cols
        return out

    def matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(J, pre, post)`` with ``J[:, i*len(post)+j] = j_S(pre_i ⊗ Γ_S post_j)``.

        ``pre`` is an orthonormal basis of ``ran E_S``; ``post`` the standard
        basis of the horizon-safe vectors.
        """
        pre = range_basis(self.E_S)
        post = safe_basis(self.params, self.latest)
        return self.apply_batch(pre, post), pre, post


def strong_markov_j(S: StopTime, tol: float = 1e-10) -> StrongMarkov:
    return StrongMarkov(S, tol)


# ---------------------------------------------------------------------------
# convolution


def convolve(S: StopTime, T: StopTime) -> StopTime:
    """``(S ⋆ T)({t_m}) = Σ_{k+j=m} P^S_k σ_k(P^T_j)``."""
    params = S.params
    if S.latest + T.latest > params.n_bins:
        raise HorizonError(
            f"convolution needs {S.latest} + {T.latest} bins, model has {params.n_bins}"
        )
    atoms: dict[int, np.ndarray] = {}
    for k, P in S.masses:
        for j, R in T.masses:
            if k + j > params.n_bins:
                if np.any(np.abs(P.matrix) > 1e-14) and np.any(np.abs(R.matrix) > 1e-14):
                    raise HorizonError("convolution mass beyond the horizon")
                continue
            term = P.matrix @ sigma_t(params, k, R).matrix
            atoms[k + j] = atoms.get(k + j, 0) + term
    return StopTime(params, tuple((m, Operator(a, params)) for m, a in sorted(atoms.items())))


def _check_pair(S: StopTime, T: StopTime) -> None:
    if S.latest + T.latest > S.params.n_bins:
        raise HorizonError(
            f"pair needs {S.latest} + {T.latest} bins, model has {S.params.n_bins}"
        )


class PairFactorisation:
    """``j_{S,T}(u ⊗ v ⊗ w) = j_S(u ⊗ Γ_S j_T(Γ_S^* v ⊗ Γ_T Γ_{S⋆T}^* w))``."""

    def __init__(self, S: StopTime, T: StopTime, tol: float = 1e-10):
        _check_pair(S, T)
        self.S, self.T = S, T
        self.ST = convolve(S, T)
        self.jS = StrongMarkov(S, tol)
        self.jT = StrongMarkov(T, tol)
        self.jST = StrongMarkov(self.ST, tol)
        self.tol = tol

    def __call__(self, u: StateVector, v: StateVector, w: StateVector) -> StateVector:
        params = self.S.params
        z = self.jST.preimage(w)
        v_pre = self.jS.Gamma_S.dag().matrix @ v.amplitudes
        inner = self.jT.apply_preimage(self.jT.E_S.matrix @ v_pre, z)
        return StateVector(self.jS.apply_preimage(u.amplitudes, inner), params)


def j_ST_factorization(
    S: StopTime, T: StopTime, rng: np.random.Generator, samples: int = 20, tol: float = 1e-10
) -> dict[str, float]:
    """Residuals of the two-stop-time factorisation identities.

    ``isometry``: ``‖j_{S,T}(u⊗v⊗w)‖ = ‖u‖‖v‖‖w‖`` on random product vectors;
    ``factorisation``: ``j_{S,T} = j_{S⋆T} ∘ (j_S ⊗ I)``;
    ``pre_range``: the image of ``ran E_S ⊗ Γ_S(ran E_T)`` under ``j_S`` is
    ``ran E_{S⋆T}``; ``post_identity``: ``j_{S,T}(e(0) ⊗ Γ_S E_T y ⊗ Γ_{S⋆T} z)
    = Γ_S j_T(E_T y ⊗ Γ_T z)``; ``post_range``: those images lie in ``ran Γ_S``;
    ``gamma``: ``Γ_{S⋆T} = Γ_S Γ_T`` on horizon-safe vectors.
    """
    params = S.params
    jst = PairFactorisation(S, T, tol)
    E_T = jst.jT.E_S.matrix
    G_S, G_T, G_ST = jst.jS.Gamma_S.matrix, jst.jT.Gamma_S.matrix, jst.jST.Gamma_S.matrix
    safe_ST = safe_basis(params, jst.jST.latest)

    def rand_vec():
        v = rng.normal(size=params.fock_dim) + 1j * rng.normal(size=params.fock_dim)
        return v / np.linalg.norm(v)

    def rand_safe():
        c = rng.normal(size=safe_ST.shape[1]) + 1j * rng.normal(size=safe_ST.shape[1])
        return safe_ST @ (c / np.linalg.norm(c))

    res = {"isometry": 0.0, "factorisation": 0.0, "post_identity": 0.0, "post_range": 0.0}
    for _ in range(samples):
        u = jst.jS.E_S.matrix @ rand_vec()
        y = E_T @ rand_vec()
        z = rand_safe()
        v, w = G_S @ y, G_ST @ z
        out = jst(StateVector(u, params), StateVector(v, params), StateVector(w, params))
        expect = np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w)
        res["isometry"] = max(res["isometry"], abs(out.norm() - expect))
        head = jst.jS.apply_preimage(u, y)
        alt = jst.jST.apply_preimage(head, z)
        res["factorisation"] = max(res["factorisation"], float(np.linalg.norm(out.amplitudes - alt)))
        vac_out = jst(fock.vacuum(params), StateVector(v, params), StateVector(w, params))
        direct = G_S @ jst.jT.apply_preimage(y, z)
        res["post_identity"] = max(
            res["post_identity"], float(np.linalg.norm(vac_out.amplitudes - direct))
        )
        res["post_range"] = max(
            res["post_range"],
            float(np.linalg.norm(G_S @ (G_S.conj().T @ vac_out.amplitudes) - vac_out.amplitudes)),
        )
    # image of ran E_S ⊗ Γ_S(ran E_T) under j_S, against ran E_{S⋆T}
    pre_S = range_basis(jst.jS.E_S)
    pre_T = range_basis(jst.jT.E_S)
    A = jst.jS.apply_batch(pre_S, pre_T)
    E_ST = time_projection_ES(jst.ST).matrix
    res["pre_range"] = float(np.linalg.norm(A @ A.conj().T - E_ST))
    safe = safe_basis(params, S.latest + T.latest)
    res["gamma"] = float(np.linalg.norm((G_ST - G_S @ G_T) @ safe))
    return res
