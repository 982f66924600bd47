"""Model parameters and the tagged vector/operator containers.

The ambient space is ``init ⊗ bin_1 ⊗ ... ⊗ bin_n``.  Each bin carries the
Fock space over ``C^d`` truncated at total occupation ``cutoff_N``.  Basis
vectors are occupation tuples enumerated bin-major (bin 1 most significant),
lexicographic within a bin; the initial space is the leftmost factor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_DIMENSION_CAP = 4096


class FockStopError(Exception):
    """Base class for errors raised by this package."""


class ModelTooLargeError(FockStopError):
    pass


class HorizonError(FockStopError):
    """An operation would push mass past the last bin."""


class DomainError(FockStopError):
    pass


class ValidationError(FockStopError):
    pass


class AdaptednessError(FockStopError):
    """An operator does not factor across a bin boundary as required."""


@dataclass(frozen=True)
class ModelParams:
    """Discretisation of the noise space.

    ``horizon_T`` is split into ``n_bins`` bins of width ``horizon_T / n_bins``;
    ``cutoff_N`` bounds the total occupation of each bin, ``mult_d`` is the
    dimension of the multiplicity space and ``init_dim`` that of the initial
    space.
    """

    horizon_T: float = 1.0
    n_bins: int = 4
    cutoff_N: int = 3
    mult_d: int = 1
    init_dim: int = 2

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        if self.n_bins < 1:
            raise ValueError("n_bins must be positive")
        if self.cutoff_N < 0:
            raise ValueError("cutoff_N must be non-negative")
        if self.mult_d < 1 or self.init_dim < 1:
            raise ValueError("mult_d and init_dim must be positive")

    @property
    def bin_width(self) -> float:
        return self.horizon_T / self.n_bins

    @property
    def bin_dim(self) -> int:
        d = self.mult_d
        return sum(math.comb(m + d - 1, d - 1) for m in range(self.cutoff_N + 1))

    @property
    def fock_dim(self) -> int:
        return self.bin_dim**self.n_bins

    @property
    def ambient_dim(self) -> int:
        return self.init_dim * self.fock_dim

    def dim(self, includes_initial: bool) -> int:
        return self.ambient_dim if includes_initial else self.fock_dim

    def check_capacity(self, cap: int = DEFAULT_DIMENSION_CAP) -> None:
        if self.ambient_dim > cap:
            raise ModelTooLargeError(
                f"ambient dimension {self.ambient_dim} (bin dim {self.bin_dim}, "
                f"fock dim {self.fock_dim}) exceeds cap {cap}"
            )

    @cached_property
    def bin_basis(self) -> tuple[tuple[int, ...], ...]:
        """Occupation tuples of one bin, in basis order."""
        return tuple(
            occ
            for occ in itertools.product(range(self.cutoff_N + 1), repeat=self.mult_d)
            if sum(occ) <= self.cutoff_N
        )

    def basis_tuple(self, index: int) -> tuple[tuple[int, ...], ...]:
        """Per-bin occupation tuples of the Fock basis vector ``index``."""
        digits = np.unravel_index(index, (self.bin_dim,) * self.n_bins)
        return tuple(self.bin_basis[int(i)] for i in digits)

    def basis_index(self, occupations) -> int:
        lookup = {occ: i for i, occ in enumerate(self.bin_basis)}
        digits = [lookup[tuple(np.atleast_1d(o).tolist())] for o in occupations]
        return int(np.ravel_multi_index(digits, (self.bin_dim,) * self.n_bins))

    def replace(self, **changes) -> ModelParams:
        values = {
            "horizon_T": self.horizon_T,
            "n_bins": self.n_bins,
            "cutoff_N": self.cutoff_N,
            "mult_d": self.mult_d,
            "init_dim": self.init_dim,
        }
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self) -> dict:
        return {
            "horizon_T": self.horizon_T,
            "n_bins": self.n_bins,
            "cutoff_N": self.cutoff_N,
            "mult_d": self.mult_d,
            "init_dim": self.init_dim,
        }


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant test function, one row of amplitudes per bin.

    Row ``k`` holds the bin average scaled by ``sqrt(bin width)``, so the L2
    norm of the function is the Euclidean norm of the whole array.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        object.__setattr__(self, "amplitudes", _frozen(a))

    @classmethod
    def zero(cls, params: ModelParams) -> StepFunction:
        return cls(np.zeros((params.n_bins, params.mult_d)))

    @classmethod
    def constant(cls, params: ModelParams, c, bins: int | None = None) -> StepFunction:
        """Step function equal to the vector ``c`` on the first ``bins`` bins."""
        bins = params.n_bins if bins is None else bins
        c = np.broadcast_to(np.asarray(c, dtype=complex), (params.mult_d,))
        amps = np.zeros((params.n_bins, params.mult_d), dtype=complex)
        amps[:bins] = c * math.sqrt(params.bin_width)
        return cls(amps)

    @classmethod
    def random(
        cls,
        params: ModelParams,
        rng: np.random.Generator,
        amplitude: float = 0.3,
        support: int | None = None,
    ) -> StepFunction:
        """Random amplitudes with per-bin norm at most ``amplitude``."""
        support = params.n_bins if support is None else support
        raw = rng.normal(size=(params.n_bins, params.mult_d)) + 1j * rng.normal(
            size=(params.n_bins, params.mult_d)
        )
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        radii = amplitude * rng.uniform(size=(params.n_bins, 1))
        amps = raw / np.where(norms == 0, 1, norms) * radii
        amps[support:] = 0
        return cls(amps)

    @property
    def n_bins(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def support(self) -> int:
        """Index (1-based) of the last bin with a non-zero amplitude; 0 if none."""
        nz = np.flatnonzero(np.any(self.amplitudes != 0, axis=1))
        return int(nz[-1]) + 1 if nz.size else 0

    def inner(self, other: StepFunction) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def restrict(self, first: int, last: int) -> StepFunction:
        """Keep bins ``first..last`` (1-based, inclusive), zero elsewhere."""
        amps = np.zeros_like(self.amplitudes)
        amps[first - 1 : last] = self.amplitudes[first - 1 : last]
        return StepFunction(amps)

    def head(self, k: int) -> StepFunction:
        return self.restrict(1, k)

    def shift(self, j: int) -> StepFunction:
        """Right shift by ``j`` bins; amplitudes pushed past the horizon are lost."""
        amps = np.zeros_like(self.amplitudes)
        amps[j:] = self.amplitudes[: self.n_bins - j]
        return StepFunction(amps)

    def shift_back(self, j: int) -> StepFunction:
        amps = np.zeros_like(self.amplitudes)
        amps[: self.n_bins - j] = self.amplitudes[j:]
        return StepFunction(amps)

    def __add__(self, other: StepFunction) -> StepFunction:
        return StepFunction(self.amplitudes + other.amplitudes)

    def __mul__(self, z) -> StepFunction:
        return StepFunction(self.amplitudes * z)

    __rmul__ = __mul__


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    params: ModelParams
    includes_initial: bool = False

    def __post_init__(self):
        a = _frozen(np.ravel(self.amplitudes))
        if a.shape[0] != self.params.dim(self.includes_initial):
            raise ValueError(
                f"vector of length {a.shape[0]} does not match space of dimension "
                f"{self.params.dim(self.includes_initial)}"
            )
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def ampliate(self, init: np.ndarray) -> StateVector:
        """``init ⊗ self`` for a vector ``init`` in the initial space."""
        if self.includes_initial:
            raise DomainError("vector already carries the initial factor")
        return StateVector(np.kron(init, self.amplitudes), self.params, True)

    def _like(self, a) -> StateVector:
        return StateVector(a, self.params, self.includes_initial)

    def __add__(self, other: StateVector) -> StateVector:
        return self._like(self.amplitudes + other.amplitudes)

    def __sub__(self, other: StateVector) -> StateVector:
        return self._like(self.amplitudes - other.amplitudes)

    def __mul__(self, z) -> StateVector:
        return self._like(self.amplitudes * z)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Operator:
    """Dense operator on the Fock space, or on ``init ⊗ Fock``."""

    matrix: np.ndarray
    params: ModelParams
    includes_initial: bool = False

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.params.dim(self.includes_initial)
        if m.shape != (n, n):
            raise ValueError(f"matrix of shape {m.shape} does not act on dimension {n}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, params: ModelParams, includes_initial: bool = False) -> Operator:
        return cls(np.eye(params.dim(includes_initial)), params, includes_initial)

    @classmethod
    def zero(cls, params: ModelParams, includes_initial: bool = False) -> Operator:
        n = params.dim(includes_initial)
        return cls(np.zeros((n, n)), params, includes_initial)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> Operator:
        return Operator(self.matrix.conj().T, self.params, self.includes_initial)

    def ampliate(self) -> Operator:
        """``I_init ⊗ self``; operators that already carry the factor are returned as is."""
        if self.includes_initial:
            return self
        return Operator(
            np.kron(np.eye(self.params.init_dim), self.matrix), self.params, True
        )

    def _align(self, other: Operator) -> tuple[Operator, Operator]:
        if self.includes_initial == other.includes_initial:
            return self, other
        return self.ampliate(), other.ampliate()

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            op = self
            if other.includes_initial and not self.includes_initial:
                op = self.ampliate()
            elif self.includes_initial and not other.includes_initial:
                raise DomainError("operator on init ⊗ Fock applied to a Fock vector")
            return StateVector(op.matrix @ other.amplitudes, self.params, op.includes_initial)
        a, b = self._align(other)
        return Operator(a.matrix @ b.matrix, self.params, a.includes_initial)

    def __add__(self, other: Operator) -> Operator:
        a, b = self._align(other)
        return Operator(a.matrix + b.matrix, self.params, a.includes_initial)

    def __sub__(self, other: Operator) -> Operator:
        a, b = self._align(other)
        return Operator(a.matrix - b.matrix, self.params, a.includes_initial)

    def __mul__(self, z) -> Operator:
        return Operator(self.matrix * z, self.params, self.includes_initial)

    __rmul__ = __mul__

    def __neg__(self) -> Operator:
        return self * -1

    def distance(self, other: Operator) -> float:
        """Frobenius norm of the difference (an upper bound on the operator norm)."""
        a, b = self._align(other)
        return float(np.linalg.norm(a.matrix - b.matrix))

    def projection_residual(self) -> float:
        m = self.matrix
        return max(
            float(np.linalg.norm(m @ m - m)), float(np.linalg.norm(m - m.conj().T))
        )

    def is_projection(self, tol: float = 1e-10) -> bool:
        return self.projection_residual() <= tol

    def isometry_residual(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(self.dim)))

    def is_isometry(self, tol: float = 1e-10) -> bool:
        return self.isometry_residual() <= tol

    def is_adapted_to(self, k: int, tol: float = 1e-10) -> bool:
        from .fock import adaptedness_check

        return adaptedness_check(self, k, tol).adapted


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def vector_distance(a: StateVector, b: StateVector) -> float:
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))
