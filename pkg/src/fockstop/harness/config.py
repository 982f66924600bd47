"""Suite configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..model import DEFAULT_DIMENSION_CAP, ModelParams, ModelTooLargeError, ValidationError

SUITES = ("stoptime", "markov", "convolution", "flow", "cocycle", "applebaum", "convergence")


class ConfigError(ValidationError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class SuiteConfig:
    model: ModelParams = field(default_factory=ModelParams)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    amplitude_cap: float = 0.3
    tol_exact: float = 1e-10
    tol_trunc: float | None = None  # calibrated when missing
    suites: tuple[str, ...] = SUITES
    dimension_cap: int = DEFAULT_DIMENSION_CAP
    trials: int = 4
    convergence_amplitude: float = 0.2
    refinements: tuple[tuple[int, int], ...] = (
        (2, 2), (2, 3), (2, 4), (2, 5), (4, 2), (4, 3), (4, 4), (4, 5),
    )

    def __post_init__(self):
        unknown = sorted(set(self.suites) - set(SUITES))
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
        if self.amplitude_cap < 0 or self.convergence_amplitude < 0:
            raise ConfigError("amplitudes must be non-negative")
        if self.tol_exact < 0:
            raise ConfigError("tol_exact must be non-negative")
        if self.tol_trunc is not None and not self.tol_trunc > self.tol_exact:
            raise ConfigError(f"tol_trunc {self.tol_trunc} must exceed tol_exact {self.tol_exact}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.model.n_bins < 2 and set(self.suites) & {"markov", "convolution", "flow", "applebaum"}:
            raise ConfigError("shift-based suites need at least two bins")
        try:
            self.model.check_capacity(self.dimension_cap)
            for n, N in self.refinements if "convergence" in self.suites else ():
                self.model.replace(n_bins=n, cutoff_N=N).check_capacity(self.dimension_cap)
        except ModelTooLargeError as exc:
            raise ModelTooLargeError(f"{exc}; {advisory_sizes(self)}") from None

    def with_tolerance(self, tol_trunc: float) -> SuiteConfig:
        return replace(self, tol_trunc=tol_trunc)

    def replace(self, **changes) -> SuiteConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = self.model.to_dict()
        out["seeds"] = list(self.seeds)
        out["suites"] = list(self.suites)
        out["refinements"] = [list(r) for r in self.refinements]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SuiteConfig:
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config keys {extra}")
        try:
            if "model" in data:
                data["model"] = ModelParams(**data["model"])
            for key in ("seeds", "suites"):
                if key in data:
                    data[key] = tuple(data[key])
            if "refinements" in data:
                data["refinements"] = tuple((int(n), int(N)) for n, N in data["refinements"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cls(**data)


def load_config(path: str | Path) -> SuiteConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return SuiteConfig.from_dict(data)


def advisory_sizes(config: SuiteConfig) -> str:
    """Suggest model sizes that fit the dimension cap."""
    m = config.model
    options = []
    for n in range(m.n_bins, 0, -1):
        for N in range(m.cutoff_N, -1, -1):
            candidate = m.replace(n_bins=n, cutoff_N=N)
            if candidate.ambient_dim <= config.dimension_cap:
                options.append(f"n_bins={n}, cutoff_N={N} (dim {candidate.ambient_dim})")
                break
        if len(options) == 3:
            break
    return "sizes within the cap: " + "; ".join(options) if options else "no size fits the cap"
