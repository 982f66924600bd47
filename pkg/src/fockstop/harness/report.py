"""Assertion records and suite reports."""

from __future__ import annotations

import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

# labels of the results each record checks
ANCHORS = frozenset(
    {
        "def:qst",
        "thm:expS",
        "thm:shift",
        "thm:isom",
        "lem:key",
        "keyip",
        "keyS",
        "cor:key",
        "thm:SstarT",
        "SstarT1",
        "SstarT2",
        "thm:SstarTiso",
        "def:ccrflow",
        "thm:flowstop",
        "flowgamma",
        "prp:sigmagamma",
        "thm:addt",
        "eg:weylcocycle",
        "defcocycle",
        "padapt",
        "lem:uni",
        "thm:stopcocycle",
        "prp:vnorm",
        "prp:inorm",
        "thm:cocyclerel",
        "appstop",
        "apploc",
        "appdet",
    }
)


@dataclass(frozen=True)
class Record:
    name: str
    anchor: str
    residual: float
    tolerance: float

    def __post_init__(self):
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")
        object.__setattr__(self, "residual", float(self.residual))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def fingerprint() -> dict:
    return {
        "python": platform.python_version(),
        "implementation": sys.implementation.name,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "machine": platform.machine(),
        "system": platform.system(),
    }


@dataclass
class SuiteReport:
    config: dict
    records: list[Record] = field(default_factory=list)
    exploratory: list[Record] = field(default_factory=list)
    environment: dict = field(default_factory=fingerprint)

    @property
    def failures(self) -> list[Record]:
        return [r for r in self.records if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.ok,
            "counts": {"records": len(self.records), "failures": len(self.failures)},
            "records": [r.to_dict() for r in self.records],
            "exploratory": [r.to_dict() for r in self.exploratory],
            "environment": self.environment,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_markdown(self) -> str:
        lines = [
            "# Suite report",
            "",
            f"Result: **{'PASS' if self.ok else 'FAIL'}** "
            f"({len(self.records) - len(self.failures)}/{len(self.records)} assertions passed)",
            "",
            "| name | anchor | residual | tolerance | pass |",
            "|---|---|---|---|---|",
        ]
        for r in self.records:
            lines.append(f"| {r.name} | {r.anchor} | {r.residual:.3e} | {r.tolerance:.3e} | {'yes' if r.passed else 'NO'} |")
        if self.exploratory:
            lines += ["", "## Exploratory (not counted)", "", "| name | anchor | residual | tolerance | within |", "|---|---|---|---|---|"]
            for r in self.exploratory:
                lines.append(f"| {r.name} | {r.anchor} | {r.residual:.3e} | {r.tolerance:.3e} | {'yes' if r.passed else 'no'} |")
        lines += ["", "## Environment", ""]
        lines += [f"- {k}: {v}" for k, v in sorted(self.environment.items())]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path, md_path = out / f"{stem}.json", out / f"{stem}.md"
        json_path.write_text(self.to_json())
        md_path.write_text(self.to_markdown())
        return json_path, md_path
