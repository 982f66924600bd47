"""JSON round-trips for stop times and cocycles.

Complex matrices are stored as nested ``[re, im]`` pairs.  Only the head
factor of each operator is written: the atom ``Q_k ⊗ I`` of a stop time is
stored as ``Q_k`` and a cocycle entry ``V_{k)} ⊗ Γ(p)`` as ``V_{k)}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cocycle import Cocycle, _from_heads, factor_across
from .model import ModelParams, Operator, ValidationError
from .stoptime import StopTime, _lift


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def decode_matrix(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.ndim < 1 or a.shape[-1] != 2:
        raise ValidationError("matrix entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def head_factor(P: Operator, k: int) -> np.ndarray:
    params = P.params
    h = params.init_dim if P.includes_initial else 1
    left, right = h * params.bin_dim**k, params.bin_dim ** (params.n_bins - k)
    return P.matrix.reshape(left, right, left, right)[:, 0, :, 0]


def stoptime_to_dict(S: StopTime) -> dict:
    return {
        "params": S.params.to_dict(),
        "masses": [{"bin": k, "matrix": encode_matrix(head_factor(P, k))} for k, P in S.masses],
    }


def stoptime_from_dict(data: dict) -> StopTime:
    params = ModelParams(**data["params"])
    masses = []
    for atom in data["masses"]:
        k = int(atom["bin"])
        Q = decode_matrix(atom["matrix"])
        if Q.shape != (params.bin_dim**k,) * 2:
            raise ValidationError(f"atom at bin {k} has shape {Q.shape}")
        masses.append((k, _lift(params, Q, k)))
    return StopTime(params, tuple(masses))


def cocycle_to_dict(V: Cocycle) -> dict:
    entries = []
    for k in range(V.params.n_bins + 1):
        A, _ = factor_across(V[k], k, V.tail_factor(k))
        entries.append({"bin": k, "matrix": encode_matrix(A)})
    return {"params": V.params.to_dict(), "p": encode_matrix(V.p), "entries": entries}


def cocycle_from_dict(data: dict) -> Cocycle:
    params = ModelParams(**data["params"])
    entries = sorted(data["entries"], key=lambda e: int(e["bin"]))
    if [int(e["bin"]) for e in entries] != list(range(params.n_bins + 1)):
        raise ValidationError("cocycle entries must cover bins 0..n")
    heads = [decode_matrix(e["matrix"]) for e in entries]
    return _from_heads(params, decode_matrix(data["p"]), heads)


def dump(obj, path: str | Path) -> None:
    if isinstance(obj, StopTime):
        data = {"kind": "stoptime", **stoptime_to_dict(obj)}
    elif isinstance(obj, Cocycle):
        data = {"kind": "cocycle", **cocycle_to_dict(obj)}
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    Path(path).write_text(json.dumps(data))


def load(path: str | Path):
    data = json.loads(Path(path).read_text())
    kind = data.pop("kind", None)
    if kind == "stoptime":
        return stoptime_from_dict(data)
    if kind == "cocycle":
        return cocycle_from_dict(data)
    raise ValidationError(f"unknown object kind {kind!r}")
