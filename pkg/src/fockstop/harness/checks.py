"""Suite cells: each draws random instances from a generator and returns records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import fock
from ..cocycle import (
    applebaum_suite,
    cocycle_residuals,
    hat,
    interaction_cocycle,
    random_interaction_unitary,
    stop_cocycle,
    stopped_cocycle_relation,
    stopped_norm_residuals,
    vacuum_weyl_cocycle,
    weyl_cocycle,
)
from ..flow import homomorphism_suite, random_safe_operator, sigma_S, sigma_t
from ..model import ModelParams, Operator, StepFunction
from ..stoptime import (
    AdaptedFamily,
    StopTime,
    StrongMarkov,
    convolve,
    deterministic,
    first_arrival,
    j_ST_factorization,
    random_stoptime,
    safe_basis,
    sfg_measure,
    shift_stoptime,
    stop_integral,
    stopped_shift,
    time_projection_ES,
    validate,
)
from .report import Record
from .truncation import growth_ratio, keyip_residual, projector_algebra_residuals


@dataclass(frozen=True)
class Tolerances:
    """``exact`` for projector algebra, ``strict`` (≤ 1e−12) for the ``E_S`` identities,
    ``algebra`` for products of flowed operators and ``trunc`` where exponential
    vectors meet closed-form exponentials."""

    exact: float
    trunc: float

    @property
    def strict(self) -> float:
        return min(self.exact, 1e-12)

    @property
    def algebra(self) -> float:
        return 10.0 * self.exact

    @property
    def trunc_norm(self) -> float:
        return self.trunc + self.exact


def _int(rng: np.random.Generator, low: int, high: int) -> int:
    """Uniform integer in ``low..high`` inclusive."""
    return int(rng.integers(low, high + 1))


def pvm_distance(A: StopTime, B: StopTime) -> float:
    bins = sorted(set(A.bins) | set(B.bins))
    return max((A.mass(m).distance(B.mass(m)) for m in bins), default=0.0)


def _orthonormality(M: np.ndarray) -> float:
    return float(np.linalg.norm(M.conj().T @ M - np.eye(M.shape[1])))


# ---------------------------------------------------------------------------


def stoptime_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float):
    n = params.n_bins
    S = random_stoptime(params, rng)
    recs = [Record(f"stoptime.validate.{k}", "def:qst", v, tol.exact) for k, v in validate(S).residuals.items()]
    fa = validate(first_arrival(params)).residuals
    recs.append(Record("stoptime.first_arrival.validate", "def:qst", max(fa.values()), tol.exact))

    alg = projector_algebra_residuals(S)
    E_proj = max(time_projection_ES(S, t).projection_residual() for t in range(n + 1))
    recs += [
        Record("stoptime.ES.projection", "thm:expS", E_proj, tol.strict),
        Record("stoptime.ES.product", "thm:expS", alg["expS_product"], tol.strict),
        Record("stoptime.ES.truncation", "thm:expS", alg["expS_truncation"], tol.strict),
    ]

    f = StepFunction.random(params, rng, amp)
    g = StepFunction.random(params, rng, amp)
    F, G = AdaptedFamily.random(params, rng), AdaptedFamily.random(params, rng)
    recs.append(Record("stoptime.keyip", "keyip", keyip_residual(params, S, f, g, F, G), tol.trunc))
    integrals = [stop_integral(S, f, F, t) for t in range(n + 1)]
    keyS = 0.0
    for r in range(n + 1):
        cut = S.cumulative(r)
        for t in range(n + 1):
            keyS = max(keyS, float(np.linalg.norm((cut @ integrals[t]).amplitudes - integrals[min(r, t)].amplitudes)))
    recs.append(Record("stoptime.keyS", "keyS", keyS, tol.trunc))

    ef = fock.exp_vector(params, f)
    whole = stop_integral(S, f, AdaptedFamily.from_function(params, lambda k: ef))
    recs.append(Record("stoptime.vacuum_completeness", "cor:key", float(np.linalg.norm(whole.amplitudes - ef.amplitudes)), tol.trunc))
    zero = StepFunction.zero(params)
    recs.append(Record("stoptime.sfg.vacuum_mass", "lem:key", abs(sfg_measure(S, zero, zero).total() - 1), tol.exact))

    K = _int(rng, 1, n - 1) if n > 1 else 1
    Sk = random_stoptime(params, rng, last_bin=K)
    G_S = stopped_shift(Sk).matrix
    recs.append(Record("stoptime.shift.isometry", "thm:shift", _orthonormality(G_S @ safe_basis(params, K)), tol.trunc))
    vac = G_S[:, 0]
    recs.append(Record("stoptime.shift.vacuum", "thm:shift", abs(np.vdot(vac, vac) - 1), tol.exact))
    return recs, []


def markov_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float):
    n = params.n_bins
    K = _int(rng, 1, n - 1)
    S = random_stoptime(params, rng, last_bin=K) if rng.integers(2) else first_arrival(params, last_bin=K)
    jS = StrongMarkov(S)
    J, pre, post = jS.matrix()
    recs = [Record("markov.isometry", "thm:isom", _orthonormality(J), tol.trunc)]

    f = StepFunction.random(params, rng, amp)
    g = StepFunction.random(params, rng, amp, support=n - K)
    ef, eg = fock.exp_vector(params, f), fock.exp_vector(params, g)
    F = AdaptedFamily.shifted(params, eg)
    worst = 0.0
    for t in range(n + 1):
        lhs = jS.apply_preimage(time_projection_ES(S, t).matrix @ ef.amplitudes, eg.amplitudes)
        worst = max(worst, float(np.linalg.norm(lhs - stop_integral(S, f, F, t).amplitudes)))
    recs.append(Record("markov.exp_vector_formula", "thm:isom", worst, tol.trunc))

    u = jS.E_S.matrix @ ef.amplitudes
    w = jS.Gamma_S.matrix @ eg.amplitudes
    out = jS.apply_preimage(u, eg.amplitudes)
    recs.append(Record("markov.product_norm", "thm:isom", abs(np.linalg.norm(out) - np.linalg.norm(u) * np.linalg.norm(w)), tol.trunc))
    recs.append(Record("markov.shift_isometry", "thm:shift", _orthonormality(jS.Gamma_S.matrix @ post), tol.trunc))
    return recs, []


def convolution_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float):
    n = params.n_bins
    a = _int(rng, 1, n - 1)
    S = random_stoptime(params, rng, last_bin=a)
    T = random_stoptime(params, rng, last_bin=n - a)
    ST = convolve(S, T)
    recs = [Record("convolution.validate", "thm:SstarT", max(validate(ST).residuals.values()), tol.exact)]

    j = n - S.latest
    recs.append(Record("convolution.deterministic_shift", "thm:SstarT", pvm_distance(convolve(S, deterministic(params, j)), shift_stoptime(S, j)), tol.exact))
    k1 = _int(rng, 1, n - 1)
    dd = convolve(deterministic(params, k1), deterministic(params, n - k1))
    recs.append(Record("convolution.deterministic_pair", "thm:SstarT", pvm_distance(dd, deterministic(params, n)), tol.exact))

    f = StepFunction.random(params, rng, amp)
    ef = fock.exp_vector(params, f).amplitudes
    E_T = time_projection_ES(T).matrix
    rhs = np.zeros_like(ef)
    for k, P in S.masses:
        Gk = fock.shift_Gamma(params, k).matrix
        head = fock.head_part(params, fock.exp_vector(params, f.head(k)).amplitudes, k)
        tail = fock.tail_part(params, Gk @ E_T @ Gk.conj().T @ ef, k)
        rhs += P.matrix @ np.kron(head, tail)
    lhs = time_projection_ES(ST).matrix @ ef
    recs.append(Record("convolution.ES_exp_vector", "thm:SstarT", float(np.linalg.norm(lhs - rhs)), tol.trunc))

    res = j_ST_factorization(S, T, rng, samples=10)
    recs += [
        Record("convolution.jST.isometry", "thm:SstarTiso", res["isometry"], tol.trunc),
        Record("convolution.jST.factorisation", "thm:SstarTiso", res["factorisation"], tol.trunc),
        Record("convolution.jST.pre_range", "SstarT1", res["pre_range"], tol.trunc),
        Record("convolution.jST.post_identity", "SstarT2", res["post_identity"], tol.trunc),
        Record("convolution.jST.post_range", "SstarT2", res["post_range"], tol.trunc),
        Record("convolution.gamma_product", "thm:SstarTiso", res["gamma"], tol.exact),
    ]

    exploratory = []
    if n >= 3:
        A = random_stoptime(params, rng, last_bin=1)
        B = random_stoptime(params, rng, last_bin=1)
        C = random_stoptime(params, rng, last_bin=n - 2)
        gap = pvm_distance(convolve(convolve(A, B), C), convolve(A, convolve(B, C)))
        exploratory.append(Record("convolution.associativity", "thm:SstarT", gap, tol.exact))
    return recs, exploratory


def flow_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float):
    n = params.n_bins
    K = _int(rng, 1, n - 1)
    S = random_stoptime(params, rng, last_bin=K)
    free = n - K
    X, Y = random_safe_operator(params, rng, free), random_safe_operator(params, rng, free)
    I = Operator.identity(params)
    sX, sY = sigma_S(S, X), sigma_S(S, Y)
    recs = [
        Record("flow.unital", "thm:flowstop", sigma_S(S, I).distance(I), tol.algebra),
        Record("flow.multiplicative", "thm:flowstop", sigma_S(S, X @ Y).distance(sX @ sY), tol.algebra),
        Record("flow.adjoint", "thm:flowstop", sigma_S(S, X.dag()).distance(sX.dag()), tol.algebra),
    ]
    Xi = random_safe_operator(params, rng, free, includes_initial=True)
    Yi = random_safe_operator(params, rng, free, includes_initial=True)
    recs.append(Record("flow.multiplicative_initial", "thm:flowstop", sigma_S(S, Xi @ Yi).distance(sigma_S(S, Xi) @ sigma_S(S, Yi)), tol.algebra))

    B = safe_basis(params, K)
    G_S = stopped_shift(S).matrix
    recs.append(Record("flow.stopped_shift", "flowgamma", float(np.linalg.norm((sX.matrix @ G_S - G_S @ X.matrix) @ B)), tol.algebra))
    E0 = fock.time_projection_Et(params, 0)
    recs.append(Record("flow.vacuum_projection", "thm:addt", sigma_S(S, E0).distance(time_projection_ES(S)), tol.algebra))

    J, pre, post = StrongMarkov(S).matrix()
    inner = post.conj().T @ X.matrix @ post
    recs.append(Record("flow.strong_markov_conjugation", "prp:sigmagamma", float(np.linalg.norm(sX.matrix @ J - J @ np.kron(np.eye(pre.shape[1]), inner))), tol.trunc))

    a = _int(rng, 0, n - 1)
    b = _int(rng, 1, n - a)
    Z = random_safe_operator(params, rng, n - a - b)
    recs.append(Record("flow.semigroup", "def:ccrflow", sigma_t(params, a, sigma_t(params, b, Z)).distance(sigma_t(params, a + b, Z)), tol.algebra))
    worst = 0.0
    for s in range(n + 1):
        for t in range(n + 1 - s):
            Et = fock.time_projection_Et(params, t)
            worst = max(worst, sigma_t(params, s, Et).distance(fock.time_projection_Et(params, s + t)))
    recs.append(Record("flow.time_projection_shift", "def:ccrflow", worst, tol.exact))

    jb = _int(rng, 1, n - 1)
    W = random_safe_operator(params, rng, n - jb)
    Gj = fock.shift_Gamma(params, jb).matrix
    sW = sigma_t(params, jb, W)
    recs.append(Record("flow.shift_intertwining", "def:ccrflow", float(np.linalg.norm((sW.matrix @ Gj - Gj @ W.matrix) @ safe_basis(params, jb))), tol.algebra))
    recs.append(Record("flow.range", "def:ccrflow", max(fock.bin_commutant_residual(sW, i) for i in range(1, jb + 1)), tol.algebra))

    c = _int(rng, 1, n - 1)
    S2 = random_stoptime(params, rng, last_bin=c)
    T2 = random_stoptime(params, rng, last_bin=_int(rng, 1, n - c))
    hom = homomorphism_suite(S2, T2, rng, samples=3)
    recs.append(Record("flow.convolution_composition", "thm:addt", hom["composition"], tol.algebra))
    recs.append(Record("flow.convolution_time_projection", "thm:addt", hom["time_projection"], tol.exact))
    return recs, []


def _random_c(params: ModelParams, rng: np.random.Generator, amp: float) -> np.ndarray:
    """Multiplicity vector whose per-bin amplitude ``‖c‖√Δ`` is at most ``amp``."""
    raw = rng.normal(size=params.mult_d) + 1j * rng.normal(size=params.mult_d)
    radius = amp * rng.uniform(0.5, 1.0) / math.sqrt(params.bin_width)
    return raw / np.linalg.norm(raw) * radius


def _cocycle_records(prefix: str, res: dict, tol: Tolerances) -> list[Record]:
    anchors = {"p_adapted": "padapt", "cocycle": "defcocycle", "isometric": "eg:weylcocycle", "vstar_v": "padapt", "local_products": "lem:uni"}
    return [Record(f"{prefix}.{k}", anchors[k], v, tol.trunc) for k, v in res.items()]


def cocycle_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float):
    n = params.n_bins
    c = _random_c(params, rng, amp)
    W = weyl_cocycle(params, c)
    V = vacuum_weyl_cocycle(params, c)
    recs = _cocycle_records("cocycle.weyl", cocycle_residuals(W), tol)
    recs += _cocycle_records("cocycle.vacuum_weyl", cocycle_residuals(V), tol)

    full = fock.weyl(params, StepFunction.constant(params, c), includes_initial=True)
    recs.append(Record("cocycle.weyl.final_entry", "eg:weylcocycle", W[n].distance(full), tol.exact))
    compress = max((fock.time_projection_Et(params, k, True) @ V[k] @ fock.time_projection_Et(params, k, True)).distance(V[k]) for k in range(n + 1))
    recs.append(Record("cocycle.vacuum_weyl.compression", "eg:weylcocycle", compress, tol.exact))
    recs.append(Record("cocycle.vacuum_weyl.hat", "eg:weylcocycle", max(hat(V, k).distance(W[k]) for k in range(n + 1)), tol.trunc))

    S = first_arrival(params) if rng.integers(2) else random_stoptime(params, rng)
    wn = stopped_norm_residuals(W, S, rng)
    vn = stopped_norm_residuals(V, S, rng)
    recs += [
        Record("cocycle.stopped.contraction", "lem:uni", max(wn["contraction"], vn["contraction"]), tol.trunc_norm),
        Record("cocycle.stopped.cauchy", "thm:stopcocycle", max(wn["cauchy"], vn["cauchy"]), tol.trunc_norm),
        Record("cocycle.stopped.range", "lem:uni", max(wn["range"], vn["range"]), tol.trunc_norm),
        Record("cocycle.stopped.identity_norm", "prp:inorm", wn["identity_norm"], tol.trunc_norm),
        Record("cocycle.stopped.vacuum_norm", "prp:vnorm", vn["vacuum_norm"], tol.trunc_norm),
        Record("cocycle.stopped.vacuum_range", "prp:vnorm", vn["vacuum_range"], tol.trunc_norm),
        Record("cocycle.stopped.isometry", "prp:inorm", stop_cocycle(W, S).isometry_residual(), tol.trunc),
    ]
    one = weyl_cocycle(params, np.zeros(params.mult_d))
    recs.append(Record("cocycle.stopped.identity_cocycle", "thm:stopcocycle", stop_cocycle(one, S).distance(Operator.identity(params, True)), tol.exact))
    k = _int(rng, 1, n)
    recs.append(Record("cocycle.stopped.deterministic", "thm:stopcocycle", stop_cocycle(W, deterministic(params, k)).distance(W[k]), tol.exact))
    return recs, []


APPLEBAUM_ANCHORS = {"a": "appstop", "b": "apploc", "c": "appdet", "d": "thm:cocyclerel", "e": "thm:cocyclerel"}


def random_cocycle(params: ModelParams, rng: np.random.Generator, amp: float):
    kind = int(rng.integers(4))
    p = np.eye(params.mult_d) if kind % 2 == 0 else np.zeros((params.mult_d, params.mult_d))
    if kind < 2:
        return weyl_cocycle(params, _random_c(params, rng, amp), p)
    return interaction_cocycle(params, random_interaction_unitary(params, rng), p)


def applebaum_cell(params: ModelParams, rng: np.random.Generator, tol: Tolerances, amp: float, trials: int = 4):
    n = params.n_bins
    worst = {"relation": 0.0}
    for _ in range(trials):
        V = random_cocycle(params, rng, amp)
        j = _int(rng, 1, n - 1)
        K = _int(rng, 1, n - j)
        S = random_stoptime(params, rng, last_bin=K) if rng.integers(2) else first_arrival(params, last_bin=K)
        worst["relation"] = max(worst["relation"], stopped_cocycle_relation(V, S, j))
        for key, value in applebaum_suite(V, S, j, rng).items():
            worst[key] = max(worst.get(key, 0.0), value)
    recs = [Record("applebaum.stopped_cocycle", "thm:cocyclerel", worst.pop("relation"), tol.trunc)]
    recs += [Record(f"applebaum.{k}", APPLEBAUM_ANCHORS[k], v, tol.trunc) for k, v in sorted(worst.items())]
    return recs, []


CONVERGENCE_ANCHORS = {
    "exp_inner": "lem:key",
    "keyip": "keyip",
    "weyl_overlap": "eg:weylcocycle",
    "weyl_action": "eg:weylcocycle",
    "weyl_shift": "eg:weylcocycle",
}


def convergence_records(rows: list[dict], tol: Tolerances) -> list[Record]:
    """Growth ratios along each cutoff sweep and the dyadic-refinement residuals."""
    recs = []
    for n in sorted({r["n_bins"] for r in rows}):
        for identity, anchor in CONVERGENCE_ANCHORS.items():
            sweep = sorted((r["cutoff_N"], r["residual"]) for r in rows if r["n_bins"] == n and r["identity"] == identity)
            if len(sweep) > 1:
                ratio = growth_ratio([v for _, v in sweep])
                recs.append(Record(f"convergence.{identity}.n{n}", anchor, ratio, 2.0))
    refined = [r["residual"] for r in rows if r["identity"].startswith("refined_")]
    if refined:
        recs.append(Record("convergence.dyadic_refinement", "thm:expS", max(refined), min(tol.strict, 1e-12)))
    return recs
