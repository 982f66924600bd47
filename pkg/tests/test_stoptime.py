from __future__ import annotations

import numpy as np
import pytest

import oracles
from fockstop import fock
from fockstop.model import DomainError, HorizonError, ModelParams, Operator, StateVector, StepFunction, ValidationError
from fockstop.stoptime import (
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

SMALL = ModelParams(n_bins=2, cutoff_N=1)
MID = ModelParams(n_bins=3, cutoff_N=2, init_dim=2)


def test_first_arrival_small_model():
    S = first_arrival(SMALL)
    # basis order |00>, |01>, |10>, |11> with bin 1 as the leading digit
    P1 = oracles.projector_onto(2, 1, 1, [(1, 0), (1, 1)])
    np.testing.assert_array_equal(S.mass(1).matrix, P1)
    np.testing.assert_array_equal(S.mass(2).matrix, np.eye(4) - P1)
    np.testing.assert_array_equal(time_projection_ES(S).matrix, np.diag([1.0, 1.0, 1.0, 0.0]))
    assert validate(S).ok


def test_first_arrival_last_bin():
    S = first_arrival(MID, last_bin=2)
    assert S.latest == 2 and validate(S).ok
    with pytest.raises(HorizonError):
        first_arrival(MID, last_bin=4)


@pytest.mark.parametrize("seed", range(10))
def test_random_stoptime_validates(seed):
    S = random_stoptime(MID, seed)
    report = validate(S)
    assert report.ok, report.residuals
    assert max(report.residuals.values()) <= 1e-12


def test_random_stoptime_is_reproducible():
    a, b = random_stoptime(MID, 7), random_stoptime(MID, 7)
    assert all(np.array_equal(P.matrix, Q.matrix) for (_, P), (_, Q) in zip(a, b))


def test_validate_rejects_broken_stop_times():
    I = Operator.identity(SMALL)
    half = I * 0.5
    assert "projection" in validate(StopTime(SMALL, ((1, half), (2, half)))).failures
    assert "completeness" in validate(StopTime(SMALL, ((1, I), (2, I)))).failures
    assert "orthogonality" in validate(StopTime(SMALL, ((1, I), (2, I)))).failures
    # mass at t_1 that looks at bin 2 is not adapted
    P = Operator(oracles.projector_onto(2, 1, 1, [(0, 1), (1, 1)]), SMALL)
    report = validate(StopTime(SMALL, ((1, P), (2, I - P))))
    assert report.failures == ["adaptedness"]
    with pytest.raises(ValidationError):
        report.raise_if_invalid()
    assert "support" in validate(StopTime(SMALL, ((3, I),))).failures


def test_deterministic_stop_time():
    S = deterministic(MID, 2)
    assert time_projection_ES(S).distance(fock.time_projection_Et(MID, 2)) == 0
    assert stopped_shift(S).distance(fock.shift_Gamma(MID, 2)) == 0
    with pytest.raises(HorizonError):
        deterministic(MID, 0)


@pytest.mark.parametrize("seed", range(5))
def test_ES_algebra(seed):
    S = random_stoptime(MID, seed)
    n = MID.n_bins
    E = [time_projection_ES(S, t) for t in range(n + 1)]
    ES = time_projection_ES(S)
    for s in range(n + 1):
        assert E[s].projection_residual() <= 1e-12
        assert (S.cumulative(s) @ ES).distance(E[s]) <= 1e-12
        for t in range(n + 1):
            assert (E[s] @ E[t]).distance(E[min(s, t)]) <= 1e-12


def test_ES_on_exponential_vectors():
    params = ModelParams(n_bins=3, cutoff_N=2, mult_d=2)
    S = random_stoptime(params, 1)
    f = StepFunction.random(params, np.random.default_rng(0), 0.4)
    lhs = time_projection_ES(S) @ fock.exp_vector(params, f)
    rhs = sum((P @ fock.exp_vector(params, f.head(k))).amplitudes for k, P in S.masses)
    assert np.linalg.norm(lhs.amplitudes - rhs) <= 1e-14


def test_sfg_measure_deterministic_and_vacuum():
    params = ModelParams(n_bins=3, cutoff_N=3)
    rng = np.random.default_rng(2)
    f, g = StepFunction.random(params, rng, 0.2), StepFunction.random(params, rng, 0.2)
    mu = sfg_measure(deterministic(params, 2), f, g)
    pair = np.conj(f.amplitudes[:, 0]) * g.amplitudes[:, 0]
    ef, eg = fock.exp_vector(params, f), fock.exp_vector(params, g)
    assert abs(mu[2] - np.exp(-pair[2]) * ef.inner(eg)) <= 1e-14
    # total mass of S^{f,g} for f = g = 0 is one
    zero = StepFunction.zero(params)
    assert abs(sfg_measure(random_stoptime(params, 3), zero, zero).total() - 1) <= 1e-14
    # for a deterministic time the atom approximates exp(⟨f, g⟩ on bins ≤ k)
    exact = np.exp(pair[:2].sum())
    assert abs(mu[2] - exact) < 1e-4


def test_stop_integral_truncation_and_completeness():
    params = ModelParams(n_bins=3, cutoff_N=2)
    rng = np.random.default_rng(5)
    S = random_stoptime(params, rng)
    f = StepFunction.random(params, rng, 0.3)
    F = AdaptedFamily.random(params, rng)
    full = stop_integral(S, f, F)
    for t in range(4):
        lhs = S.cumulative(t) @ full
        assert np.linalg.norm(lhs.amplitudes - stop_integral(S, f, F, t).amplitudes) <= 1e-14
    ef = fock.exp_vector(params, f)
    whole = stop_integral(S, f, AdaptedFamily.from_function(params, lambda k: ef))
    assert np.linalg.norm(whole.amplitudes - ef.amplitudes) <= 1e-14


def test_adapted_family_lives_on_later_bins():
    params = ModelParams(n_bins=3, cutoff_N=1)
    F = AdaptedFamily.random(params, np.random.default_rng(0))
    for k in range(1, 4):
        assert F[k].shape == (params.bin_dim ** (3 - k),)
        assert abs(np.linalg.norm(F.at(k).amplitudes) - 1) <= 1e-14
    vac = AdaptedFamily.vacuum(params)
    assert all(vac[k][0] == 1 for k in range(1, 4))
    with pytest.raises(DomainError):
        AdaptedFamily(params, (np.ones(4),))


def test_stopped_shift_isometric_on_safe_inputs():
    S = random_stoptime(MID, 4, last_bin=1)
    G = stopped_shift(S).matrix
    B = safe_basis(MID, 1)
    assert np.linalg.norm(B.T @ G.conj().T @ G @ B - np.eye(B.shape[1])) <= 1e-12


def test_strong_markov_is_isometric_and_matches_product_formula():
    params = ModelParams(n_bins=4, cutoff_N=1)
    rng = np.random.default_rng(0)
    S = random_stoptime(params, rng, last_bin=2)
    jS = StrongMarkov(S)
    J, pre, post = jS.matrix()
    assert np.linalg.norm(J.conj().T @ J - np.eye(J.shape[1])) <= 1e-12
    f = StepFunction.random(params, rng, 0.4)
    g = StepFunction.random(params, rng, 0.4, support=2)
    ef, eg = fock.exp_vector(params, f), fock.exp_vector(params, g)
    out = jS(StateVector(jS.E_S.matrix @ ef.amplitudes, params), StateVector(jS.Gamma_S.matrix @ eg.amplitudes, params))
    expected = stop_integral(S, f, AdaptedFamily.shifted(params, eg))
    assert np.linalg.norm(out.amplitudes - expected.amplitudes) <= 1e-13


def test_strong_markov_rejects_inputs_outside_domain():
    params = ModelParams(n_bins=3, cutoff_N=1)
    S = first_arrival(params, last_bin=1)
    jS = StrongMarkov(S)
    bad = StateVector(np.ones(params.fock_dim) / np.sqrt(params.fock_dim), params)
    good = StateVector(jS.E_S.matrix[:, 0], params)
    with pytest.raises(DomainError):
        jS(bad, good)
    with pytest.raises(DomainError):
        jS(good, bad)


def test_shift_stoptime_and_convolution_with_deterministic():
    params = ModelParams(n_bins=4, cutoff_N=1)
    S = random_stoptime(params, 8, last_bin=2)
    shifted = shift_stoptime(S, 2)
    conv = convolve(S, deterministic(params, 2))
    for m in range(1, 5):
        assert conv.mass(m).distance(shifted.mass(m)) <= 1e-12
    with pytest.raises(HorizonError):
        shift_stoptime(first_arrival(params, last_bin=2), 3)
    dd = convolve(deterministic(params, 1), deterministic(params, 3))
    assert dd.mass(4).distance(Operator.identity(params)) == 0


def test_convolution_properties():
    params = ModelParams(n_bins=4, cutoff_N=1)
    rng = np.random.default_rng(9)
    S = random_stoptime(params, rng, last_bin=2)
    T = random_stoptime(params, rng, last_bin=2)
    ST = convolve(S, T)
    assert validate(ST).ok
    B = safe_basis(params, 4)
    G = stopped_shift(ST).matrix @ B - stopped_shift(S).matrix @ stopped_shift(T).matrix @ B
    assert np.linalg.norm(G) <= 1e-12
    res = j_ST_factorization(S, T, rng, samples=5)
    assert max(res.values()) <= 1e-12, res
    with pytest.raises(HorizonError):
        convolve(first_arrival(params, last_bin=2), deterministic(params, 3))


def test_latest_ignores_zero_atoms():
    S = StopTime(MID, ((1, Operator.identity(MID)), (3, Operator.zero(MID))))
    assert S.latest == 1
