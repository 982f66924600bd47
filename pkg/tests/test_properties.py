"""Property-based checks over small random models."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fockstop import fock
from fockstop.cocycle import cocycle_residuals, weyl_cocycle
from fockstop.flow import random_safe_operator, sigma_S
from fockstop.model import ModelParams, StepFunction
from fockstop.stoptime import convolve, random_stoptime, time_projection_ES, validate

models = st.builds(
    ModelParams,
    n_bins=st.integers(2, 3),
    cutoff_N=st.integers(1, 2),
    mult_d=st.integers(1, 2),
    init_dim=st.just(1),
)
seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(models, seeds)
def test_random_stop_times_are_valid(params, seed):
    S = random_stoptime(params, seed)
    assert validate(S, tol=1e-10).ok
    n = params.n_bins
    E = [time_projection_ES(S, t) for t in range(n + 1)]
    for s in range(n + 1):
        for t in range(n + 1):
            assert (E[s] @ E[t]).distance(E[min(s, t)]) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(models, st.integers(0, 3), seeds)
def test_shift_matches_oracle(params, j, seed):
    j = min(j, params.n_bins)
    G = fock.shift_Gamma(params, j).matrix
    assert np.array_equal(G, oracles.shift(params.n_bins, params.cutoff_N, params.mult_d, j))


@settings(max_examples=20, deadline=None)
@given(models, seeds, st.floats(0.0, 0.6))
def test_exp_vector_matches_oracle(params, seed, amp):
    f = StepFunction.random(params, np.random.default_rng(seed), amp)
    expected = oracles.exp_vector(f.amplitudes, params.cutoff_N)
    assert np.allclose(fock.exp_vector(params, f).amplitudes, expected, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_convolution_is_a_stop_time_and_flow_composes(seed):
    params = ModelParams(n_bins=3, cutoff_N=1)
    rng = np.random.default_rng(seed)
    S = random_stoptime(params, rng, last_bin=1)
    T = random_stoptime(params, rng, last_bin=1)
    ST = convolve(S, T)
    assert validate(ST).ok
    X = random_safe_operator(params, rng, 1)
    assert sigma_S(ST, X).distance(sigma_S(S, sigma_S(T, X))) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=0.3, allow_nan=False, allow_infinity=False))
def test_weyl_cocycle_invariants(c):
    params = ModelParams(n_bins=2, cutoff_N=2, init_dim=2)
    res = cocycle_residuals(weyl_cocycle(params, np.array([c])))
    assert max(res.values()) <= 1e-12
