"""Quantum stop times, the CCR flow and stopped cocycles on a truncated, time-binned Fock space."""

from __future__ import annotations

from .cocycle import (
    Cocycle,
    applebaum_suite,
    cocycle_residuals,
    hat,
    interaction_cocycle,
    stop_cocycle,
    stopped_cocycle_relation,
    stopped_norm_residuals,
    vacuum_weyl_cocycle,
    weyl_cocycle,
)
from .fock import (
    adaptedness_check,
    exp_vector,
    is_horizon_safe,
    shift_Gamma,
    time_projection_Et,
    vacuum,
    weyl,
)
from .flow import homomorphism_suite, sigma_S, sigma_t
from .model import (
    AdaptednessError,
    DomainError,
    FockStopError,
    HorizonError,
    ModelParams,
    ModelTooLargeError,
    Operator,
    StateVector,
    StepFunction,
    ValidationError,
)
from .stoptime import (
    AdaptedFamily,
    ComplexMeasure,
    StopTime,
    convolve,
    deterministic,
    first_arrival,
    j_ST_factorization,
    random_stoptime,
    sfg_measure,
    shift_stoptime,
    stop_integral,
    stopped_shift,
    strong_markov_j,
    time_projection_ES,
    validate,
)

__all__ = [
    "AdaptedFamily",
    "AdaptednessError",
    "Cocycle",
    "ComplexMeasure",
    "DomainError",
    "FockStopError",
    "HorizonError",
    "ModelParams",
    "ModelTooLargeError",
    "Operator",
    "StateVector",
    "StepFunction",
    "StopTime",
    "ValidationError",
    "adaptedness_check",
    "applebaum_suite",
    "cocycle_residuals",
    "convolve",
    "deterministic",
    "exp_vector",
    "first_arrival",
    "hat",
    "homomorphism_suite",
    "interaction_cocycle",
    "is_horizon_safe",
    "j_ST_factorization",
    "random_stoptime",
    "sfg_measure",
    "shift_Gamma",
    "shift_stoptime",
    "sigma_S",
    "sigma_t",
    "stop_cocycle",
    "stop_integral",
    "stopped_cocycle_relation",
    "stopped_norm_residuals",
    "stopped_shift",
    "strong_markov_j",
    "time_projection_ES",
    "time_projection_Et",
    "vacuum",
    "vacuum_weyl_cocycle",
    "validate",
    "weyl",
    "weyl_cocycle",
]
