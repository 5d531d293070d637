"""Stochastic entropy production of quantum maps in Kraus form.

Two-point-measurement statistics, fluctuation relations built on the invariant
state of the map, and an analytic thermalizing-qubit model with
non-Markovian (negative-rate) transients.
"""
from .core_math import eig_hermitian, mat_power, relative_entropy, von_neumann_entropy
from .cptp import KrausMap, apply, choi_matrix, invariant_state, to_superoperator, validate
from .errors import EntrofluxError
from .mitigation import necessary_bound, potential_gap_I, scan, sufficient_bound, verify_bound_ordering
from .qubit_thermal import (
    BlochState,
    ConstantRate,
    DampedOscillatoryRate,
    QubitThermalModel,
    TabulatedRate,
    bloch_evolve,
    gamma_integral,
    kraus_at,
    mean_entropy,
    mean_entropy_rate,
    variance_entropy,
    variance_rate,
)
from .reversal import build_potential, classify_kraus, dual_map, time_reverse
from .tpm import MeasuredObservable, TpmResult, moments, run_tpm, verify_fluctuation_relation

__version__ = "0.1.0"
