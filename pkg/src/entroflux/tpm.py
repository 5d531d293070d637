"""Two-point-measurement statistics of the stochastic entropy production.

Tables are indexed ``[k, m]`` for the forward protocol (final outcome ``k``,
initial outcome ``m``) and ``[m, k]`` for the backward one. In entropy tables a
cell holds ``nan`` when the forward probability vanishes (the trajectory never
occurs and is excluded from statistics) and ``+inf`` when the forward
probability is positive but the backward one vanishes (absolute
irreversibility).
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core_math import (
    as_matrix,
    check_density,
    eig_hermitian,
    relative_entropy,
    von_neumann_entropy,
)
from .cptp import KrausMap, apply_raw, invariant_state
from .errors import AbsoluteIrreversibility, DimensionMismatch, NotRankOne, UndefinedCells
from .reversal import (
    build_potential,
    check_observable_compatibility,
    check_projector_set,
    classify_kraus,
    dual_map,
    outcome_potentials,
    time_reverse,
    TOL_CLASSIFY,
)

EPS_PROB = 1e-12


@dataclass(frozen=True)
class MeasuredObservable:
    projectors: tuple
    outcome_labels: tuple

    def __init__(self, projectors: Sequence, outcome_labels: Optional[Sequence] = None):
        mats = [as_matrix(p) for p in projectors]
        for p in mats:
            if abs(np.trace(p) - 1) > 1e-9:
                raise NotRankOne(f"projector of trace {np.trace(p).real:.6g}; only rank-1 outcomes are supported")
        ps = check_projector_set(mats)
        if outcome_labels is None:
            outcome_labels = range(len(ps))
        labels = tuple(float(a) for a in outcome_labels)
        if len(labels) != len(ps):
            raise NotRankOne("one outcome label per projector is required")
        object.__setattr__(self, "projectors", tuple(ps))
        object.__setattr__(self, "outcome_labels", labels)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @classmethod
    def from_basis(cls, vectors, labels=None) -> "MeasuredObservable":
        """Projectors onto the columns of a unitary matrix."""
        u = as_matrix(vectors)
        return cls([np.outer(u[:, j], u[:, j].conj()) for j in range(u.shape[1])], labels)

    @classmethod
    def from_hermitian(cls, obs) -> "MeasuredObservable":
        w, v = eig_hermitian(obs)
        if np.any(np.diff(w) < 1e-9):
            raise NotRankOne("observable has a degenerate spectrum")
        return cls.from_basis(v, w)

    def operator(self) -> np.ndarray:
        return sum(a * p for a, p in zip(self.outcome_labels, self.projectors))


def sigma_z_basis() -> MeasuredObservable:
    return MeasuredObservable.from_basis(np.eye(2), [1.0, -1.0])


def sigma_x_basis() -> MeasuredObservable:
    s = 1 / np.sqrt(2)
    return MeasuredObservable.from_basis([[s, s], [s, -s]], [1.0, -1.0])


def computational_basis(dim: int) -> MeasuredObservable:
    return MeasuredObservable.from_basis(np.eye(dim))


def _tr(a: np.ndarray) -> float:
    return float(np.trace(a).real)


def run_forward(rho0, kmap: KrausMap, obs_in: MeasuredObservable, obs_fin: MeasuredObservable):
    """Return ``(p_forward, p_in, p_fin)``."""
    rho0 = check_density(rho0)
    d = kmap.dim
    if rho0.shape[0] != d or obs_in.dim != d or obs_fin.dim != d:
        raise DimensionMismatch("state, map and observables must share one dimension")
    p_in = np.array([_tr(rho0 @ p) for p in obs_in.projectors])
    p_fwd = np.empty((len(obs_fin.projectors), len(obs_in.projectors)))
    for m, pm in enumerate(obs_in.projectors):
        out = apply_raw(kmap, pm @ rho0 @ pm)
        for k, pk in enumerate(obs_fin.projectors):
            p_fwd[k, m] = _tr(pk @ out)
    rho_in = sum(p * pm for p, pm in zip(p_in, obs_in.projectors))
    rho_tau = apply_raw(kmap, rho_in)
    p_fin = np.array([_tr(rho_tau @ pk) for pk in obs_fin.projectors])
    return p_fwd, p_in, p_fin


def run_backward(
    kmap: KrausMap,
    pi,
    obs_in: MeasuredObservable,
    obs_fin: MeasuredObservable,
    p_fin,
    dual: Optional[KrausMap] = None,
) -> np.ndarray:
    """``p_backward[m, k] = Tr[Pi~_m dual(Pi~_k)] p_fin[k]`` with ``Pi~ = Theta Pi Theta^dag``.

    ``dual`` may be supplied to bypass the construction from ``pi``.
    """
    p_fin = np.asarray(p_fin, dtype=float)
    if abs(p_fin.sum() - 1) > 1e-10 or np.any(p_fin < -EPS_PROB):
        raise ValueError("p_fin is not a probability vector")
    if dual is None:
        dual = dual_map(kmap, pi)
    rev_in = [time_reverse(p) for p in obs_in.projectors]
    rev_fin = [time_reverse(p) for p in obs_fin.projectors]
    p_bwd = np.empty((len(rev_in), len(rev_fin)))
    for k, pk in enumerate(rev_fin):
        out = apply_raw(dual, pk)
        for m, pm in enumerate(rev_in):
            p_bwd[m, k] = _tr(pm @ out) * p_fin[k]
    return p_bwd


def stochastic_entropy_table(p_forward, p_backward) -> np.ndarray:
    """``ln p_F[k, m] - ln p_B[m, k]`` with ``nan``/``+inf`` markers (see module doc)."""
    pf = np.asarray(p_forward, dtype=float)
    pb = np.asarray(p_backward, dtype=float).T
    if pf.shape != pb.shape:
        raise ValueError(f"shape mismatch {pf.shape} vs {pb.shape[::-1]}")
    out = np.full(pf.shape, np.nan)
    fwd = pf > EPS_PROB
    bwd = pb > EPS_PROB
    both = fwd & bwd
    out[both] = np.log(pf[both]) - np.log(pb[both])
    out[fwd & ~bwd] = np.inf
    return out


def closed_form_entropy_table(p_in, p_fin, phi_in, phi_fin) -> np.ndarray:
    """``ln p_in[m] - ln p_fin[k] - (phi_fin[k] - phi_in[m])``.

    ``phi_in``/``phi_fin`` are the potential values of the measured outcomes
    (see :func:`entroflux.reversal.outcome_potentials`). Cells with
    ``p_in[m] <= 1e-12`` are ``nan``.
    """
    p_in = np.asarray(p_in, dtype=float)
    p_fin = np.asarray(p_fin, dtype=float)
    phi_in = np.asarray(phi_in, dtype=float)
    phi_fin = np.asarray(phi_fin, dtype=float)
    out = np.full((p_fin.size, p_in.size), np.nan)
    ok_m = p_in > EPS_PROB
    ok_k = p_fin > EPS_PROB
    ln_in = np.log(np.where(ok_m, p_in, 1.0))
    ln_fin = np.log(np.where(ok_k, p_fin, 1.0))
    table = ln_in[None, :] - ln_fin[:, None] - (phi_fin[:, None] - phi_in[None, :])
    ok = ok_k[:, None] & ok_m[None, :]
    out[ok] = table[ok]
    return out


@dataclass(frozen=True)
class TpmResult:
    p_forward: np.ndarray  # [k, m]
    p_backward: np.ndarray  # [m, k]
    delta_sigma: np.ndarray  # direct ln(p_F / p_B), [k, m]
    p_in: np.ndarray
    p_fin: np.ndarray
    phi_in: np.ndarray = field(default=None)
    phi_fin: np.ndarray = field(default=None)
    delta_sigma_closed: Optional[np.ndarray] = None
    assumption_i: Optional[bool] = None
    assumption_ii: Optional[bool] = None

    @property
    def undefined(self) -> np.ndarray:
        return np.isnan(self.delta_sigma)

    @property
    def absolutely_irreversible(self) -> np.ndarray:
        return np.isinf(self.delta_sigma)

    def __eq__(self, other):
        if not isinstance(other, TpmResult):
            return NotImplemented
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b, equal_nan=True):
                    return False
            elif a != b:
                return False
        return True


def run_tpm(
    rho0,
    kmap: KrausMap,
    obs_in: MeasuredObservable,
    obs_fin: Optional[MeasuredObservable] = None,
    pi=None,
    tol: float = TOL_CLASSIFY,
) -> TpmResult:
    """Full forward/backward pipeline plus the closed-form table when it applies."""
    obs_fin = obs_in if obs_fin is None else obs_fin
    if pi is None:
        pi = invariant_state(kmap)
    pot = build_potential(pi)
    p_fwd, p_in, p_fin = run_forward(rho0, kmap, obs_in, obs_fin)
    p_bwd = run_backward(kmap, pot.pi, obs_in, obs_fin, p_fin)
    direct = stochastic_entropy_table(p_fwd, p_bwd)

    ass_i = classify_kraus(kmap, pot, tol).satisfies_assumption_i
    ass_ii = check_observable_compatibility(obs_in.projectors, pot) and check_observable_compatibility(
        obs_fin.projectors, pot
    )
    phi_in = outcome_potentials(obs_in.projectors, pot, strict=False)
    phi_fin = outcome_potentials(obs_fin.projectors, pot, strict=False)
    closed = closed_form_entropy_table(p_in, p_fin, phi_in, phi_fin) if (ass_i and ass_ii) else None
    return TpmResult(
        p_forward=p_fwd,
        p_backward=p_bwd,
        delta_sigma=direct,
        p_in=p_in,
        p_fin=p_fin,
        phi_in=phi_in,
        phi_fin=phi_fin,
        delta_sigma_closed=closed,
        assumption_i=ass_i,
        assumption_ii=ass_ii,
    )


class FluctuationCheck(NamedTuple):
    max_residual: float
    integral_residual: float


def verify_fluctuation_relation(result: TpmResult) -> FluctuationCheck:
    """Residual of ``p_F[k, m] = exp(dsigma[k, m]) p_B[m, k]`` over defined cells.

    ``dsigma`` is the closed-form table. When the assumptions behind it fail the
    same formula is evaluated with the nominal outcome potentials, so the
    residual measures the violation instead of raising. The second number is
    ``|sum p_F exp(-dsigma) - 1|``; it equals the backward weight carried by
    trajectories with zero forward probability, so it vanishes only when the
    initial populations are all positive.
    """
    if np.any(result.absolutely_irreversible):
        raise AbsoluteIrreversibility("forward-possible trajectories with zero backward weight")
    table = result.delta_sigma_closed
    if table is None:
        if result.phi_in is None or result.phi_fin is None:
            raise UndefinedCells("result carries no potential values")
        table = closed_form_entropy_table(result.p_in, result.p_fin, result.phi_in, result.phi_fin)
    ok = np.isfinite(table)
    if not np.any(ok):
        raise UndefinedCells("no defined cells")
    pf = result.p_forward
    pb = result.p_backward.T
    resid = np.abs(pf[ok] - np.exp(table[ok]) * pb[ok])
    integral = abs(float(np.sum(pf[ok] * np.exp(-table[ok]))) - 1.0)
    return FluctuationCheck(float(resid.max()), integral)


def moments(result: TpmResult, order: int = 2) -> list:
    """Raw moments ``<dsigma^n>``, ``n = 1..order``, over the forward distribution."""
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    pf = result.p_forward
    live = pf > EPS_PROB
    ds = result.delta_sigma
    if not np.all(np.isfinite(ds[live])):
        raise UndefinedCells("entropy production undefined on a trajectory with positive weight")
    w = pf[live]
    x = ds[live]
    return [float(np.sum(w * x**n)) for n in range(1, order + 1)]


def variance(result: TpmResult) -> float:
    m1, m2 = moments(result, 2)
    return m2 - m1 * m1


def tpm_states(rho0, kmap: KrausMap, obs_in: MeasuredObservable, obs_fin: MeasuredObservable):
    """``(rho_in, rho_tau, rho_fin)`` of the forward protocol."""
    rho0 = check_density(rho0)
    rho_in = sum(_tr(rho0 @ p) * p for p in obs_in.projectors)
    rho_tau = apply_raw(kmap, rho_in)
    rho_fin = sum(_tr(rho_tau @ p) * p for p in obs_fin.projectors)
    return rho_in, rho_tau, rho_fin


def average_via_relative_entropies(rho_in, rho_tau, rho_fin, pi) -> float:
    """``S(rho_tau||rho_fin) + S(rho_in||pi) - S(rho_tau||pi)``."""
    return (
        relative_entropy(rho_tau, rho_fin)
        + relative_entropy(rho_in, pi)
        - relative_entropy(rho_tau, pi)
    )


class ThermalDecomposition(NamedTuple):
    measurement_term: float  # S(rho_tau || rho_fin)
    entropy_change: float  # S(rho_tau) - S(rho_in)
    entropy_flux: float  # -beta Tr[H (rho_tau - rho_in)]
    total: float


def thermal_decomposition(rho_in, rho_tau, rho_fin, hamiltonian, beta: float) -> ThermalDecomposition:
    """Split the mean entropy production for a Gibbs invariant state."""
    h = as_matrix(hamiltonian)
    meas = relative_entropy(rho_tau, rho_fin)
    ds = von_neumann_entropy(rho_tau) - von_neumann_entropy(rho_in)
    flux = -beta * _tr(h @ (np.asarray(rho_tau) - np.asarray(rho_in)))
    return ThermalDecomposition(meas, ds, flux, meas + ds + flux)
