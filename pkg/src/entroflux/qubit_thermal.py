"""Thermalizing qubit with a time-dependent (possibly negative) decay rate.

The generator has Hamiltonian ``H = (omega/2) sigma_z``, emission rate
``gamma(t) e^{beta omega}`` on ``sigma^-`` and absorption rate ``gamma(t)`` on
``sigma^+``. Everything closed-form is driven by the integrated rate

    Gamma(t) = (1 + e^{beta omega}) / 2 * int_0^t gamma(s) ds

and by ``z_inf = -tanh(beta omega / 2)``. Basis convention: ``|0>`` is the
``sigma_z = +1`` (excited) state, ``sigma^+ = |0><1|``. Units: hbar = k_B = 1,
time in ``1/omega``.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .core_math import check_density
from .cptp import KrausMap
from .errors import (
    DegenerateEigenvector,
    NegativeIntegratedRate,
    QuadratureFailure,
    SingularAtPureState,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
PAULIS = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)

PURE_STATE_TOL = 1e-12


# ---------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True)
class ConstantRate:
    gamma0: float = 1.0
    kind = "constant"

    def __call__(self, t: float) -> float:
        return float(self.gamma0)

    def integral(self, t: float) -> float:
        return float(self.gamma0) * t

    @property
    def long_time_limit(self) -> float:
        return float(self.gamma0)


@dataclass(frozen=True)
class DampedOscillatoryRate:
    """``gamma0 * (1 - amplitude * exp(-t / decay_time) * sin(frequency * t))``.

    ``amplitude > 1`` opens windows of negative rate early on, while the damping
    restores a positive long-time limit ``gamma0``.
    """

    gamma0: float = 1.0
    amplitude: float = 1.5
    frequency: float = 5.0
    decay_time: float = 2.0
    kind = "damped"

    def __call__(self, t: float) -> float:
        return self.gamma0 * (1.0 - self.amplitude * math.exp(-t / self.decay_time) * math.sin(self.frequency * t))

    def integral(self, t: float) -> float:
        k = 1.0 / self.decay_time
        nu = self.frequency
        # int_0^t e^{-k s} sin(nu s) ds
        osc = (nu - math.exp(-k * t) * (k * math.sin(nu * t) + nu * math.cos(nu * t))) / (k * k + nu * nu)
        return self.gamma0 * (t - self.amplitude * osc)

    @property
    def long_time_limit(self) -> float:
        return float(self.gamma0)


@dataclass(frozen=True)
class TabulatedRate:
    """Piecewise-linear rate through ``(t, gamma)`` samples, flat beyond the ends."""

    times: tuple
    values: tuple
    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise ValueError("need at least two (t, gamma) samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(g))):
            raise ValueError("tabulated rate has non-finite entries")
        if g[-1] <= 0:
            raise ValueError("long-time limit of the rate must be positive")
        object.__setattr__(self, "times", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(g.tolist()))

    @classmethod
    def from_csv(cls, path) -> "TabulatedRate":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            return cls(tuple(float(r["t"]) for r in rows), tuple(float(r["gamma"]) for r in rows))
        except KeyError as exc:
            raise ValueError("rate CSV needs columns 't' and 'gamma'") from exc

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def integral(self, t: float, tol: float = 1e-10) -> float:
        if t == 0:
            return 0.0
        nodes = [x for x in self.times if 0 < x < t]
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    self, 0.0, t, points=nodes or None, limit=len(nodes) + 100, epsabs=tol, epsrel=0.0
                )
            except integrate.IntegrationWarning as exc:
                raise QuadratureFailure(str(exc)) from exc
        if err > tol:
            raise QuadratureFailure(f"quadrature error estimate {err:.2e} above {tol:g}")
        return float(val)

    @property
    def long_time_limit(self) -> float:
        return self.values[-1]


RateFunction = Union[ConstantRate, DampedOscillatoryRate, TabulatedRate]


# ---------------------------------------------------------------------------
# model and Bloch dynamics


class BlochState(NamedTuple):
    x: float
    y: float
    z: float

    def check(self) -> "BlochState":
        if self.x**2 + self.y**2 + self.z**2 > 1 + 1e-12:
            raise ValueError(f"Bloch vector {tuple(self)} lies outside the unit ball")
        return self

    def to_density(self) -> np.ndarray:
        return 0.5 * (PAULIS[0] + self.x * SIGMA_X + self.y * SIGMA_Y + self.z * SIGMA_Z)

    @classmethod
    def from_density(cls, rho) -> "BlochState":
        rho = check_density(rho)
        return cls(*(float(np.trace(rho @ s).real) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)))


@dataclass(frozen=True)
class QubitThermalModel:
    beta: float
    omega: float = 1.0
    rate: RateFunction = field(default_factory=DampedOscillatoryRate)

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if not self.rate.long_time_limit > 0:
            raise ValueError("rate must have a positive long-time limit")

    @property
    def beta_omega(self) -> float:
        return self.beta * self.omega

    @property
    def z_inf(self) -> float:
        return -math.tanh(self.beta_omega / 2)

    @property
    def prefactor(self) -> float:
        return 0.5 * (1.0 + math.exp(self.beta_omega))

    @property
    def hamiltonian(self) -> np.ndarray:
        return 0.5 * self.omega * SIGMA_Z

    def invariant_state(self) -> np.ndarray:
        zi = self.z_inf
        return np.diag([(1 + zi) / 2, (1 - zi) / 2]).astype(complex)

    def gamma(self, t: float) -> float:
        return self.rate(t)

    def gamma_rate(self, t: float) -> float:
        """Time derivative of the integrated rate."""
        return self.prefactor * self.rate(t)


def gamma_integral(model: QubitThermalModel, t: float) -> float:
    """Integrated decay rate; may decrease where the rate is negative."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return model.prefactor * model.rate.integral(t)


def bloch_from_gamma(r0, z_inf: float, big_gamma: float, omega_t: float) -> BlochState:
    x0, y0, z0 = r0
    c = math.exp(-big_gamma)
    xy = c * complex(math.cos(omega_t), math.sin(omega_t)) * complex(x0, y0)
    e2 = math.exp(-2 * big_gamma)
    z = e2 * (z0 - z_inf) + z_inf
    return BlochState(xy.real, xy.imag, z)


def bloch_evolve(model: QubitThermalModel, r0, t: float) -> BlochState:
    r0 = BlochState(*r0).check()
    return bloch_from_gamma(r0, model.z_inf, gamma_integral(model, t), model.omega * t).check()


def bloch_superoperator(z_inf: float, big_gamma: float, omega_t: float) -> np.ndarray:
    """Column-stacking superoperator of the Bloch solution, extended linearly."""
    c = math.exp(-big_gamma)
    plus = c * np.exp(1j * omega_t)
    minus = c * np.exp(-1j * omega_t)
    e2 = math.exp(-2 * big_gamma)
    cols = []
    for j in range(2):
        for i in range(2):
            x = np.zeros((2, 2), dtype=complex)
            x[i, j] = 1.0
            tr = np.trace(x)
            rx, ry, rz = (np.trace(x @ s) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))
            xp = plus * (rx + 1j * ry)
            xm = minus * (rx - 1j * ry)
            rx2, ry2 = (xp + xm) / 2, (xp - xm) / 2j
            rz2 = e2 * rz + (1 - e2) * z_inf * tr
            out = 0.5 * (tr * PAULIS[0] + rx2 * SIGMA_X + ry2 * SIGMA_Y + rz2 * SIGMA_Z)
            cols.append(out.T.reshape(-1))
    return np.array(cols).T


# ---------------------------------------------------------------------------
# Kraus representation


def thermal_kraus(z_inf: float, big_gamma: float, omega_t: float) -> KrausMap:
    """Diagonal-form Kraus operators ``E1..E4`` of the thermalizing map.

    ``E1 ~ sigma^+`` and ``E2 ~ sigma^-`` carry the jumps; ``E3``, ``E4`` are
    diagonal and come from the 2x2 coefficient matrix of the population/coherence
    block, whose off-diagonal is ``e^{-Gamma} e^{-i omega t}`` (this is what makes
    the map equal to the identity at ``Gamma = 0``).
    """
    if big_gamma < 0:
        raise NegativeIntegratedRate(f"Gamma = {big_gamma:.6g} < 0: the map is not completely positive")
    e = math.exp(-2 * big_gamma)
    one_m_e = -math.expm1(-2 * big_gamma)
    lam = one_m_e / 4
    e1 = math.sqrt(2 * lam * (1 + z_inf)) * SIGMA_PLUS
    e2 = math.sqrt(2 * lam * (1 - z_inf)) * SIGMA_MINUS

    a = z_inf * one_m_e / 2
    b = math.sqrt(z_inf**2 * one_m_e**2 + 4 * e) / 2
    if b <= 1e-14:
        raise DegenerateEigenvector(f"b = {b:.3e}")
    d1 = 0.5 * (1 + e) + b
    # d2 = s^2 - b^2 over s + b, exact cancellation written out
    d2 = 0.25 * one_m_e**2 * (1 - z_inf**2) / d1
    b_minus_a = b - a  # a <= 0, no cancellation
    a_plus_b = e / b_minus_a  # (b - a)(b + a) = e^{-2 Gamma}
    phase = np.exp(-1j * omega_t)
    norm = 1 / math.sqrt(2 * b)
    u1 = norm * np.array([phase * math.sqrt(a_plus_b), math.sqrt(b_minus_a)])
    u2 = norm * np.array([-phase * math.sqrt(b_minus_a), math.sqrt(a_plus_b)])
    e3 = math.sqrt(d1) * np.diag(u1)
    e4 = math.sqrt(d2) * np.diag(u2)
    return KrausMap([e1, e2, e3, e4])


def kraus_at(model: QubitThermalModel, t: float) -> KrausMap:
    return thermal_kraus(model.z_inf, gamma_integral(model, t), model.omega * t)


def lambda_matrix(z_inf: float, big_gamma: float, omega_t: float) -> np.ndarray:
    """Two-index coefficients with ``Lambda(rho) = sum_jk lam[j,k] s_j rho s_k``."""
    lam = -math.expm1(-2 * big_gamma) / 4
    c = math.exp(-big_gamma)
    out = np.zeros((4, 4), dtype=complex)
    out[1, 1] = out[2, 2] = lam
    out[0, 0] = 0.5 - lam + 0.5 * c * math.cos(omega_t)
    out[3, 3] = 0.5 - lam - 0.5 * c * math.cos(omega_t)
    out[0, 3] = z_inf * lam + 0.5j * c * math.sin(omega_t)
    out[3, 0] = np.conj(out[0, 3])
    out[2, 1] = 1j * z_inf * lam
    out[1, 2] = -1j * z_inf * lam
    return out


def apply_lambda(lam: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return sum(lam[j, k] * PAULIS[j] @ rho @ PAULIS[k] for j in range(4) for k in range(4))


def bloch_from_lambda(lam: np.ndarray, r0) -> BlochState:
    """Bloch components as linear functions of the coefficients (generic qubit map)."""
    x0, y0, z0 = r0
    L = lam
    x = (
        4 * L[0, 1].real
        + x0 * (L[0, 0] + L[1, 1] - L[2, 2] - L[3, 3]).real
        + y0 * (-2 * L[0, 3].imag + 2 * L[2, 1].real)
        + z0 * (2 * L[0, 2].imag + 2 * L[3, 1].real)
    )
    y = (
        4 * L[0, 2].real
        + y0 * (1 - 2 * L[1, 1] - 2 * L[3, 3]).real
        + x0 * (2 * L[0, 3].imag + 2 * L[1, 2].real)
        + z0 * (-2 * L[0, 1].imag + 2 * L[1, 3].real)
    )
    z = (
        4 * L[0, 3].real
        + z0 * (1 - 2 * L[1, 1] - 2 * L[2, 2]).real
        + x0 * (-2 * L[0, 2].imag + 2 * L[1, 3].real)
        + y0 * (2 * L[0, 1].imag + 2 * L[3, 2].real)
    )
    return BlochState(float(x), float(y), float(z))


class LambdaReport(NamedTuple):
    residuals: dict
    max_residual: float
    matrix: np.ndarray


def lambda_constraints_check(model: QubitThermalModel, t: float, samples: int = 20, seed: int = 0) -> LambdaReport:
    """Residuals of the trace/Hermiticity/positivity constraints on the coefficients."""
    G = gamma_integral(model, t)
    wt = model.omega * t
    zi = model.z_inf
    L = lambda_matrix(zi, G, wt)
    e2 = math.exp(-2 * G)
    c = math.exp(-G)
    r = {}
    r["trace_sum"] = abs(np.trace(L) - 1)
    r["hermiticity"] = float(np.max(np.abs(L - L.conj().T)))
    r["pairing_a"] = max(
        abs(L[0, 1].real - L[3, 2].imag), abs(L[0, 2].real - L[1, 3].imag), abs(L[0, 3].real - L[2, 1].imag)
    )
    r["I"] = abs(L[0, 3].real - zi * (1 - e2) / 4)
    r["II"] = abs(1 - 2 * L[1, 1] - 2 * L[2, 2] - e2)
    r["III"] = abs(-2 * L[0, 2].imag + 2 * L[1, 3].real)
    r["IV"] = abs(2 * L[0, 1].imag + 2 * L[3, 2].real)
    r["V"] = abs(L[0, 1].real)
    r["VI"] = abs(L[0, 2].real)
    r["VII"] = abs(2 * L[0, 2].imag + 2 * L[3, 1].real)
    r["VIII"] = abs(-2 * L[0, 1].imag + 2 * L[1, 3].real)
    r["IX"] = abs(2 * L[0, 3].imag + 2 * L[1, 2].real - c * math.sin(wt))
    r["X"] = abs((L[0, 0] + L[1, 1] - L[2, 2] - L[3, 3]) - c * math.cos(wt))
    r["positivity"] = max(0.0, -float(np.linalg.eigvalsh(L)[0]))

    rng = np.random.default_rng(seed)
    kraus = thermal_kraus(zi, G, wt) if G >= 0 else None
    worst_bloch = worst_kraus = 0.0
    for _ in range(samples):
        v = rng.normal(size=3)
        r0 = BlochState(*(v / np.linalg.norm(v) * rng.uniform() ** (1 / 3)))
        ref = bloch_from_gamma(r0, zi, G, wt)
        worst_bloch = max(worst_bloch, float(np.max(np.abs(np.subtract(bloch_from_lambda(L, r0), ref)))))
        if kraus is not None:
            rho = r0.to_density()
            out_l = apply_lambda(L, rho)
            out_k = sum(k @ rho @ k.conj().T for k in kraus)
            worst_kraus = max(worst_kraus, float(np.max(np.abs(out_l - out_k))))
    r["bloch"] = worst_bloch
    r["kraus"] = worst_kraus
    r = {k: float(v) for k, v in r.items()}
    return LambdaReport(r, max(r.values()), L)


# ---------------------------------------------------------------------------
# entropy-production statistics (sigma_z measurements, diagonal initial state)


def _populations(model: QubitThermalModel, big_gamma: float):
    """``(1+z0)/2, (1-z0)/2, (1+z1)/2, (1-z1)/2`` for initial z = +1 (z0) and -1 (z1)."""
    if big_gamma < 0:
        raise NegativeIntegratedRate(f"Gamma = {big_gamma:.6g} < 0: populations leave [0, 1]")
    zi = model.z_inf
    e2 = math.exp(-2 * big_gamma)
    one_m_e = -math.expm1(-2 * big_gamma)
    up0 = ((1 + zi) + e2 * (1 - zi)) / 2
    dn0 = (1 - zi) * one_m_e / 2
    up1 = (1 + zi) * one_m_e / 2
    dn1 = ((1 - zi) + e2 * (1 + zi)) / 2
    return up0, dn0, up1, dn1


def z_excited(model: QubitThermalModel, t: float) -> float:
    """``z(t)`` for the trajectory starting in ``|0>``."""
    up0, dn0, _, _ = _populations(model, gamma_integral(model, t))
    return up0 - dn0


def _joint(model: QubitThermalModel, t: float, p0_in: float):
    """Forward table ``[k, m]``, marginals and ``Phi(k) - Phi(m)`` for sigma_z measurements."""
    if not 0 <= p0_in <= 1:
        raise ValueError("p0_in must lie in [0, 1]")
    up0, dn0, up1, dn1 = _populations(model, gamma_integral(model, t))
    p_in = np.array([p0_in, 1 - p0_in])
    p_fwd = np.array([[up0, up1], [dn0, dn1]]) * p_in[None, :]
    p_fin = p_fwd.sum(axis=1)
    bw = model.beta_omega
    dphi = np.array([[0.0, bw], [-bw, 0.0]])
    return p_fwd, p_in, p_fin, dphi


def mean_entropy(model: QubitThermalModel, t: float, p0_in: float = 1.0) -> float:
    """Mean entropy production for a sigma_z-diagonal initial state with ``p(a_0^in) = p0_in``.

    Shannon entropy change of the measured populations minus the potential
    flux. Entropies use the marginal final distribution, so the result equals the
    two-point-measurement average for every ``p0_in``.
    """
    p_fwd, p_in, p_fin, dphi = _joint(model, t, p0_in)
    val = np.sum(xlogy(p_in, p_in)) - np.sum(xlogy(p_fin, p_fin)) - np.sum(p_fwd * dphi)
    return float(val)


def second_moment(model: QubitThermalModel, t: float, p0_in: float = 1.0) -> float:
    """Second raw moment of the entropy production; zero-probability trajectories drop out."""
    p_fwd, p_in, p_fin, dphi = _joint(model, t, p0_in)
    live = p_fwd > 0
    ln_in = np.log(np.where(p_in > 0, p_in, 1.0))
    ln_fin = np.log(np.where(p_fin > 0, p_fin, 1.0))
    ds = ln_in[None, :] - ln_fin[:, None] - dphi
    return float(np.sum(np.where(live, p_fwd * ds**2, 0.0)))


def _gap(beta_omega: float, big_gamma: float) -> float:
    # ln[(1 + e^{-2G} e^{bw}) / (1 - e^{-2G})]
    return math.log1p(math.exp(beta_omega - 2 * big_gamma)) - math.log(-math.expm1(-2 * big_gamma))


def variance_entropy(model: QubitThermalModel, t: float) -> float:
    """Variance of the entropy production for the ``|0>`` initial state."""
    G = gamma_integral(model, t)
    up0, dn0, _, _ = _populations(model, G)
    if dn0 <= 0:
        return 0.0
    return float(up0 * dn0 * _gap(model.beta_omega, G) ** 2)


def _rates(model: QubitThermalModel, t: float):
    G = gamma_integral(model, t)
    up0, dn0, _, _ = _populations(model, G)
    z = up0 - dn0
    if dn0 <= PURE_STATE_TOL / 2 or up0 <= PURE_STATE_TOL / 2:
        raise SingularAtPureState(f"z(t) = {z!r} at t = {t}")
    dz = -2 * model.gamma_rate(t) * math.exp(-2 * G) * (1 - model.z_inf)
    gap = _gap(model.beta_omega, G)
    dmean = -0.5 * dz * gap
    return z, gap, dmean


def mean_entropy_rate(model: QubitThermalModel, t: float) -> float:
    """Time derivative of the mean entropy production (``|0>`` initial state)."""
    return float(_rates(model, t)[2])


def variance_rate(model: QubitThermalModel, t: float) -> float:
    z, gap, dmean = _rates(model, t)
    return float(2 * dmean * (z / 2 * gap - 1))


def potential_gap(model: QubitThermalModel, t: float) -> float:
    """``ln[(1+z)/(1-z)] + beta omega`` for the ``|0>`` trajectory, in its stable form."""
    return _gap(model.beta_omega, gamma_integral(model, t))
