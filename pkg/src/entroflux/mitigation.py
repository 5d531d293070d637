"""Irreversibility mitigation for the thermalizing qubit (initial state ``|0>``).

Mitigation at time ``t`` means both the mean and the variance of the entropy
production are decreasing. This requires a negative rate ``gamma(t)``. Two
thresholds on the integrated rate ``Gamma`` are provided:

* necessary: ``Gamma <= -1/2 ln[(1 - e^{-beta omega}) / 2]`` (equivalent to ``z >= 0``);
* sufficient: ``Gamma <= -1/2 ln x_+``, from rational bounds on the logarithm.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DivergentAtZeroGamma, SingularAtPureState
from .qubit_thermal import (
    QubitThermalModel,
    _gap,
    gamma_integral,
    mean_entropy,
    mean_entropy_rate,
    variance_entropy,
    variance_rate,
    z_excited,
)

GAMMA_FLOOR = 1e-12
RATE_TOL = 1e-12
BISECT_RES = 1e-6
# reported for comparison only: the corresponding threshold known for unital maps
UNITAL_SUFFICIENT_REFERENCE = 0.091


def potential_gap_I(model: QubitThermalModel, t: float) -> float:
    """``I(t) = ln[(1 + e^{-2 Gamma} e^{beta omega}) / (1 - e^{-2 Gamma})] >= 0``."""
    G = gamma_integral(model, t)
    if G <= GAMMA_FLOOR:
        raise DivergentAtZeroGamma(f"Gamma = {G:.3e} at t = {t}")
    return _gap(model.beta_omega, G)


def necessary_gamma_bound(beta_omega: float) -> float:
    if beta_omega == 0:
        return math.inf
    return -0.5 * (math.log(-math.expm1(-beta_omega)) - math.log(2.0))


def x_plus(beta_omega: float) -> float:
    q = math.exp(-beta_omega)
    return 0.4 * (1 - q + math.sqrt(q * q + 3 * q + 1))


def sufficient_gamma_bound(beta_omega: float) -> tuple:
    xp = x_plus(beta_omega)
    return xp, -0.5 * math.log(xp)


def necessary_bound(model: QubitThermalModel) -> float:
    """Largest ``Gamma`` with ``z(t) >= 0``; ``inf`` at ``beta = 0``."""
    return necessary_gamma_bound(model.beta_omega)


def sufficient_bound(model: QubitThermalModel) -> tuple:
    """``(x_plus, Gamma*)``; ``Gamma <= Gamma*`` guarantees ``z I / 2 >= 1``."""
    return sufficient_gamma_bound(model.beta_omega)


def x_plus_residual(beta_omega: float) -> float:
    """Residual of ``10 e^{bw} x^2 - 8 (e^{bw} - 1) x - 8 = 0`` at ``x_plus``, scaled by ``e^{-bw}``."""
    xp = x_plus(beta_omega)
    q = math.exp(-beta_omega)
    return 10 * xp * xp - 8 * (1 - q) * xp - 8 * q


def log_bounds(x: float) -> tuple:
    """Rational ``(lower, upper)`` bracket of ``ln(1 + x)`` for ``x > -1``."""
    if x <= -1:
        raise ValueError("x must exceed -1")
    a = 2 * x / (2 + x)
    b = 0.5 * x * (2 + x) / (1 + x)
    return (a, b) if x >= 0 else (b, a)


class OrderingCheck(NamedTuple):
    max_violation: float  # max over the grid of sufficient - necessary; must be < 0
    closing_inequality_min: float  # min of 15 q^2 + 50 q + 15, q = e^{-bw}
    log_bound_violation: float  # max amount by which a log bound fails on the sample
    x_plus_monotone: bool


def verify_bound_ordering(beta_grid: Sequence, omega: float = 1.0, log_samples: int = 601) -> OrderingCheck:
    bws = np.asarray(beta_grid, dtype=float) * omega
    if bws.size == 0 or np.any(bws <= 0):
        raise ValueError("beta values must be > 0")
    diffs = [sufficient_gamma_bound(bw)[1] - necessary_gamma_bound(bw) for bw in bws]
    q = np.exp(-bws)
    closing = float(np.min(15 * q**2 + 50 * q + 15))
    worst = 0.0
    for x in np.linspace(-1, 5, log_samples)[1:]:
        lo, hi = log_bounds(float(x))
        v = math.log1p(x)
        worst = max(worst, lo - v, v - hi)
    xs = [x_plus(bw) for bw in np.sort(bws)]
    mono = all(b <= a for a, b in zip(xs, xs[1:]))
    return OrderingCheck(float(max(diffs)), closing, float(worst), mono)


class ScanPoint(NamedTuple):
    t: float
    gamma: float
    Gamma: float
    z: float
    mean_dsigma: float
    dmean_dt: float  # nan where singular
    var_dsigma: float
    dvar_dt: float  # nan where singular
    I_t: float  # nan where divergent
    z_nonneg: bool
    suff_met: bool
    nec_met: bool
    mitigating: bool

    @property
    def gamma_negative(self) -> bool:
        return self.gamma < 0

    @property
    def mean_decreasing(self) -> bool:
        return self.dmean_dt < 0

    @property
    def var_decreasing(self) -> bool:
        return self.dvar_dt < 0


def evaluate_point(model: QubitThermalModel, t: float, suff: Optional[float] = None, nec: Optional[float] = None) -> ScanPoint:
    suff = sufficient_bound(model)[1] if suff is None else suff
    nec = necessary_bound(model) if nec is None else nec
    G = gamma_integral(model, t)
    z = z_excited(model, t)
    try:
        dmean = mean_entropy_rate(model, t)
        dvar = variance_rate(model, t)
    except SingularAtPureState:
        dmean = dvar = math.nan
    try:
        gap = potential_gap_I(model, t)
    except DivergentAtZeroGamma:
        gap = math.nan
    return ScanPoint(
        t=float(t),
        gamma=model.gamma(t),
        Gamma=G,
        z=z,
        mean_dsigma=mean_entropy(model, t),
        dmean_dt=dmean,
        var_dsigma=variance_entropy(model, t),
        dvar_dt=dvar,
        I_t=gap,
        z_nonneg=z >= 0,
        suff_met=G <= suff,
        nec_met=G <= nec,
        mitigating=bool(dmean < 0 and dvar < 0),
    )


@dataclass(frozen=True)
class MitigationReport:
    points: tuple
    windows: tuple  # (t_start, t_end) pairs
    necessary_gamma_bound: float
    sufficient_gamma_bound: float
    x_plus: float
    guarantee_violations: tuple  # times where sufficient_met and gamma < 0 but a rate is not negative

    @property
    def time_grid(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def flags(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points], dtype=bool)


def _margin(model: QubitThermalModel, t: float) -> float:
    # > 0 exactly where both rates are negative
    try:
        return min(-mean_entropy_rate(model, t), -variance_rate(model, t))
    except SingularAtPureState:
        return -math.inf


def _bisect(model: QubitThermalModel, inside: float, outside: float) -> float:
    while abs(outside - inside) > BISECT_RES:
        mid = 0.5 * (inside + outside)
        if _margin(model, mid) > 0:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _windows(model: QubitThermalModel, pts: Sequence[ScanPoint]) -> list:
    out = []
    n = len(pts)
    i = 0
    while i < n:
        if not pts[i].mitigating:
            i += 1
            continue
        j = i
        while j + 1 < n and pts[j + 1].mitigating:
            j += 1
        start = pts[i].t if i == 0 else _bisect(model, pts[i].t, pts[i - 1].t)
        end = pts[j].t if j == n - 1 else _bisect(model, pts[j].t, pts[j + 1].t)
        out.append((start, end))
        i = j + 1
    return out


def scan(model: QubitThermalModel, t_grid, workers: int = 1) -> MitigationReport:
    """Evaluate rates and flags on a grid and extract mitigation windows.

    Window endpoints are refined by bisection to ``1e-6`` in time; a window that
    touches the end of the grid is clipped there. Results do not depend on
    ``workers``.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("time grid must be non-negative and strictly increasing")
    xp, suff = sufficient_bound(model)
    nec = necessary_bound(model)

    def one(t):
        return evaluate_point(model, float(t), suff, nec)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pts = list(pool.map(one, grid))
    else:
        pts = [one(t) for t in grid]

    bad = tuple(
        p.t
        for p in pts
        if p.suff_met and p.gamma_negative and not (p.dmean_dt < RATE_TOL and p.dvar_dt < RATE_TOL)
    )
    return MitigationReport(
        points=tuple(pts),
        windows=tuple(_windows(model, pts)),
        necessary_gamma_bound=nec,
        sufficient_gamma_bound=suff,
        x_plus=xp,
        guarantee_violations=bad,
    )
