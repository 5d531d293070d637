"""Time reversal, the dual (backward) map and the nonequilibrium potential.

The antiunitary time reversal is fixed to complex conjugation in the
computational basis, ``Theta A Theta^dag = conj(A)``.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core_math import (
    SpectralDecomposition,
    as_matrix,
    check_density,
    dag,
    eig_hermitian,
    mat_power,
    max_abs,
)
from .cptp import KrausMap, apply_raw
from .errors import (
    AssumptionNotSatisfied,
    NotAProjectorSet,
    NotInvariant,
    NotPositiveDefinite,
)

TOL_INVARIANT = 1e-8
TOL_PD = 1e-10
TOL_CLASSIFY = 1e-7
TOL_PROJ = 1e-9


def time_reverse(a) -> np.ndarray:
    return np.conj(np.asarray(a, dtype=np.complex128))


def _require_pd(pi: np.ndarray) -> np.ndarray:
    pi = check_density(pi)
    lo = float(np.linalg.eigvalsh(pi)[0])
    if lo <= TOL_PD:
        raise NotPositiveDefinite(f"minimum eigenvalue {lo:.3e}")
    return pi


def dual_map(kmap: KrausMap, pi) -> KrausMap:
    """Backward map with operators ``Theta pi^{1/2} E^dag pi^{-1/2} Theta^dag``."""
    pi = _require_pd(pi)
    res = max_abs(apply_raw(kmap, pi) - pi)
    if res > TOL_INVARIANT:
        raise NotInvariant(f"map moves pi by {res:.3e}")
    sq = mat_power(pi, 0.5)
    isq = mat_power(pi, -0.5)
    return KrausMap([time_reverse(sq @ dag(e) @ isq) for e in kmap.operators])


@dataclass(frozen=True)
class NonequilibriumPotential:
    pi: np.ndarray
    spectrum: SpectralDecomposition
    phi: np.ndarray  # phi[i] = -ln(eigenvalue i), ascending eigenvalue order

    @property
    def dim(self) -> int:
        return self.pi.shape[0]


def build_potential(pi) -> NonequilibriumPotential:
    pi = _require_pd(pi)
    spec = eig_hermitian(pi)
    return NonequilibriumPotential(pi=pi, spectrum=spec, phi=-np.log(spec.eigenvalues))


@dataclass(frozen=True)
class KrausClassification:
    """Per-operator potential change; ``None`` marks an unclassifiable operator."""

    delta_phi: tuple
    satisfies_assumption_i: bool


def jump_coefficients(e: np.ndarray, pot: NonequilibriumPotential) -> np.ndarray:
    """``m[j, i] = <pi_j| E |pi_i>``."""
    v = pot.spectrum.eigenvectors
    return dag(v) @ e @ v


def classify_kraus(
    kmap: KrausMap, pot: NonequilibriumPotential, tol: float = TOL_CLASSIFY
) -> KrausClassification:
    phi = pot.phi
    gaps = phi[:, None] - phi[None, :]  # gaps[j, i] = phi(j) - phi(i)
    out = []
    for e in kmap.operators:
        m = jump_coefficients(e, pot)
        seen = gaps[np.abs(m) > tol]
        if seen.size == 0:
            out.append(0.0)
        elif seen.max() - seen.min() <= tol:
            out.append(float(seen.mean()))
        else:
            out.append(None)
    return KrausClassification(tuple(out), all(x is not None for x in out))


def verify_commutation(
    kmap: KrausMap, pot: NonequilibriumPotential, cls: KrausClassification
) -> float:
    """Largest residual of ``pi^{-1/2} E = e^{dphi/2} E pi^{-1/2}`` and its adjoint form."""
    if not cls.satisfies_assumption_i:
        raise AssumptionNotSatisfied("some Kraus operator mixes different potential changes")
    isq = mat_power(pot.pi, -0.5)
    worst = 0.0
    for e, dphi in zip(kmap.operators, cls.delta_phi):
        f = np.exp(dphi / 2)
        worst = max(
            worst,
            max_abs(isq @ e - f * e @ isq),
            max_abs(dag(e) @ isq - f * isq @ dag(e)),
        )
    return worst


def check_projector_set(projectors: Sequence, tol: float = TOL_PROJ) -> list:
    """Validate a complete set of orthogonal rank-1 projectors."""
    ps = [as_matrix(p) for p in projectors]
    if not ps:
        raise NotAProjectorSet("empty projector set")
    d = ps[0].shape[0]
    if len(ps) != d or any(p.shape != (d, d) for p in ps):
        raise NotAProjectorSet(f"need {d} rank-1 projectors of size {d}x{d}")
    for a, p in enumerate(ps):
        if max_abs(p - dag(p)) > tol or max_abs(p @ p - p) > tol or abs(np.trace(p) - 1) > tol:
            raise NotAProjectorSet(f"element {a} is not a rank-1 orthogonal projector")
        for b in range(a):
            if max_abs(p @ ps[b]) > tol:
                raise NotAProjectorSet(f"elements {b} and {a} are not orthogonal")
    if max_abs(sum(ps) - np.eye(d)) > tol:
        raise NotAProjectorSet("projectors do not sum to the identity")
    return ps


def check_observable_compatibility(projectors: Sequence, pot: NonequilibriumPotential) -> bool:
    ps = check_projector_set(projectors)
    return all(max_abs(p @ pot.pi - pot.pi @ p) <= TOL_PROJ for p in ps)


def outcome_potentials(
    projectors: Sequence, pot: NonequilibriumPotential, strict: bool = True
) -> np.ndarray:
    """Potential value ``-ln Tr[Pi pi]`` attached to each measurement outcome.

    For a projector commuting with ``pi`` this is exactly ``Phi`` of the
    eigenvector it selects (degenerate blocks included). With ``strict`` a
    non-commuting projector raises :class:`AssumptionNotSatisfied`; otherwise the
    nominal value is returned anyway.
    """
    ps = check_projector_set(projectors)
    if strict and not check_observable_compatibility(ps, pot):
        raise AssumptionNotSatisfied("measurement does not commute with the invariant state")
    return np.array([-np.log(np.trace(p @ pot.pi).real) for p in ps])


def match_eigenindices(projectors: Sequence, pot: NonequilibriumPotential) -> np.ndarray:
    """Index of the invariant-state eigenvector selected by each projector."""
    ps = check_projector_set(projectors)
    if not check_observable_compatibility(ps, pot):
        raise AssumptionNotSatisfied("measurement does not commute with the invariant state")
    v = pot.spectrum.eigenvectors
    idx = []
    for p in ps:
        weights = np.real(np.einsum("ij,ik,kj->j", v.conj(), p, v))
        idx.append(int(np.argmax(weights)))
    return np.array(idx)


def check_assumptions(
    kmap: KrausMap,
    pot: NonequilibriumPotential,
    projectors_in: Optional[Sequence] = None,
    projectors_fin: Optional[Sequence] = None,
    tol: float = TOL_CLASSIFY,
) -> tuple:
    """Return ``(assumption_i, assumption_ii, classification)``."""
    cls = classify_kraus(kmap, pot, tol)
    ii = True
    for ps in (projectors_in, projectors_fin):
        if ps is not None:
            ii = ii and check_observable_compatibility(ps, pot)
    return cls.satisfies_assumption_i, ii, cls
