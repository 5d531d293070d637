"""Kraus maps: validation, action on states, superoperator/Choi forms, fixed point.

Vectorization is column stacking throughout: ``vec(A)[j*d + i] = A[i, j]``, so
``vec(A X B) = (B^T kron A) vec(X)`` and the superoperator of
``X -> sum_l E_l X E_l^dag`` is ``sum_l conj(E_l) kron E_l``.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_math import as_matrix, check_density, dag, max_abs
from .errors import DimensionMismatch, NonUniqueInvariant, NotPositiveDefinite

TOL_TP = 1e-9
TOL_CP = 1e-9
TOL_UNIQUE = 1e-8
TOL_PD = 1e-10


@dataclass(frozen=True)
class KrausMap:
    """An ordered list of Kraus operators ``E_l``, all ``dim x dim``.

    Construction checks shapes only; use :func:`validate` for TP/CP.
    """

    operators: tuple

    def __init__(self, operators: Sequence):
        ops = [as_matrix(e) for e in operators]
        if not ops:
            raise DimensionMismatch("a Kraus map needs at least one operator")
        d = ops[0].shape[0]
        for e in ops:
            if e.shape != (d, d):
                raise DimensionMismatch(f"operator of shape {e.shape} in a dim-{d} map")
        if len(ops) > d * d:
            raise DimensionMismatch(f"{len(ops)} operators exceed dim^2 = {d * d}")
        for e in ops:
            e.setflags(write=False)
        object.__setattr__(self, "operators", tuple(ops))

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def __eq__(self, other):
        if not isinstance(other, KrausMap) or len(self) != len(other):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self, other))

    def __hash__(self):
        return hash(tuple(e.tobytes() for e in self.operators))


@dataclass(frozen=True)
class ValidationReport:
    trace_preserving: bool
    completely_positive: bool
    unital: bool
    tp_residual: float
    unital_residual: float
    min_choi_eigenvalue: float

    @property
    def cptp(self) -> bool:
        return self.trace_preserving and self.completely_positive


def identity_map(dim: int) -> KrausMap:
    return KrausMap([np.eye(dim)])


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).T.reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d).T


def choi_matrix(kmap: KrausMap) -> np.ndarray:
    """``sum_l vec(E_l) vec(E_l)^dag`` (input index first, output index second)."""
    vs = np.array([vec(e) for e in kmap.operators])
    return vs.T @ vs.conj()


def validate(kmap: KrausMap, tol: float = TOL_TP) -> ValidationReport:
    d = kmap.dim
    eye = np.eye(d)
    tp = sum(dag(e) @ e for e in kmap.operators)
    un = sum(e @ dag(e) for e in kmap.operators)
    tp_res = max_abs(tp - eye)
    un_res = max_abs(un - eye)
    choi = choi_matrix(kmap)
    min_eig = float(np.linalg.eigvalsh(0.5 * (choi + dag(choi)))[0])
    return ValidationReport(
        trace_preserving=tp_res <= tol,
        completely_positive=min_eig >= -TOL_CP,
        unital=un_res <= tol,
        tp_residual=tp_res,
        unital_residual=un_res,
        min_choi_eigenvalue=min_eig,
    )


def apply_raw(kmap: KrausMap, x: np.ndarray) -> np.ndarray:
    """Apply the map to an arbitrary matrix (no state validation)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (kmap.dim, kmap.dim):
        raise DimensionMismatch(f"operand of shape {x.shape} for a dim-{kmap.dim} map")
    return sum(e @ x @ dag(e) for e in kmap.operators)


def apply(kmap: KrausMap, rho) -> np.ndarray:
    """Evolve a density matrix; the output is re-validated as a state."""
    rho = check_density(rho)
    return check_density(apply_raw(kmap, rho))


def to_superoperator(kmap: KrausMap) -> np.ndarray:
    return sum(np.kron(e.conj(), e) for e in kmap.operators)


def invariant_state(kmap: KrausMap) -> np.ndarray:
    """Unique positive-definite fixed point of the map.

    Taken from the superoperator eigenvector whose eigenvalue is closest to 1.
    Raises :class:`NonUniqueInvariant` if several eigenvalues sit within 1e-8 of 1
    and :class:`NotPositiveDefinite` if the fixed point has a (near-)zero eigenvalue.
    """
    sup = to_superoperator(kmap)
    w, v = np.linalg.eig(sup)
    dist = np.abs(w - 1.0)
    n_near = int(np.sum(dist <= TOL_UNIQUE))
    if n_near > 1:
        raise NonUniqueInvariant(f"{n_near} superoperator eigenvalues within {TOL_UNIQUE:g} of 1")
    x = unvec(v[:, int(np.argmin(dist))])
    # fix the eigensolver's arbitrary global phase before Hermitizing
    x = x / np.trace(x)
    x = 0.5 * (x + dag(x))
    x = x / np.trace(x).real
    lo = float(np.linalg.eigvalsh(x)[0])
    if lo <= TOL_PD:
        raise NotPositiveDefinite(f"invariant state has minimum eigenvalue {lo:.3e}")
    return x
