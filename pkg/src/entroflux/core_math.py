"""Dense complex linear algebra and entropy functionals.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Entropies are in
nats throughout.
"""
from typing import NamedTuple

import numpy as np

from .errors import (
    InvalidDensityMatrix,
    NotHermitian,
    SingularForNegativePower,
    SupportViolation,
)

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-10
EPS_INV = 1e-12
EPS_LOG = 1e-14
TOL_SUPPORT = 1e-9


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # orthonormal columns


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square, finite complex128 array."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> bool:
    return max_abs(a - dag(a)) <= tol


def check_density(rho, tol: float = TOL_HERM) -> np.ndarray:
    """Validate a density matrix and return it as a complex array.

    Raises :class:`InvalidDensityMatrix` if ``rho`` is not Hermitian, not
    unit-trace or has an eigenvalue below ``-1e-10``.
    """
    rho = as_matrix(rho)
    if not is_hermitian(rho, tol):
        raise InvalidDensityMatrix(f"not Hermitian (residual {max_abs(rho - dag(rho)):.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TOL_TRACE:
        raise InvalidDensityMatrix(f"trace is {tr.real:.12g}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if lo < -TOL_PSD:
        raise InvalidDensityMatrix(f"negative eigenvalue {lo:.3e}")
    return rho


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # deterministic gauge: first non-negligible component of each column real-positive
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            c = col[idx[0]]
            out[:, j] = col * (abs(c) / c)
    return out


def eig_hermitian(a, tol: float = TOL_HERM) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues."""
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise NotHermitian(f"Hermiticity residual {max_abs(a - dag(a)):.3e} exceeds {tol:g}")
    w, v = np.linalg.eigh(0.5 * (a + dag(a)))
    return SpectralDecomposition(w, _fix_phases(v))


def mat_power(a, p: float) -> np.ndarray:
    """Principal real power ``a**p`` of a Hermitian positive semidefinite matrix."""
    w, v = eig_hermitian(a)
    if p < 0:
        if w[0] <= EPS_INV:
            raise SingularForNegativePower(f"smallest eigenvalue {w[0]:.3e} with p={p}")
        wp = w**p
    else:
        wp = np.clip(w, 0.0, None) ** p
    return (v * wp) @ dag(v)


def _xlogx(w: np.ndarray) -> np.ndarray:
    w = np.where(w > EPS_LOG, w, 0.0)
    return np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)


def von_neumann_entropy(rho) -> float:
    """``-Tr[rho ln rho]`` in nats, with the convention ``0 ln 0 = 0``."""
    rho = check_density(rho)
    w = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))
    return float(-np.sum(_xlogx(w)))


def relative_entropy(rho, sigma) -> float:
    """Quantum relative entropy ``Tr[rho ln rho - rho ln sigma]`` in nats.

    Raises :class:`SupportViolation` when the support of ``rho`` is not contained
    in the support of ``sigma`` (the relative entropy would be infinite).
    """
    rho = check_density(rho)
    sigma = check_density(sigma)
    wr, vr = np.linalg.eigh(0.5 * (rho + dag(rho)))
    ws, vs = np.linalg.eigh(0.5 * (sigma + dag(sigma)))

    kernel = vs[:, ws <= EPS_LOG]
    if kernel.shape[1]:
        support = vr[:, wr > EPS_LOG]
        leak = np.linalg.norm(dag(kernel) @ support, axis=0)
        if leak.size and leak.max() > TOL_SUPPORT:
            raise SupportViolation(f"support leak {leak.max():.3e} into kernel of sigma")

    keep = ws > EPS_LOG
    # populations of rho in sigma's eigenbasis
    pops = np.real(np.einsum("ij,ik,kj->j", vs.conj(), rho, vs))
    cross = float(np.sum(pops[keep] * np.log(ws[keep])))
    return float(np.sum(_xlogx(wr))) - cross
