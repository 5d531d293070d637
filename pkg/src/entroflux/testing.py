"""Random states and maps for property tests. All take a ``numpy.random.Generator``."""
import numpy as np

from .cptp import KrausMap
from .tpm import MeasuredObservable


def random_unitary(rng, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d: int, rank=None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(rng, d: int, n_ops=None) -> KrausMap:
    """Generic CPTP map from a random isometry ``C^d -> C^(n d)``."""
    n = d if n_ops is None else n_ops
    g = rng.normal(size=(n * d, d)) + 1j * rng.normal(size=(n * d, d))
    q, _ = np.linalg.qr(g)
    return KrausMap([q[k * d : (k + 1) * d] for k in range(n)])


def random_unital_map(rng, d: int, n_ops: int = 3) -> KrausMap:
    """Mixture of random unitaries."""
    w = rng.dirichlet(np.ones(n_ops))
    return KrausMap([np.sqrt(wk) * random_unitary(rng, d) for wk in w])


def random_conforming_map(rng, d: int, rotate: bool = True):
    """Map whose Kraus operators each change the potential by a single amount.

    Jump operators ``sqrt(T[j, i]) |j><i|`` for ``j != i`` plus one diagonal
    operator with random phases, ``T`` a positive column-stochastic matrix. The
    invariant state is diagonal in the (optionally rotated) basis, which is
    returned as a measurement so both assumptions hold.

    Returns ``(kmap, pi, observable)``.
    """
    t = rng.uniform(0.05, 1.0, size=(d, d))
    t /= t.sum(axis=0, keepdims=True)
    w, v = np.linalg.eig(t)
    p = np.real(v[:, np.argmin(np.abs(w - 1))])
    p /= p.sum()
    u = random_unitary(rng, d) if rotate else np.eye(d)
    ops = []
    for i in range(d):
        for j in range(d):
            if i != j:
                e = np.zeros((d, d), dtype=complex)
                e[j, i] = np.sqrt(t[j, i])
                ops.append(e)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=d))
    ops.append(np.diag(np.sqrt(np.diag(t)) * phases))
    ops = [u @ e @ u.conj().T for e in ops]
    pi = u @ np.diag(p) @ u.conj().T
    obs = MeasuredObservable.from_basis(u)
    return KrausMap(ops), pi, obs
