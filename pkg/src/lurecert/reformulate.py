"""Lur'e systems, their piecewise-affine reformulation and the augmented pair system."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .nonlin import Nonlinearity, PwaApproximation

__all__ = [
    "LureSystem",
    "PwaCell",
    "PwaLureSystem",
    "AugCell",
    "Facet",
    "AugmentedSystem",
    "cell_polyhedron",
    "to_pwa_lure",
    "augment",
    "facet_adjacency",
    "swap_permutation",
    "locate_cells",
]


def _matrix(a, shape, name):
    a = np.array(a, dtype=float, ndmin=2)
    if a.shape != shape:
        raise ArgumentError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} has non-finite entries")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LureSystem:
    """``x' = A x + B p``, ``q = C x``, ``p = -phi(q)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    nl: Nonlinearity

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        n = A.shape[0]
        object.__setattr__(self, "A", _matrix(A, (n, n), "A"))
        for name, shape in (("B", (n, 1)), ("C", (1, n))):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.size != n:
                raise ArgumentError(f"{name} has {v.size} entries, expected {n}")
            object.__setattr__(self, name, _matrix(v.reshape(shape), shape, name))

    @property
    def n(self):
        return self.A.shape[0]

    def rhs(self, x):
        """Vector field of the original system; ``x`` may be ``(n,)`` or ``(k, n)``."""
        x = np.asarray(x, dtype=float)
        q = x @ self.C[0]
        p = -self.nl.eval(q)
        return x @ self.A.T + np.multiply.outer(p, self.B[:, 0])


@dataclass(frozen=True)
class PwaCell:
    A: np.ndarray
    a: np.ndarray
    C: np.ndarray
    c: float
    G: np.ndarray
    g: np.ndarray
    interval: tuple


@dataclass(frozen=True)
class PwaLureSystem:
    """``x' = A_i x + a_i + B p_eps`` on cell ``i``, ``p_eps = -eps(C x)``."""

    cells: tuple
    B: np.ndarray
    D: float
    eta: float
    breakpoints: np.ndarray
    source: LureSystem = field(compare=False)
    approx: PwaApproximation = field(compare=False)

    @property
    def n(self):
        return self.B.shape[0]

    @property
    def N(self):
        return len(self.cells)

    @property
    def C(self):
        return self.cells[0].C

    def cell_of(self, x):
        return locate_cells(self.breakpoints, np.asarray(x) @ self.C[0])

    def rhs(self, x):
        """Vector field of the reformulation: PWA part plus the residual nonlinearity."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        q = x @ self.C[0]
        idx = locate_cells(self.breakpoints, q)
        A = np.stack([c.A for c in self.cells])[idx]
        a = np.stack([c.a[:, 0] for c in self.cells])[idx]
        eps = self.source.nl.eval(q) - self.approx(q)
        out = np.einsum("kij,kj->ki", A, x) + a - np.multiply.outer(eps, self.B[:, 0])
        return out[0] if single else out

    def pwa_part(self, x, i):
        """``A_i x + a_i`` for a given cell index."""
        cell = self.cells[i]
        return cell.A @ np.asarray(x, dtype=float) + cell.a[:, 0]


def locate_cells(breakpoints, q):
    """Cell index of scalar channel values; a breakpoint belongs to the left cell."""
    return np.searchsorted(breakpoints, q, side="left")


def cell_polyhedron(interval, C):
    """Rows ``(G, g)`` with ``G x + g >= 0`` iff ``C x`` lies in ``interval``."""
    q_l, q_u = float(interval[0]), float(interval[1])
    if not q_l < q_u:
        raise ArgumentError(f"empty interval [{q_l}, {q_u}]")
    C = np.asarray(C, dtype=float).reshape(1, -1)
    rows, offs = [], []
    if math.isfinite(q_l):
        rows.append(C[0])
        offs.append(-q_l)
    if math.isfinite(q_u):
        rows.append(-C[0])
        offs.append(q_u)
    G = np.array(rows, dtype=float).reshape(len(rows), C.shape[1])
    return G, np.array(offs, dtype=float)


def to_pwa_lure(sys: LureSystem, approx: PwaApproximation) -> PwaLureSystem:
    cells = []
    for i, interval in enumerate(approx.regions):
        r, s = approx.slopes[i], approx.intercepts[i]
        G, g = cell_polyhedron(interval, sys.C)
        cells.append(PwaCell(
            A=sys.A - r * sys.B @ sys.C,
            a=-s * sys.B,
            C=sys.C.copy(),
            c=0.0,
            G=G,
            g=g,
            interval=interval,
        ))
    return PwaLureSystem(
        cells=tuple(cells),
        B=sys.B,
        D=0.0,
        eta=approx.eta,
        breakpoints=approx.breakpoints,
        source=sys,
        approx=approx,
    )


@dataclass(frozen=True)
class AugCell:
    i: int
    j: int
    A: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class Facet:
    """Codimension-one intersection of augmented cells ``a`` and ``b``.

    ``E`` is a single row with ``E @ col(x, xt, 1) = 0`` on the intersection.
    """

    a: tuple
    b: tuple
    E: np.ndarray

    def swapped(self):
        return Facet((self.a[1], self.a[0]), (self.b[1], self.b[0]), self.E @ swap_permutation(self.n).T)

    @property
    def n(self):
        return (self.E.shape[1] - 1) // 2


@dataclass(frozen=True)
class AugmentedSystem:
    n: int
    N: int
    cells: dict
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    facets: tuple
    eta: float
    breakpoints: np.ndarray
    pwa: PwaLureSystem = field(compare=False, repr=False)

    @property
    def dim(self):
        return 2 * self.n + 1

    def lift(self, x, xt):
        """``col(x, xt, 1)`` for single points or stacked rows."""
        x, xt = np.asarray(x, dtype=float), np.asarray(xt, dtype=float)
        one = np.ones(x.shape[:-1] + (1,))
        return np.concatenate([x, xt, one], axis=-1)


def swap_permutation(n):
    """Permutation exchanging the ``x`` and ``xt`` blocks of ``col(x, xt, 1)``."""
    perm = np.zeros((2 * n + 1, 2 * n + 1))
    perm[:n, n:2 * n] = np.eye(n)
    perm[n:2 * n, :n] = np.eye(n)
    perm[-1, -1] = 1.0
    return perm


def facet_adjacency(pwa: PwaLureSystem):
    """All codimension-one intersections ``X_ij & X_kl`` with one index changed by one."""
    n, N = pwa.n, pwa.N
    C = pwa.C
    norm = float(np.linalg.norm(C))
    zero = np.zeros((1, n))
    facets = []
    for i in range(N):
        for j in range(N):
            if i + 1 < N:
                q = pwa.breakpoints[i]
                E = np.hstack([C, zero, [[-q]]]) / norm
                facets.append(Facet((i, j), (i + 1, j), E))
            if j + 1 < N:
                q = pwa.breakpoints[j]
                E = np.hstack([zero, C, [[-q]]]) / norm
                facets.append(Facet((i, j), (i, j + 1), E))
    return facets


def augment(pwa: PwaLureSystem) -> AugmentedSystem:
    n, N = pwa.n, pwa.N
    cells = {}
    for i, ci in enumerate(pwa.cells):
        for j, cj in enumerate(pwa.cells):
            A = np.zeros((2 * n + 1, 2 * n + 1))
            A[:n, :n] = ci.A
            A[n:2 * n, n:2 * n] = cj.A
            A[:n, -1] = ci.a[:, 0]
            A[n:2 * n, -1] = cj.a[:, 0]
            G = np.vstack([
                np.hstack([ci.G, np.zeros((len(ci.g), n)), ci.g[:, None]]),
                np.hstack([np.zeros((len(cj.g), n)), cj.G, cj.g[:, None]]),
            ])
            cells[i, j] = AugCell(i, j, A, G)
    B = np.zeros((2 * n + 1, 2))
    B[:n, 0] = pwa.B[:, 0]
    B[n:2 * n, 1] = pwa.B[:, 0]
    C = np.hstack([pwa.C, -pwa.C, [[0.0]]])
    D = np.array([[pwa.D, -pwa.D]])
    return AugmentedSystem(
        n=n,
        N=N,
        cells=cells,
        B=B,
        C=C,
        D=D,
        facets=tuple(facet_adjacency(pwa)),
        eta=pwa.eta,
        breakpoints=pwa.breakpoints,
        pwa=pwa,
    )
