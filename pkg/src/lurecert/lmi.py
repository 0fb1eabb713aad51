"""Assembly of the piecewise-quadratic incremental Lyapunov LMIs.

Decision variables are scalars indexed ``0 .. n_vars - 1``.  Every matrix
expression is an :class:`Affine` map ``const + sum_k x_k * terms[k]``, so an
LMI block is stored exactly in the ``F0 + sum x_k F_k`` form that conic
backends consume.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import AssemblyError, SchemaError
from .nonlin import PwaApproximation
from .reformulate import AugmentedSystem, LureSystem, augment, swap_permutation, to_pwa_lure

__all__ = [
    "Affine",
    "bmat",
    "VarSpace",
    "LmiOptions",
    "LmiBlock",
    "LmiProblem",
    "CompiledProblem",
    "Certificate",
    "jbar",
    "ibar",
    "lift_diagonal",
    "kernel_directions",
    "sprocedure_matrix",
    "multiplier_swap",
    "assemble_theorem2",
    "assemble_circle_criterion",
    "census",
    "to_text",
    "from_text",
]


class Affine:
    """Matrix-valued affine function of the decision vector."""

    __array_ufunc__ = None
    __slots__ = ("const", "terms")

    def __init__(self, const, terms=None):
        self.const = np.array(const, dtype=float, ndmin=2)
        self.terms = {} if terms is None else terms

    @property
    def shape(self):
        return self.const.shape

    @property
    def T(self):
        return Affine(self.const.T, {k: v.T for k, v in self.terms.items()})

    def _coerce(self, other):
        if isinstance(other, Affine):
            return other
        return Affine(np.broadcast_to(np.asarray(other, dtype=float), self.shape))

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, c):
        if isinstance(c, Affine):
            if c.terms:
                raise TypeError("product of two affine expressions is not affine")
            c = c.const
        c = np.asarray(c, dtype=float)
        if c.size != 1:
            if self.shape != (1, 1):
                raise TypeError("Affine supports scalar scaling only; use @ for products")
            # scalar-valued expression times a constant matrix
            return Affine(self.const[0, 0] * c, {k: v[0, 0] * c for k, v in self.terms.items()})
        c = float(c.reshape(-1)[0])
        return Affine(self.const * c, {k: v * c for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, m):
        m = np.asarray(m, dtype=float)
        return Affine(self.const @ m, {k: v @ m for k, v in self.terms.items()})

    def __rmatmul__(self, m):
        m = np.asarray(m, dtype=float)
        return Affine(m @ self.const, {k: m @ v for k, v in self.terms.items()})

    def __getitem__(self, idx):
        const = np.array(self.const[idx], ndmin=2)
        return Affine(const, {k: np.array(v[idx], ndmin=2).reshape(const.shape) for k, v in self.terms.items()})

    def sym(self):
        return (self + self.T) * 0.5

    def value(self, x):
        out = self.const.copy()
        for k, v in self.terms.items():
            out += x[k] * v
        return out

    def upper(self):
        """Upper triangle (diagonal included) of a square expression, as a column."""
        r, c = np.triu_indices(self.shape[0])
        return Affine(self.const[r, c][:, None], {k: v[r, c][:, None] for k, v in self.terms.items()})

    def prune(self, atol=0.0):
        terms = {k: v for k, v in self.terms.items() if np.any(np.abs(v) > atol)}
        return Affine(self.const, terms)


def _as_affine(x, shape=None):
    if isinstance(x, Affine):
        return x
    if x is None or (np.isscalar(x) and x == 0):
        return Affine(np.zeros(shape))
    return Affine(x)


def bmat(rows):
    """Block matrix of Affine/ndarray entries; ``None`` means a zero block."""
    heights = []
    for row in rows:
        h = {e.shape[0] for e in row if e is not None and not np.isscalar(e)}
        if len(h) != 1:
            raise AssemblyError(f"inconsistent block heights {h}")
        heights.append(h.pop())
    widths = []
    for j in range(len(rows[0])):
        w = {row[j].shape[1] for row in rows if row[j] is not None and not np.isscalar(row[j])}
        if len(w) != 1:
            raise AssemblyError(f"inconsistent block widths {w}")
        widths.append(w.pop())
    grid = [[_as_affine(e, (heights[a], widths[b])) for b, e in enumerate(row)] for a, row in enumerate(rows)]
    const = np.block([[e.const for e in row] for row in grid])
    keys = sorted({k for row in grid for e in row for k in e.terms})
    terms = {}
    for k in keys:
        terms[k] = np.block([
            [e.terms.get(k, np.zeros(e.shape)) for e in row] for row in grid
        ])
    return Affine(const, terms)


@dataclass
class VarSpec:
    name: str
    kind: str
    index: np.ndarray
    nonneg: bool = False

    @property
    def shape(self):
        return self.index.shape


class VarSpace:
    """Registry mapping named matrix variables onto scalar decision indices."""

    KINDS = ("scalar", "symmetric", "multiplier", "rectangular")

    def __init__(self):
        self.n = 0
        self.specs: dict[str, VarSpec] = {}

    def _register(self, name, kind, index, nonneg=False):
        if name in self.specs:
            raise AssemblyError(f"duplicate variable {name}")
        self.specs[name] = VarSpec(name, kind, index, nonneg)
        return self.expr(name)

    def _take(self, count):
        idx = np.arange(self.n, self.n + count)
        self.n += count
        return idx

    def scalar(self, name):
        return self._register(name, "scalar", self._take(1).reshape(1, 1))

    def symmetric(self, name, m):
        index = np.full((m, m), -1)
        r, c = np.triu_indices(m)
        index[r, c] = self._take(len(r))
        index[c, r] = index[r, c]
        return self._register(name, "symmetric", index)

    def multiplier(self, name, m, zero_diagonal=True):
        """Symmetric, entrywise nonnegative; zero diagonal unless disabled."""
        index = np.full((m, m), -1)
        r, c = np.triu_indices(m, k=1 if zero_diagonal else 0)
        index[r, c] = self._take(len(r))
        index[c, r] = index[r, c]
        return self._register(name, "multiplier", index, nonneg=True)

    def rectangular(self, name, shape):
        index = self._take(int(np.prod(shape))).reshape(shape)
        return self._register(name, "rectangular", index)

    def expr(self, name):
        index = self.specs[name].index
        terms = {int(k): (index == k).astype(float) for k in np.unique(index[index >= 0])}
        return Affine(np.zeros(index.shape), terms)

    def value(self, name, x):
        index = self.specs[name].index
        return np.where(index >= 0, np.asarray(x)[np.maximum(index, 0)], 0.0)

    def nonneg_indices(self):
        idx = [s.index[s.index >= 0] for s in self.specs.values() if s.nonneg]
        return np.unique(np.concatenate(idx)) if idx else np.empty(0, dtype=int)


@dataclass(frozen=True)
class LmiOptions:
    """Assembly switches.

    ``constant_row`` appends the row selecting the homogenizing coordinate to
    every S-procedure matrix; ``reduce`` applies the exact facial reductions
    of the off-diagonal blocks.
    """

    swap_symmetry: bool = True
    zero_diagonal: bool = True
    constant_row: bool = True
    reduce: bool = True
    sigma_min: float = 1e-6

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class LmiBlock:
    name: str
    family: str
    sense: str
    expr: Affine


@dataclass
class LmiProblem:
    """Semidefinite feasibility problem with named outputs.

    ``equalities`` are columns constrained to zero, ``bounds`` columns
    constrained to be nonnegative; ``outputs`` maps certificate keys to the
    affine expressions that reconstruct them from the decision vector.
    """

    space: VarSpace
    blocks: list = field(default_factory=list)
    equalities: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    objective: Affine = None
    outputs: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self):
        return self.space.n

    def add_block(self, name, family, sense, expr):
        expr = expr.sym()
        if expr.shape[0] == 0:
            return
        self.blocks.append(LmiBlock(name, family, sense, expr))

    def add_equality(self, name, expr):
        expr = expr.prune()
        keep = np.array([
            np.any(expr.const[r] != 0) or any(np.any(v[r] != 0) for v in expr.terms.values())
            for r in range(expr.shape[0])
        ], dtype=bool)
        if keep.any():
            self.equalities.append((name, expr[keep, :]))

    def compile(self, scale=True):
        return CompiledProblem.build(self, scale)

    def extract(self, x):
        values = {key: expr.value(x) for key, expr in self.outputs.items()}
        return Certificate.from_outputs(values, self.meta)

    def residuals(self, x):
        """Violation of every constraint at ``x``, each normalized by ``max(1, max|entry|)``."""
        x = np.asarray(x, dtype=float)
        out = {}
        for blk in self.blocks:
            M = blk.expr.value(x)
            M = (M + M.T) / 2
            ev = np.linalg.eigvalsh(M)
            viol = -ev[0] if blk.sense == "psd" else ev[-1]
            out[blk.name] = max(viol, 0.0) / max(1.0, float(np.max(np.abs(M))))
        for name, expr in self.equalities:
            out[name] = float(np.max(np.abs(expr.value(x)), initial=0.0))
        for name, expr in self.bounds:
            out[name] = max(0.0, -float(np.min(expr.value(x))))
        nn = self.space.nonneg_indices()
        if len(nn):
            out["multipliers>=0"] = max(0.0, -float(np.min(x[nn])))
        return out


@dataclass
class CompiledProblem:
    """Numeric data: minimize ``c x`` s.t. ``F0_b + mat(F_b x) >= 0`` (PSD), ``A x = b``, ``G x + h >= 0``."""

    n_vars: int
    c: np.ndarray
    lmis: list
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    block_scales: np.ndarray

    @staticmethod
    def _rows(expr):
        rows, cols, vals = [], [], []
        m = expr.shape[0] * expr.shape[1]
        for k, v in expr.terms.items():
            flat = v.reshape(-1)
            nz = np.nonzero(flat)[0]
            rows.append(nz)
            cols.append(np.full(len(nz), k))
            vals.append(flat[nz])
        return m, rows, cols, vals

    @classmethod
    def _sparse(cls, expr, n_vars):
        m, rows, cols, vals = cls._rows(expr)
        if rows:
            return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, n_vars))
        return sp.csr_matrix((m, n_vars))

    @classmethod
    def build(cls, problem, scale=True):
        n = problem.n_vars
        lmis, scales = [], []
        for blk in problem.blocks:
            sign = 1.0 if blk.sense == "psd" else -1.0
            F0 = sign * blk.expr.const
            F = cls._sparse(blk.expr, n) * sign
            s = 1.0
            if scale:
                mag = max(np.max(np.abs(F0), initial=0.0), abs(F).max() if F.nnz else 0.0)
                s = 1.0 / mag if mag > 0 else 1.0
            lmis.append((F0 * s, F * s))
            scales.append(s)
        if problem.equalities:
            A = sp.vstack([cls._sparse(e, n) for _, e in problem.equalities]).tocsr()
            b = -np.concatenate([e.const.reshape(-1) for _, e in problem.equalities])
        else:
            A, b = sp.csr_matrix((0, n)), np.zeros(0)
        if scale and A.shape[0]:
            mag = np.maximum(abs(A).max(axis=1).toarray().ravel(), np.abs(b))
            mag[mag == 0] = 1.0
            D = sp.diags(1.0 / mag)
            A, b = (D @ A).tocsr(), b / mag
        g_rows = [cls._sparse(e, n) for _, e in problem.bounds]
        h_rows = [e.const.reshape(-1) for _, e in problem.bounds]
        nn = problem.space.nonneg_indices()
        if len(nn):
            g_rows.append(sp.csr_matrix((np.ones(len(nn)), (np.arange(len(nn)), nn)), shape=(len(nn), n)))
            h_rows.append(np.zeros(len(nn)))
        G = sp.vstack(g_rows).tocsr() if g_rows else sp.csr_matrix((0, n))
        h = np.concatenate(h_rows) if h_rows else np.zeros(0)
        c = np.zeros(n)
        if problem.objective is not None:
            for k, v in problem.objective.terms.items():
                c[k] += float(v.reshape(-1)[0])
        return cls(n, c, lmis, A, b, G, h, np.array(scales))


# -- structured matrices -----------------------------------------------------


def jbar(n):
    """``[[I, -I, 0], [-I, I, 0], [0, 0, 0]]`` so that ``xb' J xb = |x - xt|^2``."""
    return lift_diagonal(np.eye(n))


def ibar(p=1):
    """``[[I, -I], [-I, I]]`` so that ``pb' I pb = |p - pt|^2``."""
    eye = np.eye(p)
    return np.block([[eye, -eye], [-eye, eye]])


def lift_diagonal(P):
    """``[[P, -P, 0], [-P, P, 0], [0, 0, 0]]``; works for arrays and Affine."""
    if isinstance(P, Affine):
        n = P.shape[0]
        return bmat([[P, -P, None], [-P, P, None], [None, None, np.zeros((1, 1))]]) if n else P
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    out = np.zeros((2 * n + 1, 2 * n + 1))
    out[:n, :n] = P
    out[:n, n:2 * n] = -P
    out[n:2 * n, :n] = -P
    out[n:2 * n, n:2 * n] = P
    return out


def kernel_directions(C):
    """Columns ``(w, w, 0)`` with ``C w = 0``."""
    C = np.asarray(C, dtype=float)
    kc = sla.null_space(C)
    return np.vstack([kc, kc, np.zeros((1, kc.shape[1]))])


def sprocedure_matrix(G, constant_row=True):
    """Cell rows, optionally followed by the row selecting the constant coordinate."""
    if not constant_row:
        return np.asarray(G, dtype=float)
    e = np.zeros((1, G.shape[1]))
    e[0, -1] = 1.0
    return np.vstack([G, e])


def multiplier_swap(rows_i, rows_j, constant_row=True):
    """Row permutation ``S`` with ``G_ji = S G_ij Pi'`` for the augmented cell rows."""
    m = rows_i + rows_j + (1 if constant_row else 0)
    order = list(range(rows_i, rows_i + rows_j)) + list(range(rows_i)) + list(range(rows_i + rows_j, m))
    return np.eye(m)[order]


# -- certificate -------------------------------------------------------------


def _key_str(key):
    return json.dumps(key)


def _key_tuple(s):
    def tup(v):
        return tuple(tup(e) for e in v) if isinstance(v, list) else v
    return tup(json.loads(s))


@dataclass
class Certificate:
    P: list
    Pbar: dict
    U: dict
    R: dict
    W: dict
    L: dict
    sigma: tuple
    eta: float
    options: LmiOptions
    solver_status: str = ""
    max_residual: float = math.nan

    @classmethod
    def from_outputs(cls, values, meta):
        N = meta["N"]
        P = [values[("P", i)] for i in range(N)]
        pick = lambda tag: {(k[1], k[2]): v for k, v in values.items() if k[0] == tag}
        L = {(k[1], k[2]): v for k, v in values.items() if k[0] == "L"}
        sigma = tuple(float(values[("sigma", i)][0, 0]) for i in (1, 2, 3))
        return cls(P, pick("Pbar"), pick("U"), pick("R"), pick("W"), L, sigma, meta["eta"],
                   LmiOptions.from_dict(meta["options"]))

    def to_dict(self):
        def table(d):
            return {_key_str(list(k)): np.asarray(v).tolist() for k, v in sorted(d.items())}
        return {
            "P": [np.asarray(p).tolist() for p in self.P],
            "Pbar": table(self.Pbar),
            "U": table(self.U),
            "R": table(self.R),
            "W": table(self.W),
            "L": table(self.L),
            "sigma": list(self.sigma),
            "eta": self.eta,
            "options": asdict(self.options),
            "solver_status": self.solver_status,
            "max_residual": self.max_residual,
        }

    @classmethod
    def from_dict(cls, d):
        def table(t):
            return {_key_tuple(k): np.asarray(v, dtype=float) for k, v in t.items()}
        try:
            return cls(
                P=[np.asarray(p, dtype=float) for p in d["P"]],
                Pbar=table(d["Pbar"]),
                U=table(d["U"]),
                R=table(d["R"]),
                W=table(d["W"]),
                L=table(d["L"]),
                sigma=tuple(float(s) for s in d["sigma"]),
                eta=float(d["eta"]),
                options=LmiOptions.from_dict(d["options"]),
                solver_status=d.get("solver_status", ""),
                max_residual=float(d.get("max_residual", math.nan)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed certificate: {exc}") from None

    def pbar(self, i, j):
        """Quadratic form on augmented cell ``(i, j)``."""
        if i == j:
            return lift_diagonal(self.P[i])
        return self.Pbar[i, j]


# -- assembly ----------------------------------------------------------------


def assemble_theorem2(aug: AugmentedSystem, eta: Optional[float] = None, opts: LmiOptions = LmiOptions()) -> LmiProblem:
    """Build the LMI feasibility problem for a piecewise-quadratic incremental Lyapunov function.

    Parameters
    ----------
    aug : AugmentedSystem
    eta : float, optional
        Lipschitz constant of the residual nonlinearity; defaults to
        ``aug.eta``.  ``eta = 0`` drops the residual input channel.
    opts : LmiOptions

    Returns
    -------
    LmiProblem
    """
    eta = aug.eta if eta is None else float(eta)
    if eta < 0 or not math.isfinite(eta):
        raise AssemblyError(f"eta must be finite and nonnegative, got {eta}")
    n, N, dim = aug.n, aug.N, aug.dim
    pwa = aug.pwa
    expected = 2 * N * (N - 1)
    if len(aug.facets) != expected:
        raise AssemblyError(f"expected {expected} facets, found {len(aug.facets)}")

    space = VarSpace()
    prob = LmiProblem(space)
    s1, s2, s3 = space.scalar("sigma1"), space.scalar("sigma2"), space.scalar("sigma3")
    prob.bounds += [("sigma1>=min", s1 - opts.sigma_min), ("sigma3>=min", s3 - opts.sigma_min), ("sigma2>=sigma1", s2 - s1)]
    prob.objective = s2 - s1
    for k, s in enumerate((s1, s2, s3), start=1):
        prob.outputs["sigma", k] = s

    I_n = np.eye(n)
    B, C = pwa.B, pwa.C
    D = np.array([[pwa.D]])
    penalty = eta**-2 if eta > 0 else math.inf

    P = []
    for i, cell in enumerate(pwa.cells):
        Pi = space.symmetric(f"P[{i}]", n)
        P.append(Pi)
        prob.outputs["P", i] = Pi
        prob.add_block(f"diag[{i}].lower", "diag", "psd", Pi - s1 * I_n)
        prob.add_block(f"diag[{i}].upper", "diag", "nsd", Pi - s2 * I_n)
        top = cell.A.T @ Pi + Pi @ cell.A + C.T @ C + s3 * I_n
        if math.isfinite(penalty):
            dec = bmat([[top, Pi @ B + C.T @ D], [(Pi @ B + C.T @ D).T, D.T @ D - penalty * np.eye(1)]])
        else:
            dec = top
        prob.add_block(f"diag[{i}].decrease", "diag", "nsd", dec)

    J = jbar(n)
    perm = swap_permutation(n)
    Bbar, Cbar, Dbar = aug.B, aug.C, aug.D
    I2 = ibar(1)
    K0 = kernel_directions(C) if opts.reduce else np.zeros((dim, 0))
    T = sla.null_space(K0.T) if K0.shape[1] else np.eye(dim)
    common = Bbar @ np.ones((2, 1))
    v = np.array([[1.0], [-1.0]]) / math.sqrt(2.0)
    T2 = sla.block_diag(T, np.eye(1)) if math.isfinite(penalty) else T

    pbar = {(i, i): lift_diagonal(P[i]) for i in range(N)}
    reductions = {}
    for i in range(N):
        for j in range(N):
            if i == j or (opts.swap_symmetry and i > j):
                continue
            cell = aug.cells[i, j]
            Gs = sprocedure_matrix(cell.G, opts.constant_row)
            m = Gs.shape[0]
            if opts.reduce:
                basis = sla.null_space(np.hstack([K0, cell.A @ K0, common]).T)
                Q = space.symmetric(f"Q[{i},{j}]", basis.shape[1])
                Pb = basis @ Q @ basis.T if basis.shape[1] else Affine(np.zeros((dim, dim)))
                reductions[i, j] = basis
            else:
                Pb = space.symmetric(f"Pbar[{i},{j}]", dim)
            U = space.multiplier(f"U[{i},{j}]", m, opts.zero_diagonal)
            R = space.multiplier(f"R[{i},{j}]", m, opts.zero_diagonal)
            W = space.multiplier(f"W[{i},{j}]", m, opts.zero_diagonal)
            pbar[i, j] = Pb
            for tag, M in (("Pbar", Pb), ("U", U), ("R", R), ("W", W)):
                prob.outputs[tag, i, j] = M
            if opts.swap_symmetry:
                S = multiplier_swap(len(aug.pwa.cells[i].g), len(aug.pwa.cells[j].g), opts.constant_row)
                pbar[j, i] = perm @ Pb @ perm.T
                prob.outputs["Pbar", j, i] = pbar[j, i]
                for tag, M in (("U", U), ("R", R), ("W", W)):
                    prob.outputs[tag, j, i] = S @ M @ S.T

            lower = Pb - s1 * J - Gs.T @ U @ Gs
            upper = Pb - s2 * J + Gs.T @ R @ Gs
            top = cell.A.T @ Pb + Pb @ cell.A + Cbar.T @ Cbar + s3 * J + Gs.T @ W @ Gs
            if opts.reduce:
                if math.isfinite(penalty):
                    Dv = Dbar @ v
                    off = Pb @ (Bbar @ v) + Cbar.T @ Dv
                    dec = bmat([[top, off], [off.T, Dv.T @ Dv - penalty * (v.T @ I2 @ v)]])
                else:
                    dec = top
                lower, upper, dec = T.T @ lower @ T, T.T @ upper @ T, T2.T @ dec @ T2
            elif math.isfinite(penalty):
                off = Pb @ Bbar + Cbar.T @ Dbar
                dec = bmat([[top, off], [off.T, Dbar.T @ Dbar - penalty * I2]])
            else:
                dec = top
            prob.add_block(f"off[{i},{j}].lower", "off", "psd", lower)
            prob.add_block(f"off[{i},{j}].upper", "off", "nsd", upper)
            prob.add_block(f"off[{i},{j}].decrease", "off", "nsd", dec)

    posted = {}
    for f in aug.facets:
        twin = ((f.a[1], f.a[0]), (f.b[1], f.b[0]))
        if opts.swap_symmetry and twin in posted:
            prob.outputs["L", f.a, f.b] = perm @ posted[twin]
            continue
        tag = "{},{};{},{}".format(*f.a, *f.b)
        L = space.rectangular(f"L[{tag}]", (dim, 1))
        posted[f.a, f.b] = L
        prob.outputs["L", f.a, f.b] = L
        Z = pbar[f.a] - pbar[f.b] - L @ f.E - f.E.T @ L.T
        prob.add_equality(f"facet[{tag}]", Z.upper())

    prob.meta = {
        "N": N,
        "n": n,
        "eta": eta,
        "options": asdict(opts),
        "facets": len(aug.facets),
        "posted_facets": len(posted),
        "cells_with_variables": sorted(k for k in pbar if k[0] != k[1] and (k[0] < k[1] or not opts.swap_symmetry)),
    }
    prob.meta["cells_with_variables"] = [list(k) for k in prob.meta["cells_with_variables"]]
    return prob


def assemble_circle_criterion(sys: LureSystem, center_slope: float, radius_eta: float, opts: LmiOptions = LmiOptions()) -> LmiProblem:
    """Single-cell instance: sector ``[center - radius, center + radius]``."""
    if not radius_eta > 0:
        raise AssemblyError(f"radius must be positive, got {radius_eta}")
    approx = PwaApproximation(np.empty(0), [center_slope], [0.0], radius_eta)
    return assemble_theorem2(augment(to_pwa_lure(sys, approx)), radius_eta, opts)


def census(problem: LmiProblem) -> dict:
    kinds = {}
    for spec in problem.space.specs.values():
        entry = kinds.setdefault(spec.kind, {"count": 0, "free": 0})
        entry["count"] += 1
        entry["free"] += int(len(np.unique(spec.index[spec.index >= 0])))
    families = {}
    for blk in problem.blocks:
        families[blk.family] = families.get(blk.family, 0) + 1
    return {
        "n_vars": problem.n_vars,
        "variables": kinds,
        "blocks": families,
        "block_count": len(problem.blocks),
        "equality_rows": int(sum(e.shape[0] for _, e in problem.equalities)),
        "facets": problem.meta.get("facets", 0),
        "posted_facets": problem.meta.get("posted_facets", 0),
    }


# -- text form ---------------------------------------------------------------

TEXT_HEADER = "lurecert-lmi 1"


def _write_affine(lines, expr, symmetric=False):
    r, c = np.nonzero(expr.const)
    for a, b in zip(r, c):
        if not symmetric or a <= b:
            lines.append(f"c {a} {b} {float(expr.const[a, b])!r}")
    for k in sorted(expr.terms):
        v = expr.terms[k]
        r, c = np.nonzero(v)
        for a, b in zip(r, c):
            if not symmetric or a <= b:
                lines.append(f"t {k} {a} {b} {float(v[a, b])!r}")
    lines.append("end")


def to_text(problem: LmiProblem) -> str:
    """Line-oriented dump of the problem.

    ``var`` lines give the index map of each named variable, ``block`` lines
    open an LMI whose constant (``c row col value``) and coefficient
    (``t var row col value``) entries follow; symmetric blocks list the upper
    triangle only.  ``eq`` and ``ge`` sections hold columns constrained to
    zero and to be nonnegative, ``out`` sections the certificate expressions.
    """
    lines = [TEXT_HEADER, "meta " + json.dumps(problem.meta, sort_keys=True), f"vars {problem.n_vars}"]
    for spec in problem.space.specs.values():
        rows, cols = spec.shape
        idx = " ".join(str(int(i)) for i in spec.index.reshape(-1))
        lines.append(f"var {spec.name} {spec.kind} {int(spec.nonneg)} {rows} {cols} {idx}")
    lines.append("objective 1 1")
    _write_affine(lines, problem.objective if problem.objective is not None else Affine(np.zeros((1, 1))))
    for blk in problem.blocks:
        lines.append(f"block {blk.name} {blk.family} {blk.sense} {blk.expr.shape[0]} {blk.expr.shape[1]}")
        _write_affine(lines, blk.expr, symmetric=True)
    for tag, items in (("eq", problem.equalities), ("ge", problem.bounds)):
        for name, expr in items:
            lines.append(f"{tag} {name} {expr.shape[0]} {expr.shape[1]}")
            _write_affine(lines, expr)
    for key, expr in problem.outputs.items():
        lines.append(f"out {expr.shape[0]} {expr.shape[1]} {_key_str(list(key))}")
        _write_affine(lines, expr)
    return "\n".join(lines) + "\n"


def _read_affine(it, shape, symmetric=False):
    const = np.zeros(shape)
    terms = {}
    for line in it:
        parts = line.split()
        if parts[0] == "end":
            break
        try:
            _read_entry(parts, const, terms, shape, symmetric)
        except (IndexError, ValueError):
            raise SchemaError(f"unexpected line in affine section: {line!r}") from None
    else:
        raise SchemaError("unterminated affine section")
    return Affine(const, terms)


def _read_entry(parts, const, terms, shape, symmetric):
    if parts[0] == "c":
        a, b, val = int(parts[1]), int(parts[2]), float(parts[3])
        target = const
    elif parts[0] == "t":
        k, a, b, val = int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
        target = terms.setdefault(k, np.zeros(shape))
    else:
        raise ValueError(parts[0])
    target[a, b] = val
    if symmetric:
        target[b, a] = val


def from_text(text: str) -> LmiProblem:
    it = iter(text.splitlines())
    if next(it, "").strip() != TEXT_HEADER:
        raise SchemaError("not an LMI text dump")
    space = VarSpace()
    prob = LmiProblem(space)
    for line in it:
        if not line.strip():
            continue
        head, _, rest = line.partition(" ")
        if head == "meta":
            prob.meta = json.loads(rest)
        elif head == "vars":
            space.n = int(rest)
        elif head == "var":
            parts = rest.split()
            name, kind, nonneg, rows, cols = parts[0], parts[1], bool(int(parts[2])), int(parts[3]), int(parts[4])
            index = np.array([int(v) for v in parts[5:]], dtype=int).reshape(rows, cols)
            space.specs[name] = VarSpec(name, kind, index, nonneg)
        elif head == "objective":
            prob.objective = _read_affine(it, (1, 1))
        elif head == "block":
            name, family, sense, rows, cols = rest.split()
            prob.blocks.append(LmiBlock(name, family, sense, _read_affine(it, (int(rows), int(cols)), True)))
        elif head in ("eq", "ge"):
            name, rows, cols = rest.rsplit(" ", 2)
            expr = _read_affine(it, (int(rows), int(cols)))
            (prob.equalities if head == "eq" else prob.bounds).append((name, expr))
        elif head == "out":
            rows, cols, key = rest.split(" ", 2)
            prob.outputs[_key_tuple(key)] = _read_affine(it, (int(rows), int(cols)))
        else:
            raise SchemaError(f"unknown section {head!r}")
    return prob
