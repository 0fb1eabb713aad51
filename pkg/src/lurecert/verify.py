"""Independent numerical checks of a certificate and of the system it certifies."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .errors import ArgumentError, IntegrationError
from .lmi import Certificate, ibar, jbar, sprocedure_matrix
from .reformulate import AugmentedSystem, LureSystem, locate_cells

__all__ = [
    "ResidualReport",
    "check_certificate",
    "evaluate_V",
    "TrajectoryPair",
    "simulate_pair",
    "DecreaseReport",
    "check_decrease",
    "hinf_channel_gain",
    "sample_cell_points",
    "check_bounds",
    "facet_continuity",
]


def _psd_violation(M):
    M = (M + M.T) / 2
    return max(-float(np.linalg.eigvalsh(M)[0]), 0.0) / max(1.0, float(np.max(np.abs(M))))


def _nsd_violation(M):
    return _psd_violation(-M)


@dataclass
class ResidualReport:
    passed: bool
    tol: float
    max_residual: float
    worst: str
    families: dict
    items: dict = field(repr=False, default_factory=dict)

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "max_residual": self.max_residual,
            "worst": self.worst,
            "families": self.families,
        }


def check_certificate(cert: Certificate, aug: AugmentedSystem, tol: float = 1e-7, eta: Optional[float] = None) -> ResidualReport:
    """Re-evaluate every condition at the certificate values.

    The blocks are rebuilt from the augmented system in their unreduced form,
    with the full residual input ``(p, pt)``, for every ordered pair of
    distinct cells and every facet, regardless of the reductions used when
    the problem was solved.
    """
    eta = cert.eta if eta is None else eta
    n, N = aug.n, aug.N
    pwa = aug.pwa
    s1, s2, s3 = cert.sigma
    items = {}
    fam = {"sigma": 0.0, "diag": 0.0, "off": 0.0, "multiplier": 0.0, "facet": 0.0}

    def record(family, name, value):
        items[name] = value
        fam[family] = max(fam[family], value)

    record("sigma", "sigma1>0", 0.0 if s1 > 0 else math.inf)
    record("sigma", "sigma3>0", 0.0 if s3 > 0 else math.inf)
    record("sigma", "sigma2>=sigma1", max(0.0, s1 - s2))

    In = np.eye(n)
    B, C, D = pwa.B, pwa.C, np.array([[pwa.D]])
    finite = eta > 0
    pen = eta**-2 if finite else 0.0
    for i, cell in enumerate(pwa.cells):
        P = np.asarray(cert.P[i])
        record("diag", f"diag[{i}].symmetric", float(np.max(np.abs(P - P.T))))
        record("diag", f"diag[{i}].lower", _psd_violation(P - s1 * In))
        record("diag", f"diag[{i}].upper", _nsd_violation(P - s2 * In))
        top = cell.A.T @ P + P @ cell.A + C.T @ C + s3 * In
        if finite:
            off = P @ B + C.T @ D
            dec = np.block([[top, off], [off.T, D.T @ D - pen * np.eye(1)]])
        else:
            dec = top
        record("diag", f"diag[{i}].decrease", _nsd_violation(dec))

    J = jbar(n)
    Ib = ibar(1)
    Bb, Cb, Db = aug.B, aug.C, aug.D
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            cell = aug.cells[i, j]
            Gs = sprocedure_matrix(cell.G, cert.options.constant_row)
            X = np.asarray(cert.Pbar[i, j])
            U, R, W = (np.asarray(d[i, j]) for d in (cert.U, cert.R, cert.W))
            tag = f"off[{i},{j}]"
            for name, M in (("U", U), ("R", R), ("W", W)):
                bad = max(0.0, -float(M.min())) + float(np.max(np.abs(M - M.T)))
                if cert.options.zero_diagonal:
                    bad += float(np.max(np.abs(np.diag(M))))
                record("multiplier", f"{tag}.{name}", bad / max(1.0, float(np.max(np.abs(M)))))
            record("off", f"{tag}.symmetric", float(np.max(np.abs(X - X.T))))
            record("off", f"{tag}.lower", _psd_violation(X - s1 * J - Gs.T @ U @ Gs))
            record("off", f"{tag}.upper", _nsd_violation(X - s2 * J + Gs.T @ R @ Gs))
            top = cell.A.T @ X + X @ cell.A + Cb.T @ Cb + s3 * J + Gs.T @ W @ Gs
            if finite:
                off = X @ Bb + Cb.T @ Db
                dec = np.block([[top, off], [off.T, Db.T @ Db - pen * Ib]])
            else:
                dec = top
            record("off", f"{tag}.decrease", _nsd_violation(dec))

    for f in aug.facets:
        Xa, Xb = cert.pbar(*f.a), cert.pbar(*f.b)
        L = np.asarray(cert.L[f.a, f.b])
        Z = Xa - Xb - L @ f.E - f.E.T @ L.T
        scale = max(1.0, float(np.max(np.abs(Xa))), float(np.max(np.abs(Xb))))
        record("facet", f"facet[{f.a},{f.b}]", float(np.max(np.abs(Z))) / scale)

    worst = max(items, key=items.get)
    max_res = items[worst]
    return ResidualReport(max_res <= tol, tol, max_res, worst, fam, items)


def evaluate_V(cert: Certificate, aug: AugmentedSystem, x, x_tilde):
    """Piecewise quadratic ``V(x, xt)`` for single points or stacked rows."""
    x = np.asarray(x, dtype=float)
    xt = np.asarray(x_tilde, dtype=float)
    single = x.ndim == 1
    x, xt = np.atleast_2d(x), np.atleast_2d(xt)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xt))):
        raise ArgumentError("cannot locate a non-finite state in the partition")
    c = aug.pwa.C[0]
    ci = locate_cells(aug.breakpoints, x @ c)
    cj = locate_cells(aug.breakpoints, xt @ c)
    xb = aug.lift(x, xt)
    out = np.empty(len(x))
    for i, j in set(zip(ci.tolist(), cj.tolist())):
        mask = (ci == i) & (cj == j)
        X = cert.pbar(i, j)
        out[mask] = np.einsum("ki,ij,kj->k", xb[mask], X, xb[mask])
    return float(out[0]) if single else out


@dataclass
class TrajectoryPair:
    times: np.ndarray
    x: np.ndarray
    x_tilde: np.ndarray
    V: Optional[np.ndarray] = None
    delta_norm: np.ndarray = None

    def __post_init__(self):
        if self.delta_norm is None:
            self.delta_norm = np.linalg.norm(self.x - self.x_tilde, axis=1)

    @property
    def ratio(self):
        d0 = self.delta_norm[0]
        return float(self.delta_norm[-1] / d0) if d0 > 0 else 0.0

    def to_csv(self, fh=None):
        """Rows ``t, x_1..x_n, xt_1..xt_n, |dx|, V``; returns text if ``fh`` is None."""
        n = self.x.shape[1]
        header = ["t"] + [f"x{k + 1}" for k in range(n)] + [f"xt{k + 1}" for k in range(n)] + ["dx_norm", "V"]
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        V = self.V if self.V is not None else np.full(len(self.times), np.nan)
        for k in range(len(self.times)):
            w.writerow([repr(float(v)) for v in (self.times[k], *self.x[k], *self.x_tilde[k], self.delta_norm[k], V[k])])
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        n = (len(header) - 3) // 2
        V = data[:, -1]
        return cls(
            times=data[:, 0],
            x=data[:, 1:1 + n],
            x_tilde=data[:, 1 + n:1 + 2 * n],
            V=None if np.all(np.isnan(V)) else V,
            delta_norm=data[:, -2],
        )


def simulate_pair(
    sys: LureSystem,
    x0,
    x0_tilde,
    T: float,
    cert: Optional[Certificate] = None,
    aug: Optional[AugmentedSystem] = None,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "DOP853",
    rhs=None,
    t_eval=None,
) -> TrajectoryPair:
    """Integrate the original system from two initial states on one adaptive grid.

    ``rhs`` replaces the vector field (used to integrate the piecewise-affine
    reformulation for cross-validation); ``t_eval`` reports the solution at
    fixed times instead of the accepted steps.
    """
    if not T > 0:
        raise ArgumentError("horizon T must be positive")
    f = sys.rhs if rhs is None else rhs
    n = sys.n
    z0 = np.concatenate([np.asarray(x0, dtype=float), np.asarray(x0_tilde, dtype=float)])

    def stacked(_, z):
        return np.concatenate([f(z[:n]), f(z[n:])])

    sol = integrate.solve_ivp(stacked, (0.0, T), z0, method=method, rtol=rtol, atol=atol, t_eval=t_eval)
    if sol.status != 0:
        raise IntegrationError(f"integration stopped: {sol.message}", float(sol.t[-1]))
    x, xt = sol.y[:n].T, sol.y[n:].T
    V = None
    if cert is not None:
        if aug is None:
            raise ArgumentError("evaluating V needs the augmented system")
        V = evaluate_V(cert, aug, x, xt)
    return TrajectoryPair(sol.t, x, xt, V)


@dataclass
class DecreaseReport:
    passed: bool
    max_increase: float
    envelope_excess: float
    offending_time: Optional[float]
    reason: str = ""


def check_decrease(cert: Certificate, pair: TrajectoryPair, tol: float = 1e-4) -> DecreaseReport:
    """Monotone decrease of ``V`` and the exponential envelope ``V(0) exp(-s3/s2 t)``."""
    if pair.V is None:
        raise ArgumentError("trajectory pair has no V series")
    V = pair.V
    V0 = V[0]
    if V0 <= 0:
        ok = bool(np.all(np.abs(V) <= tol * max(1.0, float(np.max(np.abs(V)))) + 1e-300))
        return DecreaseReport(ok, 0.0, 0.0, None, "" if ok else "V nonzero from a zero start")
    inc = np.diff(V)
    k_inc = int(np.argmax(inc)) if len(inc) else 0
    max_inc = float(inc[k_inc]) if len(inc) else 0.0
    _, s2, s3 = cert.sigma
    envelope = V0 * np.exp(-(s3 / s2) * pair.times) * (1 + tol)
    excess = V - envelope
    k_env = int(np.argmax(excess))
    if max_inc > tol * V0:
        return DecreaseReport(False, max_inc, float(excess[k_env]), float(pair.times[k_inc + 1]), "V increased")
    if excess[k_env] > 0:
        return DecreaseReport(False, max_inc, float(excess[k_env]), float(pair.times[k_env]), "envelope exceeded")
    return DecreaseReport(True, max_inc, float(excess[k_env]), None)


def hinf_channel_gain(sys: LureSystem, center_slope: float) -> float:
    """Peak gain of ``C (jw - A + k B C)^-1 B`` over frequency."""
    Ac = sys.A - center_slope * sys.B @ sys.C
    eig = np.linalg.eigvals(Ac)
    if np.max(eig.real) >= 0:
        raise ArgumentError("centered system matrix is not Hurwitz")
    n = sys.n
    B, C = sys.B.astype(complex), sys.C.astype(complex)

    def gain(w):
        return float(abs((C @ np.linalg.solve(1j * w * np.eye(n) - Ac, B))[0, 0]))

    scale = float(np.max(np.abs(eig)))
    grid = np.concatenate([[0.0], np.logspace(-4, 4, 2000) * scale])
    vals = np.array([gain(w) for w in grid])
    k = int(np.argmax(vals))
    best = vals[k]
    if 0 < k < len(grid) - 1:
        lo, hi = np.log(max(grid[k - 1], 1e-300)), np.log(grid[k + 1])
        res = optimize.minimize_scalar(lambda s: -gain(math.exp(s)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return best


def sample_cell_points(aug: AugmentedSystem, i: int, count: int, rng, scale: float = 3.0):
    """Random points of cell ``i``: the ``C x`` channel inside the (clipped) interval, unit spread elsewhere."""
    c = aug.pwa.C[0]
    n = aug.n
    bp = aug.breakpoints
    reach = scale * max(1.0, float(np.max(np.abs(bp)))) if len(bp) else scale
    lo, hi = aug.pwa.cells[i].interval
    lo = max(lo, -reach) if math.isfinite(lo) else -reach
    hi = min(hi, reach) if math.isfinite(hi) else reach
    if not lo < hi:
        lo, hi = aug.pwa.cells[i].interval[0], aug.pwa.cells[i].interval[0] + reach
    q = rng.uniform(lo, hi, count)
    cn = c / np.dot(c, c)
    x = rng.uniform(-scale, scale, (count, n))
    x = x - np.outer(x @ c, cn) + np.outer(q, cn)
    return x


def check_bounds(cert: Certificate, aug: AugmentedSystem, samples_per_cell: int = 1000, seed: int = 0,
                 scale: float = 3.0):
    """Worst violation of ``s1 |dx|^2 <= V <= s2 |dx|^2`` on sampled cell pairs.

    Violations are divided by ``max(1, s2) |(x, xt, 1)|^2``, the scale at which
    a block residual of the same size bounds the quadratic form.
    """
    rng = np.random.default_rng(seed)
    s1, s2, _ = cert.sigma
    worst = 0.0
    for i in range(aug.N):
        for j in range(aug.N):
            x = sample_cell_points(aug, i, samples_per_cell, rng, scale)
            xt = sample_cell_points(aug, j, samples_per_cell, rng, scale)
            V = evaluate_V(cert, aug, x, xt)
            d2 = np.sum((x - xt) ** 2, axis=1)
            norm = max(1.0, s2) * (1.0 + np.sum(x**2, axis=1) + np.sum(xt**2, axis=1))
            viol = np.maximum(s1 * d2 - V, V - s2 * d2) / norm
            worst = max(worst, float(np.max(viol)))
    return worst


def facet_continuity(cert: Certificate, aug: AugmentedSystem, points_per_facet: int = 100, seed: int = 0,
                     scale: float = 3.0):
    """Worst ``|V_a - V_b| / (1 + |V|)`` at sampled points of every facet."""
    rng = np.random.default_rng(seed)
    c = aug.pwa.C[0]
    cn = c / np.dot(c, c)
    worst = 0.0
    for f in aug.facets:
        x = sample_cell_points(aug, f.a[0], points_per_facet, rng, scale)
        xt = sample_cell_points(aug, f.a[1], points_per_facet, rng, scale)
        if f.a[0] != f.b[0]:
            q = aug.breakpoints[f.a[0]]
            x = x - np.outer(x @ c - q, cn)
        else:
            q = aug.breakpoints[f.a[1]]
            xt = xt - np.outer(xt @ c - q, cn)
        xb = aug.lift(x, xt)
        Va = np.einsum("ki,ij,kj->k", xb, cert.pbar(*f.a), xb)
        Vb = np.einsum("ki,ij,kj->k", xb, cert.pbar(*f.b), xb)
        worst = max(worst, float(np.max(np.abs(Va - Vb) / (1.0 + np.abs(Va)))))
    return worst
