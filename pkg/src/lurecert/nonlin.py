"""Scalar feedback nonlinearities and their optimal piecewise-affine approximation.

A nonlinearity is described by its value, its derivative, the slopes it tends
to for ``q -> -inf`` and ``q -> +inf`` and a few structural flags.  The
approximation divides the image of the derivative on each half-line into
equal levels, places breakpoints where the derivative crosses those levels and
uses the midpoint of the derivative range as the slope of every region.  With
this choice the error ``phi - phi_pwa`` is Lipschitz with the smallest
constant reachable for the given number of regions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import interpolate, optimize

from .errors import (
    ApproximationInvalid,
    ArgumentError,
    AssumptionViolation,
    MalformedNonlinearity,
)

__all__ = [
    "Flags",
    "Nonlinearity",
    "PwaApproximation",
    "CATALOG",
    "from_catalog",
    "linear",
    "odd_power_saturation",
    "smooth_deadzone",
    "arctan_deficit",
    "tanh_saturation",
    "arctan_saturation",
    "tabulated",
    "derivative_image_length",
    "required_partition_size",
    "build_partition",
    "evaluate_pwa",
    "region_index",
    "verify_error_lipschitz",
]

ASYMPTOTIC_TOL = 1e-8
BISECTION_XTOL = 1e-13
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class Flags:
    c1: bool = True
    asymptotically_linear: bool = True
    odd: bool = False
    monotone: bool = False
    deriv_nondecreasing_on_Rplus: bool = False

    @property
    def assumption2(self):
        return self.odd and self.monotone and self.deriv_nondecreasing_on_Rplus


class Nonlinearity:
    """Scalar memoryless nonlinearity with ``phi(0) = 0``.

    Parameters
    ----------
    fun, deriv : callable
        Vectorized evaluation of ``phi`` and ``phi'``.
    asymptotic_slopes : (float, float)
        Limits ``(k1, k2)`` of ``phi'`` at ``-inf`` and ``+inf``.
    lipschitz : float
        Global bound on ``|phi'|``.
    flags : Flags
    name, params :
        Catalog address used for serialization.
    deriv_range : callable, optional
        ``deriv_range(side)`` returns the closure of ``phi'`` over the
        half-line ``side * [0, inf)`` when it is known in closed form.
    """

    def __init__(
        self,
        fun: Callable,
        deriv: Callable,
        asymptotic_slopes: tuple[float, float],
        lipschitz: float,
        flags: Flags,
        *,
        name: str = "custom",
        params: Optional[dict] = None,
        deriv_range: Optional[Callable[[int], tuple[float, float]]] = None,
    ):
        self._fun = fun
        self._deriv = deriv
        self.asymptotic_slopes = (float(asymptotic_slopes[0]), float(asymptotic_slopes[1]))
        self.lipschitz = float(lipschitz)
        self.flags = flags
        self.name = name
        self.params = dict(params or {})
        self._deriv_range = deriv_range
        if not all(map(math.isfinite, self.asymptotic_slopes)) or not math.isfinite(self.lipschitz):
            raise MalformedNonlinearity(f"{name}: non-finite slopes or Lipschitz constant")
        phi0 = float(self.eval(0.0))
        if not math.isfinite(phi0) or abs(phi0) > 1e-12:
            raise MalformedNonlinearity(f"{name}: phi(0) = {phi0}, expected 0")

    def eval(self, q):
        return self._fun(np.asarray(q, dtype=float))

    __call__ = eval

    def deriv(self, q):
        return self._deriv(np.asarray(q, dtype=float))

    def deriv_range(self, side):
        if self._deriv_range is None:
            return None
        return self._deriv_range(side)

    def to_dict(self):
        return {"catalog": self.name, "params": _jsonable(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if k != "table")
        return f"<Nonlinearity {self.name}({args})>"


def _jsonable(params):
    out = {}
    for k, v in params.items():
        out[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
    return out


# -- catalog ---------------------------------------------------------------


def linear(k=1.0):
    """``phi(q) = k q``."""
    k = float(k)
    return Nonlinearity(
        lambda q: k * q,
        lambda q: np.full_like(q, k),
        (k, k),
        abs(k),
        Flags(odd=True, monotone=k >= 0, deriv_nondecreasing_on_Rplus=True),
        name="linear",
        params={"k": k},
        deriv_range=lambda side: (k, k),
    )


def odd_power_saturation(coef=2.0, power=3.0, q_sat=1.0):
    """Odd power law ``coef*sign(q)*|q|**power`` continued linearly beyond ``q_sat``."""
    coef, power, q_sat = float(coef), float(power), float(q_sat)
    if power < 1 or q_sat <= 0 or coef < 0:
        raise ArgumentError("odd_power_saturation needs power >= 1, q_sat > 0, coef >= 0")
    k = coef * power * q_sat ** (power - 1)
    phi_sat = coef * q_sat**power

    def fun(q):
        a = np.abs(q)
        inner = coef * a**power
        outer = phi_sat + k * (a - q_sat)
        return np.sign(q) * np.where(a <= q_sat, inner, outer)

    def deriv(q):
        a = np.minimum(np.abs(q), q_sat)
        return coef * power * a ** (power - 1)

    d0 = coef if power == 1 else 0.0
    return Nonlinearity(
        fun,
        deriv,
        (k, k),
        k,
        Flags(odd=True, monotone=True, deriv_nondecreasing_on_Rplus=True),
        name="odd_power_saturation",
        params={"coef": coef, "power": power, "q_sat": q_sat},
        deriv_range=lambda side: (d0, k),
    )


def smooth_deadzone(k=1.0, width=1.0):
    """``k (q - w tanh(q/w))``; slope 0 at the origin rising to ``k``."""
    k, w = float(k), float(width)
    if k < 0 or w <= 0:
        raise ArgumentError("smooth_deadzone needs k >= 0 and width > 0")
    return Nonlinearity(
        lambda q: k * (q - w * np.tanh(q / w)),
        lambda q: k * np.tanh(q / w) ** 2,
        (k, k),
        k,
        Flags(odd=True, monotone=True, deriv_nondecreasing_on_Rplus=True),
        name="smooth_deadzone",
        params={"k": k, "width": w},
        deriv_range=lambda side: (0.0, k),
    )


def arctan_deficit(k=2.0, a=1.0, width=1.0):
    """``k q - a w arctan(q/w)``; slope ``k - a`` at the origin rising to ``k``."""
    k, a, w = float(k), float(a), float(width)
    if a < 0 or w <= 0:
        raise ArgumentError("arctan_deficit needs a >= 0 and width > 0")
    return Nonlinearity(
        lambda q: k * q - a * w * np.arctan(q / w),
        lambda q: k - a / (1.0 + (q / w) ** 2),
        (k, k),
        max(abs(k), abs(k - a)),
        Flags(odd=True, monotone=k >= a, deriv_nondecreasing_on_Rplus=True),
        name="arctan_deficit",
        params={"k": k, "a": a, "width": w},
        deriv_range=lambda side: (k - a, k),
    )


def tanh_saturation(k=1.0, width=1.0):
    """``k w tanh(q/w)``; slope ``k`` at the origin decaying to 0."""
    k, w = float(k), float(width)
    if k < 0 or w <= 0:
        raise ArgumentError("tanh_saturation needs k >= 0 and width > 0")
    return Nonlinearity(
        lambda q: k * w * np.tanh(q / w),
        lambda q: k * (1.0 - np.tanh(q / w) ** 2),
        (0.0, 0.0),
        k,
        Flags(odd=True, monotone=True, deriv_nondecreasing_on_Rplus=False),
        name="tanh_saturation",
        params={"k": k, "width": w},
        deriv_range=lambda side: (0.0, k),
    )


def arctan_saturation(k=1.0, width=1.0):
    """``k w arctan(q/w)``; slope ``k`` at the origin decaying to 0."""
    k, w = float(k), float(width)
    if k < 0 or w <= 0:
        raise ArgumentError("arctan_saturation needs k >= 0 and width > 0")
    return Nonlinearity(
        lambda q: k * w * np.arctan(q / w),
        lambda q: k / (1.0 + (q / w) ** 2),
        (0.0, 0.0),
        k,
        Flags(odd=True, monotone=True, deriv_nondecreasing_on_Rplus=False),
        name="arctan_saturation",
        params={"k": k, "width": w},
        deriv_range=lambda side: (0.0, k),
    )


def tabulated(table, rtol=1e-3):
    """Nonlinearity from rows ``(q, phi(q), phi'(q))``.

    The derivative is the monotone cubic (PCHIP) interpolant of the ``phi'``
    column, held constant outside the table.  ``phi`` is its integral from
    zero, so ``phi(0) = 0`` holds exactly; the ``phi`` column is only used to
    check consistency with relative tolerance ``rtol``.
    """
    tab = np.asarray(table, dtype=float)
    if tab.ndim != 2 or tab.shape[1] != 3 or tab.shape[0] < 3:
        raise MalformedNonlinearity("table must have at least 3 rows of (q, phi, dphi)")
    if not np.all(np.isfinite(tab)):
        raise MalformedNonlinearity("table contains non-finite entries")
    q, phi, dphi = tab.T
    if np.any(np.diff(q) <= 0):
        raise MalformedNonlinearity("table q column must be strictly increasing")
    if not q[0] < 0 < q[-1]:
        raise MalformedNonlinearity("table must straddle q = 0")
    d_interp = interpolate.PchipInterpolator(q, dphi, extrapolate=False)
    prim = d_interp.antiderivative()
    offset = float(prim(0.0))
    q_lo, q_hi = q[0], q[-1]
    phi_lo, phi_hi = float(prim(q_lo)) - offset, float(prim(q_hi)) - offset
    k1, k2 = float(dphi[0]), float(dphi[-1])

    def deriv(x):
        x = np.asarray(x, dtype=float)
        inner = d_interp(np.clip(x, q_lo, q_hi))
        return np.where(x < q_lo, k1, np.where(x > q_hi, k2, inner))

    def fun(x):
        x = np.asarray(x, dtype=float)
        inner = prim(np.clip(x, q_lo, q_hi)) - offset
        return np.where(x < q_lo, phi_lo + k1 * (x - q_lo), np.where(x > q_hi, phi_hi + k2 * (x - q_hi), inner))

    scale = max(1.0, float(np.max(np.abs(phi))))
    mismatch = float(np.max(np.abs(fun(q) - phi)))
    if mismatch > rtol * scale:
        raise MalformedNonlinearity(
            f"phi column disagrees with the integrated derivative by {mismatch:.3g}"
        )

    symmetric = q_lo == -q_hi
    odd = bool(symmetric and np.allclose(fun(-q), -fun(q), rtol=0, atol=1e-9 * scale))
    pos = dphi[q >= 0]
    flags = Flags(
        odd=odd,
        monotone=bool(np.all(dphi >= 0)),
        deriv_nondecreasing_on_Rplus=bool(np.all(np.diff(pos) >= 0)),
    )
    return Nonlinearity(
        fun,
        deriv,
        (k1, k2),
        float(np.max(np.abs(dphi))),
        flags,
        name="tabulated",
        params={"table": tab.tolist(), "rtol": rtol},
    )


CATALOG = {
    "linear": linear,
    "odd_power_saturation": odd_power_saturation,
    "smooth_deadzone": smooth_deadzone,
    "arctan_deficit": arctan_deficit,
    "tanh_saturation": tanh_saturation,
    "arctan_saturation": arctan_saturation,
    "tabulated": tabulated,
}


def from_catalog(name, params=None):
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ArgumentError(f"unknown nonlinearity {name!r}; known: {sorted(CATALOG)}") from None
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {name}: {exc}") from None


# -- derivative image --------------------------------------------------------


def _slope_at(nl, side):
    return nl.asymptotic_slopes[1] if side > 0 else nl.asymptotic_slopes[0]


def _deriv_checked(nl, q):
    d = nl.deriv(q)
    if not np.all(np.isfinite(d)):
        raise MalformedNonlinearity(f"{nl.name}: non-finite derivative sample")
    return d


def _asymptotic_radius(nl, side, tol=ASYMPTOTIC_TOL):
    """Smallest ``2**k`` beyond which ``phi'`` sits within ``tol`` of its limit."""
    k = _slope_at(nl, side)
    q = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if abs(float(_deriv_checked(nl, side * q)) - k) <= tol:
            return q
        q *= 2.0
    raise AssumptionViolation(f"{nl.name}: derivative does not approach {k} for side {side:+d}")


def _halfline_samples(nl, side, n=4001):
    q_max = _asymptotic_radius(nl, side)
    q = np.unique(np.concatenate([
        [0.0],
        np.linspace(0.0, q_max, n),
        np.geomspace(q_max * 1e-9, q_max, n),
        np.geomspace(q_max, q_max * 1e3, n // 4),
    ]))
    d = _deriv_checked(nl, side * q)
    return q, np.append(d, _slope_at(nl, side))


def _halfline_range(nl, side):
    rng = nl.deriv_range(side)
    if rng is not None:
        return float(rng[0]), float(rng[1])
    _, d = _halfline_samples(nl, side)
    return float(d.min()), float(d.max())


def derivative_image_length(nl: Nonlinearity, side: int = 1) -> float:
    """Length of the interval ``phi'(side * [0, inf))``."""
    lo, hi = _halfline_range(nl, side)
    return hi - lo


def _halfline_direction(nl, side):
    """+1 if ``phi'`` increases away from 0 on the half-line, -1 if it decreases, 0 if flat."""
    d0 = float(_deriv_checked(nl, 0.0))
    k = _slope_at(nl, side)
    scale = max(1.0, abs(d0), abs(k))
    if abs(k - d0) <= 1e-12 * scale:
        return 0
    direction = 1 if k > d0 else -1
    _, d = _halfline_samples(nl, side)
    if np.any(direction * np.diff(d) < -1e-9 * scale):
        raise AssumptionViolation(
            f"{nl.name}: derivative is not monotone on the {'positive' if side > 0 else 'negative'} half-line"
        )
    return direction


def _m_for(length, eta_ref):
    if length <= 0:
        return 0
    return max(math.ceil(length / (2.0 * eta_ref)) - 1, 0)


def required_partition_size(nl: Nonlinearity, eta_ref: float) -> tuple[int, int]:
    """Number of levels per half-line ``m`` and number of regions ``N = 2m + 1``.

    For a nonlinearity that is not odd the larger of the two half-line
    lengths sets ``m``.
    """
    if not eta_ref > 0:
        raise ArgumentError(f"eta_ref must be positive, got {eta_ref}")
    length = derivative_image_length(nl, 1)
    if not nl.flags.odd:
        length = max(length, derivative_image_length(nl, -1))
    m = _m_for(length, eta_ref)
    return m, 2 * m + 1


# -- approximation -----------------------------------------------------------


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PwaApproximation:
    """Continuous piecewise-affine ``phi_pwa(q) = r_i q + s_i`` on ``N`` regions.

    Region ``i`` is ``[q_{i-1}, q_i]`` with ``q_{-1} = -inf`` and
    ``q_{N-1} = +inf``, so ``breakpoints`` has ``N - 1`` entries.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    eta: float
    images: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _frozen(self.breakpoints).reshape(-1))
        object.__setattr__(self, "slopes", _frozen(self.slopes).reshape(-1))
        object.__setattr__(self, "intercepts", _frozen(self.intercepts).reshape(-1))
        object.__setattr__(self, "eta", float(self.eta))
        if self.images is not None:
            object.__setattr__(self, "images", _frozen(self.images).reshape(-1, 2))
        if len(self.slopes) != len(self.breakpoints) + 1 or len(self.intercepts) != len(self.slopes):
            raise ArgumentError("need len(slopes) == len(intercepts) == len(breakpoints) + 1")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ArgumentError("breakpoints must be strictly increasing")
        if not self.eta >= 0:
            raise ArgumentError("eta must be nonnegative")

    @property
    def N(self):
        return len(self.slopes)

    @property
    def regions(self):
        edges = np.concatenate([[-np.inf], self.breakpoints, [np.inf]])
        return [(float(edges[i]), float(edges[i + 1])) for i in range(self.N)]

    @property
    def center(self):
        """Index of the region containing ``q = 0``."""
        return int(region_index(self, 0.0))

    def __call__(self, q):
        return evaluate_pwa(self, q)

    def continuity_residual(self):
        if self.N == 1:
            return 0.0
        q = self.breakpoints
        left = self.slopes[:-1] * q + self.intercepts[:-1]
        right = self.slopes[1:] * q + self.intercepts[1:]
        return float(np.max(np.abs(left - right) / np.maximum(1.0, np.abs(left))))

    def to_dict(self):
        out = {
            "N": self.N,
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
            "eta": self.eta,
        }
        if self.images is not None:
            out["images"] = self.images.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(
            breakpoints=np.asarray(d["breakpoints"], dtype=float),
            slopes=np.asarray(d["slopes"], dtype=float),
            intercepts=np.asarray(d["intercepts"], dtype=float),
            eta=float(d["eta"]),
            images=None if d.get("images") is None else np.asarray(d["images"], dtype=float),
        )


def region_index(approx: PwaApproximation, q):
    """Region containing ``q``; a breakpoint belongs to the region on its left."""
    return np.searchsorted(approx.breakpoints, q, side="left")


def evaluate_pwa(approx: PwaApproximation, q):
    q = np.asarray(q, dtype=float)
    i = region_index(approx, q)
    return approx.slopes[i] * q + approx.intercepts[i]


def _levels(d0, k, m):
    return d0 + (k - d0) * np.arange(m + 2) / (m + 1)


def _locate(nl, side, level):
    """Solve ``phi'(side * q) = level`` for ``q > 0`` by bracketing root search."""
    f = lambda q: float(_deriv_checked(nl, side * q)) - level
    lo, hi = 0.0, _asymptotic_radius(nl, side)
    f_lo = f(lo)
    for _ in range(_MAX_DOUBLINGS):
        if f_lo * f(hi) < 0:
            break
        hi *= 2.0
    else:
        raise AssumptionViolation(f"{nl.name}: cannot bracket phi'(q) = {level} on side {side:+d}")
    return optimize.brentq(f, lo, hi, xtol=BISECTION_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def _side_partition(nl, side, m):
    """Breakpoints ``|q|`` (increasing) and level boundaries for one half-line."""
    d0 = float(_deriv_checked(nl, 0.0))
    k = _slope_at(nl, side)
    levels = _levels(d0, k, m)
    qs = np.array([_locate(nl, side, levels[i]) for i in range(1, m + 1)])
    if np.any(np.diff(qs) <= 0):
        raise AssumptionViolation(f"{nl.name}: breakpoints on side {side:+d} are not increasing")
    return qs, levels


def _single_region(nl):
    lo_p, hi_p = _halfline_range(nl, 1)
    lo_n, hi_n = _halfline_range(nl, -1)
    lo, hi = min(lo_p, lo_n), max(hi_p, hi_n)
    return PwaApproximation(
        breakpoints=np.empty(0),
        slopes=[(lo + hi) / 2.0],
        intercepts=[0.0],
        eta=(hi - lo) / 2.0,
        images=[[lo, hi]],
    )


def _assemble(nl, m_neg, m_pos):
    if m_neg == 0 and m_pos == 0:
        return _single_region(nl)
    q_pos, lv_pos = _side_partition(nl, 1, m_pos) if m_pos else (np.empty(0), None)
    if nl.flags.odd and m_neg == m_pos:
        q_neg, lv_neg = q_pos, lv_pos
    else:
        q_neg, lv_neg = _side_partition(nl, -1, m_neg) if m_neg else (np.empty(0), None)
    d0 = float(_deriv_checked(nl, 0.0))

    def images(levels, k_inf, m):
        if m == 0:
            return [(min(d0, k_inf), max(d0, k_inf))]
        return [(min(levels[i], levels[i + 1]), max(levels[i], levels[i + 1])) for i in range(m + 1)]

    img_pos = images(lv_pos, _slope_at(nl, 1), m_pos)
    img_neg = images(lv_neg, _slope_at(nl, -1), m_neg)
    center = (min(img_pos[0][0], img_neg[0][0]), max(img_pos[0][1], img_neg[0][1]))
    imgs = img_neg[:0:-1] + [center] + img_pos[1:]
    imgs = np.array(imgs, dtype=float)
    slopes = imgs.mean(axis=1)
    eta = float(np.max(imgs[:, 1] - imgs[:, 0]) / 2.0)
    breakpoints = np.concatenate([-q_neg[::-1], q_pos])
    N = len(slopes)
    c = m_neg
    if nl.flags.odd and m_neg == m_pos:
        # enforce exact odd symmetry instead of relying on rounding
        slopes[:c] = slopes[:c:-1]
        imgs[:c] = imgs[:c:-1]
    intercepts = np.zeros(N)
    for i in range(c, N - 1):
        intercepts[i + 1] = intercepts[i] + (slopes[i] - slopes[i + 1]) * breakpoints[i]
    if nl.flags.odd and m_neg == m_pos:
        intercepts[:c] = -intercepts[:c:-1]
    else:
        for i in range(c - 1, -1, -1):
            intercepts[i] = intercepts[i + 1] + (slopes[i + 1] - slopes[i]) * breakpoints[i]
    if nl.flags.deriv_nondecreasing_on_Rplus and nl.flags.odd and m_neg == m_pos:
        eta = derivative_image_length(nl, 1) / (2.0 * (m_pos + 1))
    return PwaApproximation(breakpoints, slopes, intercepts, eta, images=imgs)


def build_partition(
    nl: Nonlinearity,
    eta_ref: Optional[float] = None,
    *,
    n_regions: Optional[int] = None,
) -> PwaApproximation:
    """Optimal piecewise-affine approximation of ``nl``.

    Parameters
    ----------
    nl : Nonlinearity
    eta_ref : float, optional
        Target Lipschitz constant of the approximation error.
    n_regions : int, optional
        Force an odd number of regions instead of deriving it from
        ``eta_ref``.

    Returns
    -------
    PwaApproximation
        ``eta`` is the exact Lipschitz constant of ``phi - phi_pwa``.
    """
    if n_regions is not None:
        if n_regions < 1 or n_regions % 2 == 0:
            raise ArgumentError(f"forced region count must be odd and positive, got {n_regions}")
        m = (n_regions - 1) // 2
        if m:
            _halfline_direction(nl, 1)
            _halfline_direction(nl, -1)
        return _assemble(nl, m, m)
    if eta_ref is None or not eta_ref > 0:
        raise ArgumentError(f"eta_ref must be positive, got {eta_ref}")
    dir_pos = _halfline_direction(nl, 1)
    dir_neg = _halfline_direction(nl, -1)
    if nl.flags.odd:
        m_pos = m_neg = required_partition_size(nl, eta_ref)[0]
    else:
        m_pos = _m_for(derivative_image_length(nl, 1), eta_ref)
        m_neg = _m_for(derivative_image_length(nl, -1), eta_ref)
    approx = _assemble(nl, m_neg, m_pos)
    # opposite trends on the two half-lines widen the center image
    while approx.eta > eta_ref and dir_pos * dir_neg != 0:
        m_neg, m_pos = m_neg + 1, m_pos + 1
        approx = _assemble(nl, m_neg, m_pos)
    return approx


def _verification_grid(nl, approx, grid_size):
    """Pairs ``(q, region)`` covering every region including its endpoints."""
    regions = approx.regions
    reach = max(_asymptotic_radius(nl, 1), _asymptotic_radius(nl, -1))
    if approx.N > 1:
        reach = max(reach, 3.0 * float(np.max(np.abs(approx.breakpoints))))
    n_tail = max(grid_size // 10, 10)
    n_body = max(grid_size - 2 * n_tail, 10)
    lo_b = approx.breakpoints[0] if approx.N > 1 else 0.0
    hi_b = approx.breakpoints[-1] if approx.N > 1 else 0.0
    span = (hi_b + reach) - (lo_b - reach)
    qs, idx = [], []
    for i, (a, b) in enumerate(regions):
        a_f = a if math.isfinite(a) else lo_b - reach
        b_f = b if math.isfinite(b) else hi_b + reach
        count = max(int(n_body * (b_f - a_f) / span), 3)
        pts = np.linspace(a_f, b_f, count)
        if not math.isfinite(a):
            pts = np.concatenate([-np.geomspace(reach, reach * 1e6, n_tail) + lo_b, pts])
        if not math.isfinite(b):
            pts = np.concatenate([pts, np.geomspace(reach, reach * 1e6, n_tail) + hi_b])
        qs.append(pts)
        idx.append(np.full(len(pts), i))
    return np.concatenate(qs), np.concatenate(idx)


def verify_error_lipschitz(
    nl: Nonlinearity, approx: PwaApproximation, grid_size: int = 100_000, tol: float = 1e-6
) -> float:
    """Sampled ``sup |phi'(q) - r_i|``; raises if it exceeds ``approx.eta + tol``."""
    if grid_size < 1000:
        raise ArgumentError("grid_size must be at least 1000")
    q, idx = _verification_grid(nl, approx, grid_size)
    eps_prime = np.abs(_deriv_checked(nl, q) - approx.slopes[idx])
    eta_emp = float(np.max(eps_prime))
    if eta_emp > approx.eta + tol:
        worst = float(q[np.argmax(eps_prime)])
        raise ApproximationInvalid(
            f"|eps'| reaches {eta_emp:.6g} at q = {worst:.6g}, above eta = {approx.eta:.6g}"
        )
    return eta_emp
