"""Conic backends and the end-to-end certification pipeline."""
from __future__ import annotations

import logging
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import ArgumentError, InfeasibleProblem, SolverFailure
from .lmi import Certificate, CompiledProblem, LmiOptions, LmiProblem, assemble_theorem2, census
from .nonlin import PwaApproximation, build_partition
from .reformulate import LureSystem, augment, to_pwa_lure

__all__ = [
    "SolverOptions",
    "BackendResult",
    "BACKENDS",
    "register_backend",
    "solve_feasibility",
    "CertifyReport",
    "certify",
    "TOL_ENV",
]

log = logging.getLogger(__name__)

TOL_ENV = "LURECERT_SOLVER_TOL"


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tolerance: float = 1e-8
    max_iterations: int = 500
    scaling: bool = True
    backend_name: str = "clarabel"
    check_tolerance: float = 1e-7
    verbose: bool = False

    def __post_init__(self):
        if not self.feasibility_tolerance > 0:
            raise ArgumentError("feasibility_tolerance must be positive")
        if not self.check_tolerance > 0:
            raise ArgumentError("check_tolerance must be positive")
        if self.max_iterations < 1:
            raise ArgumentError("max_iterations must be positive")

    @classmethod
    def from_env(cls, base=None, **overrides):
        """``base`` (or defaults), then ``LURECERT_SOLVER_TOL``, then explicit overrides."""
        opts = cls() if base is None else base
        env = os.environ.get(TOL_ENV)
        if env:
            try:
                opts = replace(opts, feasibility_tolerance=float(env))
            except ValueError:
                raise ArgumentError(f"{TOL_ENV}={env!r} is not a number") from None
        return replace(opts, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class BackendResult:
    """``status`` is one of ``optimal``, ``inaccurate``, ``infeasible``, ``failure``."""

    status: str
    x: Optional[np.ndarray]
    raw_status: str
    iterations: Optional[int] = None
    log: str = ""


def _cvxpy_backend(solver):
    def run(data: CompiledProblem, opts: SolverOptions) -> BackendResult:
        import cvxpy as cp

        x = cp.Variable(data.n_vars)
        cons = []
        for F0, F in data.lmis:
            m = F0.shape[0]
            E = cp.reshape(F @ x, (m, m), order="C") + F0
            cons.append((E + E.T) / 2 >> 0)
        if data.A.shape[0]:
            cons.append(data.A @ x == data.b)
        if data.G.shape[0]:
            cons.append(data.G @ x + data.h >= 0)
        prob = cp.Problem(cp.Minimize(data.c @ x), cons)
        tol = opts.feasibility_tolerance
        if solver == "CLARABEL":
            settings = dict(tol_feas=tol, tol_gap_abs=tol, tol_gap_rel=tol, max_iter=opts.max_iterations)
        elif solver == "SCS":
            settings = dict(eps_abs=tol, eps_rel=tol, max_iters=max(opts.max_iterations, 20000))
        else:
            settings = {}
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are judged by the residual check instead
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                prob.solve(solver=solver, verbose=opts.verbose, **settings)
        except (cp.error.SolverError, ValueError, ArithmeticError) as exc:
            return BackendResult("failure", None, f"error: {exc}")
        stats = prob.solver_stats
        iters = getattr(stats, "num_iters", None)
        info = f"{solver} status={prob.status} iters={iters} time={getattr(stats, 'solve_time', None)}"
        status = {
            "optimal": "optimal",
            "optimal_inaccurate": "inaccurate",
            "infeasible": "infeasible",
            "infeasible_inaccurate": "infeasible",
        }.get(prob.status, "failure")
        xv = None if x.value is None else np.asarray(x.value, dtype=float)
        if status in ("optimal", "inaccurate") and xv is None:
            status = "failure"
        return BackendResult(status, xv, prob.status, iters, info)

    return run


def _independent_rows(A, b, rtol=1e-10):
    """Drop linearly dependent equality rows (cvxopt needs full row rank)."""
    if A.shape[0] == 0:
        return A, b
    dense = A.toarray()
    _, R, piv = sla.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size else 0
    keep = np.sort(piv[:rank])
    return dense[keep], b[keep]


def _cvxopt_backend(data: CompiledProblem, opts: SolverOptions) -> BackendResult:
    import cvxopt
    from cvxopt import solvers

    c = cvxopt.matrix(data.c)
    Gs = [cvxopt.matrix(-F.toarray()) for _, F in data.lmis]
    hs = [cvxopt.matrix(F0) for F0, _ in data.lmis]
    kwargs = {}
    if data.G.shape[0]:
        kwargs["Gl"] = cvxopt.matrix(-data.G.toarray())
        kwargs["hl"] = cvxopt.matrix(data.h)
    A, b = _independent_rows(data.A, data.b)
    if A.shape[0]:
        kwargs["A"] = cvxopt.matrix(A)
        kwargs["b"] = cvxopt.matrix(b)
    tol = opts.feasibility_tolerance
    options = dict(show_progress=opts.verbose, abstol=tol, reltol=tol, feastol=tol, maxiters=opts.max_iterations)
    try:
        sol = solvers.sdp(c, Gs=Gs, hs=hs, options=options, **kwargs)
    except (ValueError, ArithmeticError) as exc:
        return BackendResult("failure", None, f"error: {exc}")
    raw = sol["status"]
    status = {"optimal": "optimal", "primal infeasible": "infeasible", "unknown": "inaccurate"}.get(raw, "failure")
    x = None if sol["x"] is None else np.array(sol["x"]).ravel()
    if status == "inaccurate" and x is None:
        status = "failure"
    return BackendResult(status, x, raw, sol.get("iterations"), f"cvxopt status={raw}")


BACKENDS: dict[str, Callable[[CompiledProblem, SolverOptions], BackendResult]] = {
    "clarabel": _cvxpy_backend("CLARABEL"),
    "scs": _cvxpy_backend("SCS"),
    "cvxopt": _cvxopt_backend,
}


def register_backend(name, fn):
    """``fn(compiled_problem, options) -> BackendResult``."""
    BACKENDS[name] = fn


def solve_feasibility(problem: LmiProblem, opts: SolverOptions = SolverOptions()) -> Certificate:
    """Solve and extract a certificate.

    Raises
    ------
    InfeasibleProblem
        The backend certified infeasibility at its tolerance.
    SolverFailure
        The backend crashed or returned no usable point.
    """
    try:
        backend = BACKENDS[opts.backend_name]
    except KeyError:
        raise ArgumentError(f"unknown backend {opts.backend_name!r}; known: {sorted(BACKENDS)}") from None
    data = problem.compile(scale=opts.scaling)
    result = backend(data, opts)
    log.info(result.log)
    if result.status == "infeasible":
        raise InfeasibleProblem(f"backend reports {result.raw_status}", result.raw_status, result.log)
    if result.status == "failure":
        raise SolverFailure(f"backend failed: {result.raw_status}", result.raw_status, result.log)
    cert = problem.extract(result.x)
    cert.solver_status = result.raw_status
    cert.max_residual = max(problem.residuals(result.x).values(), default=0.0)
    return cert


@dataclass
class CertifyReport:
    """Outcome of the full pipeline.

    ``not_certified`` means inconclusive: the sufficient condition could not
    be established, not that the system is unstable.
    """

    outcome: str
    approximation: PwaApproximation
    census: dict
    certificate: Optional[Certificate]
    residuals: Optional[dict]
    wall_time: float
    solver_status: str = ""
    message: str = ""
    lmi_options: LmiOptions = field(default_factory=LmiOptions)

    @property
    def N(self):
        return self.approximation.N

    @property
    def eta(self):
        return self.approximation.eta

    def to_dict(self):
        from dataclasses import asdict

        return {
            "outcome": self.outcome,
            "N": self.N,
            "eta": self.eta,
            "approximation": self.approximation.to_dict(),
            "census": self.census,
            "sigma": None if self.certificate is None else list(self.certificate.sigma),
            "residuals": self.residuals,
            "wall_time": self.wall_time,
            "solver_status": self.solver_status,
            "message": self.message,
            "lmi_options": asdict(self.lmi_options),
        }


def certify(
    sys: LureSystem,
    eta_ref: Optional[float] = None,
    opts: SolverOptions = SolverOptions(),
    *,
    n_regions: Optional[int] = None,
    lmi_options: LmiOptions = LmiOptions(),
    approx: Optional[PwaApproximation] = None,
) -> CertifyReport:
    """Approximate, reformulate, assemble, solve and independently check."""
    from .verify import check_certificate

    start = time.perf_counter()
    if approx is None:
        approx = build_partition(sys.nl, eta_ref, n_regions=n_regions)
    aug = augment(to_pwa_lure(sys, approx))
    problem = assemble_theorem2(aug, approx.eta, lmi_options)
    counts = census(problem)

    def report(outcome, cert=None, residuals=None, status="", message=""):
        return CertifyReport(outcome, approx, counts, cert, residuals, time.perf_counter() - start,
                             status, message, lmi_options)

    try:
        cert = solve_feasibility(problem, opts)
    except InfeasibleProblem as exc:
        return report("not_certified", status=exc.status or "", message=str(exc))
    except SolverFailure as exc:
        return report("solver_failure", status=exc.status or "", message=str(exc))
    check = check_certificate(cert, aug, opts.check_tolerance)
    cert.max_residual = check.max_residual
    outcome = "certified" if check.passed else "not_certified"
    message = "" if check.passed else f"residual check failed at {check.worst} ({check.max_residual:.3g})"
    return report(outcome, cert, check.to_dict(), cert.solver_status, message)
