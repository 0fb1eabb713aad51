"""Command-line front end.

Exit codes: 0 certified (or success), 2 bad input, 3 not certified,
4 solver failure, 5 integration failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    REPORT_SCHEMA,
    SystemDescription,
    approximation_artifact,
    certificate_artifact,
    load_certificate_artifact,
    load_description,
    read_json,
    write_json,
)
from .errors import ArgumentError, IntegrationError, LurecertError, SchemaError
from .nonlin import build_partition
from .reformulate import augment, to_pwa_lure
from .solve import SolverOptions, certify
from .verify import check_certificate, check_decrease, simulate_pair

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CERTIFIED = 3
EXIT_SOLVER = 4
EXIT_INTEGRATION = 5

OUTCOME_CODES = {"certified": EXIT_OK, "not_certified": EXIT_NOT_CERTIFIED, "solver_failure": EXIT_SOLVER}


def _vector(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _approximation(desc: SystemDescription, args):
    eta_ref = desc.eta_ref if args.eta_ref is None else args.eta_ref
    if args.force_N is None and not eta_ref > 0:
        raise ArgumentError(f"eta_ref must be positive, got {eta_ref}")
    return build_partition(desc.system.nl, eta_ref, n_regions=args.force_N), eta_ref


def _solver_options(desc: SystemDescription, args):
    # description < environment < command line
    return SolverOptions.from_env(desc.solver, backend_name=args.backend, check_tolerance=args.tol)


def cmd_approx(args):
    desc = load_description(args.input)
    approx, eta_ref = _approximation(desc, args)
    desc = replace(desc, eta_ref=eta_ref)
    path = write_json(Path(args.out_dir) / f"{desc.name}.approx.json", approximation_artifact(desc, approx))
    print(f"{desc.name}: N = {approx.N}, eta = {approx.eta:.12g}")
    print(f"breakpoints: {np.array2string(approx.breakpoints, precision=10)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_certify(args):
    desc = load_description(args.input)
    approx, eta_ref = _approximation(desc, args)
    opts = _solver_options(desc, args)
    report = certify(desc.system, opts=opts, lmi_options=desc.lmi, approx=approx)
    out = Path(args.out_dir)
    payload = {"schema": REPORT_SCHEMA, "system": desc.name, "eta_ref": eta_ref, "seed": args.seed, **report.to_dict()}
    path = write_json(out / f"{desc.name}.report.json", payload)
    if report.certificate is not None:
        write_json(out / f"{desc.name}.certificate.json", certificate_artifact(desc, approx, report.certificate))
    print(render_report(payload))
    print(f"wrote {path}")
    return OUTCOME_CODES[report.outcome]


def _pair(desc, args, rng):
    val = desc.validation
    x0 = args.x0 or val.x0
    xt0 = args.x0_tilde or val.x0_tilde
    n = desc.system.n
    if x0 is None:
        x0 = tuple(rng.uniform(-val.region_scale, val.region_scale, n))
    if xt0 is None:
        xt0 = tuple(rng.uniform(-val.region_scale, val.region_scale, n))
    if len(x0) != n or len(xt0) != n:
        raise ArgumentError(f"initial states must have {n} entries")
    return np.array(x0), np.array(xt0)


def cmd_simulate(args):
    desc = load_description(args.input)
    rng = np.random.default_rng(desc.validation.seed if args.seed is None else args.seed)
    x0, xt0 = _pair(desc, args, rng)
    T = args.T or desc.validation.horizon
    cert = aug = None
    if args.certificate:
        approx, cert = load_certificate_artifact(args.certificate)
        aug = augment(to_pwa_lure(desc.system, approx))
    try:
        pair = simulate_pair(desc.system, x0, xt0, T, cert, aug)
    except IntegrationError as exc:
        print(f"integration failed at t = {exc.last_time}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    path = Path(args.out_dir) / f"{desc.name}.trajectory.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(pair.to_csv())
    print(f"|dx(T)|/|dx(0)| = {pair.ratio:.6e} over T = {T:g} ({len(pair.times)} steps)")
    print(f"wrote {path}")
    if cert is not None:
        dec = check_decrease(cert, pair, args.tol or 1e-4)
        print(f"decrease check: {'passed' if dec.passed else 'FAILED'}"
              + ("" if dec.passed else f" ({dec.reason} at t = {dec.offending_time:.6g})"))
        if not dec.passed:
            return EXIT_NOT_CERTIFIED
    return EXIT_OK


def cmd_check(args):
    desc = load_description(args.input)
    approx, cert = load_certificate_artifact(args.certificate)
    aug = augment(to_pwa_lure(desc.system, approx))
    res = check_certificate(cert, aug, args.tol or desc.solver.check_tolerance)
    for fam, value in res.families.items():
        print(f"{fam:<11s} {value:.3e}")
    print(f"max residual {res.max_residual:.3e} at {res.worst}: {'pass' if res.passed else 'FAIL'} (tol {res.tol:g})")
    return EXIT_OK if res.passed else EXIT_NOT_CERTIFIED


def render_report(d):
    lines = [
        f"system      {d.get('system', '?')}",
        f"outcome     {d['outcome']}",
        f"regions     N = {d['N']}, eta = {d['eta']:.12g}",
    ]
    c = d.get("census") or {}
    if c:
        lines.append(f"census      {c['n_vars']} variables, {c['block_count']} LMI blocks, "
                     f"{c['equality_rows']} equality rows, {c['posted_facets']}/{c['facets']} facets posted")
    if d.get("sigma"):
        s = d["sigma"]
        lines.append(f"sigma       {s[0]:.6g}, {s[1]:.6g}, {s[2]:.6g}")
    if d.get("residuals"):
        r = d["residuals"]
        lines.append(f"residual    {r['max_residual']:.3e} (tol {r['tol']:g}) at {r['worst']}")
    if d.get("solver_status"):
        lines.append(f"solver      {d['solver_status']}")
    if d.get("message"):
        lines.append(f"note        {d['message']}")
    lines.append(f"wall time   {d['wall_time']:.2f} s")
    return "\n".join(lines)


def cmd_report(args):
    d = read_json(args.report)
    if not isinstance(d, dict) or d.get("schema") != REPORT_SCHEMA:
        raise SchemaError(f"{args.report}: expected schema {REPORT_SCHEMA!r}")
    print(render_report(d))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="lurecert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("input", help="system description (JSON)")
        p.add_argument("--eta-ref", type=_positive, default=None)
        p.add_argument("--force-N", type=int, default=None, dest="force_N")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--seed", type=int, default=None)
        if solver:
            p.add_argument("--backend", default=None)
            p.add_argument("--tol", type=_positive, default=None, help="residual check tolerance")

    p = sub.add_parser("approx", help="piecewise-affine approximation")
    common(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("certify", help="run the full certification pipeline")
    common(p, solver=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="simulate a trajectory pair")
    common(p)
    p.add_argument("--certificate", default=None)
    p.add_argument("--x0", type=_vector, default=None)
    p.add_argument("--x0-tilde", type=_vector, default=None)
    p.add_argument("--T", type=_positive, default=None)
    p.add_argument("--tol", type=_positive, default=None, help="decrease check tolerance")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="re-verify a stored certificate")
    p.add_argument("input")
    p.add_argument("certificate")
    p.add_argument("--tol", type=_positive, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", help="render a stored report")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except LurecertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
