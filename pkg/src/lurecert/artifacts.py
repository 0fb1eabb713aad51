"""System description files and persisted artifacts (schema-versioned JSON)."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ArgumentError, LurecertError, SchemaError
from .lmi import Certificate, LmiOptions
from .nonlin import Nonlinearity, PwaApproximation, from_catalog, tabulated
from .reformulate import LureSystem
from .solve import SolverOptions

__all__ = [
    "SYSTEM_SCHEMA",
    "APPROX_SCHEMA",
    "CERT_SCHEMA",
    "REPORT_SCHEMA",
    "ValidationOptions",
    "SystemDescription",
    "load_description",
    "parse_description",
    "read_json",
    "write_json",
    "approximation_artifact",
    "certificate_artifact",
    "load_certificate_artifact",
]

SYSTEM_SCHEMA = "lurecert.system/1"
APPROX_SCHEMA = "lurecert.approximation/1"
CERT_SCHEMA = "lurecert.certificate/1"
REPORT_SCHEMA = "lurecert.report/1"


@dataclass(frozen=True)
class ValidationOptions:
    pairs: int = 100
    samples_per_cell: int = 1000
    region_scale: float = 3.0
    horizon: float = 20.0
    seed: int = 0
    x0: Optional[tuple] = None
    x0_tilde: Optional[tuple] = None


@dataclass(frozen=True)
class SystemDescription:
    name: str
    system: LureSystem
    eta_ref: float
    solver: SolverOptions = field(default_factory=SolverOptions)
    lmi: LmiOptions = field(default_factory=LmiOptions)
    validation: ValidationOptions = field(default_factory=ValidationOptions)

    def to_dict(self):
        sys = self.system
        nl = sys.nl
        if nl.name == "tabulated":
            nl_dict = {"tabulated": nl.params["table"], "rtol": nl.params["rtol"]}
        else:
            nl_dict = nl.to_dict()
        val = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.validation).items() if v is not None}
        solver = asdict(self.solver)
        solver["backend"] = solver.pop("backend_name")
        return {
            "schema": SYSTEM_SCHEMA,
            "name": self.name,
            "A": sys.A.tolist(),
            "B": sys.B.tolist(),
            "C": sys.C.tolist(),
            "nonlinearity": nl_dict,
            "eta_ref": self.eta_ref,
            "solver": solver,
            "lmi": asdict(self.lmi),
            "validation": val,
        }


def _require(d, key, kind, where):
    if key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = d[key]
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: field {key!r} has type {type(value).__name__}")
    return value


def _matrix(value, name):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"{name} is not a numeric array") from None
    if a.ndim == 1:
        a = a[:, None] if name == "B" else a[None, :]
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise SchemaError(f"{name} must be a finite 2-D array")
    return a


def _options(cls, d, where, rename=None):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise SchemaError(f"{where} must be an object")
    d = dict(d)
    for src, dst in (rename or {}).items():
        if src in d:
            d[dst] = d.pop(src)
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError, LurecertError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _nonlinearity(d) -> Nonlinearity:
    if not isinstance(d, dict):
        raise SchemaError("nonlinearity must be an object")
    try:
        if "tabulated" in d:
            return tabulated(d["tabulated"], rtol=d.get("rtol", 1e-3))
        name = _require(d, "catalog", str, "nonlinearity")
        return from_catalog(name, d.get("params", {}))
    except ArgumentError as exc:
        raise SchemaError(str(exc)) from None
    except LurecertError as exc:
        raise SchemaError(f"nonlinearity: {exc}") from None


def parse_description(d) -> SystemDescription:
    if not isinstance(d, dict):
        raise SchemaError("description must be a JSON object")
    if d.get("schema") != SYSTEM_SCHEMA:
        raise SchemaError(f"expected schema {SYSTEM_SCHEMA!r}, found {d.get('schema')!r}")
    name = _require(d, "name", str, "description")
    A, B, C = (_matrix(_require(d, k, list, "description"), k) for k in ("A", "B", "C"))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, 1) or C.shape != (1, n):
        raise SchemaError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
    eta_ref = d.get("eta_ref")
    if not isinstance(eta_ref, (int, float)) or isinstance(eta_ref, bool) or not math.isfinite(eta_ref):
        raise SchemaError("eta_ref must be a finite number")
    system = LureSystem(A, B, C, _nonlinearity(_require(d, "nonlinearity", dict, "description")))
    validation = d.get("validation")
    if isinstance(validation, dict):
        validation = {k: (tuple(v) if isinstance(v, list) else v) for k, v in validation.items()}
    return SystemDescription(
        name=name,
        system=system,
        eta_ref=float(eta_ref),
        solver=_options(SolverOptions, d.get("solver"), "solver", {"backend": "backend_name"}),
        lmi=_options(LmiOptions, d.get("lmi"), "lmi"),
        validation=_options(ValidationOptions, validation, "validation"),
    )


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")
    return path


def load_description(path) -> SystemDescription:
    return parse_description(read_json(path))


def approximation_artifact(desc: SystemDescription, approx: PwaApproximation, table_points: int = 2001):
    """Approximation plus a dense ``(q, phi, phi_pwa, eps)`` table for plotting."""
    bp = approx.breakpoints
    reach = 2.0 * max(1.0, float(np.max(np.abs(bp)))) if len(bp) else 2.0
    q = np.linspace(-reach, reach, table_points)
    phi = desc.system.nl.eval(q)
    pwa = approx(q)
    return {
        "schema": APPROX_SCHEMA,
        "system": desc.name,
        "eta_ref": desc.eta_ref,
        "approximation": approx.to_dict(),
        "table": {"q": q.tolist(), "phi": phi.tolist(), "phi_pwa": pwa.tolist(), "eps": (phi - pwa).tolist()},
    }


def certificate_artifact(desc: SystemDescription, approx: PwaApproximation, cert: Certificate):
    return {
        "schema": CERT_SCHEMA,
        "system": desc.name,
        "approximation": approx.to_dict(),
        "certificate": cert.to_dict(),
    }


def load_certificate_artifact(path):
    d = read_json(path)
    if not isinstance(d, dict) or d.get("schema") != CERT_SCHEMA:
        raise SchemaError(f"{path}: expected schema {CERT_SCHEMA!r}")
    try:
        approx = PwaApproximation.from_dict(d["approximation"])
    except (KeyError, TypeError, ValueError, LurecertError) as exc:
        raise SchemaError(f"{path}: malformed approximation ({exc})") from None
    return approx, Certificate.from_dict(d["certificate"])
