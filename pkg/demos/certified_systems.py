"""Certify the roster of demo systems and validate each certificate by simulation.

Run from the repository root: python3 demos/certified_systems.py
"""
from pathlib import Path

import numpy as np

from lurecert import certify
from lurecert.artifacts import load_description
from lurecert.reformulate import augment, to_pwa_lure
from lurecert.verify import check_bounds, check_decrease, facet_continuity, simulate_pair

HERE = Path(__file__).parent / "systems"

for path in sorted(HERE.glob("*.json")):
    desc = load_description(path)
    report = certify(desc.system, desc.eta_ref, lmi_options=desc.lmi)
    line = f"{desc.name:<22s} N={report.N:<2d} eta={report.eta:<8.4g} {report.outcome:<14s} {report.wall_time:6.2f} s"
    if report.outcome != "certified":
        print(line)
        continue
    cert = report.certificate
    aug = augment(to_pwa_lure(desc.system, report.approximation))
    rng = np.random.default_rng(0)
    worst = 0.0
    passed = 0
    for _ in range(20):
        x0, xt0 = rng.uniform(-3, 3, (2, desc.system.n))
        pair = simulate_pair(desc.system, x0, xt0, 20.0, cert, aug)
        passed += check_decrease(cert, pair).passed
        worst = max(worst, pair.ratio)
    s1, s2, s3 = cert.sigma
    print(line)
    print(f"    sigma = ({s1:.4g}, {s2:.4g}, {s3:.3g}), residual {report.residuals['max_residual']:.1e}")
    print(f"    decrease {passed}/20 pairs, worst contraction {worst:.2e}, "
          f"bounds {check_bounds(cert, aug, 200):.1e}, continuity {facet_continuity(cert, aug, 50):.1e}")
