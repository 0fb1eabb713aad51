import numpy as np
import pytest

from lurecert import LureSystem, build_partition, certify
from lurecert.nonlin import linear, odd_power_saturation, smooth_deadzone
from lurecert.reformulate import augment, to_pwa_lure

from oracles import EX1_A, EX1_B, EX1_C


@pytest.fixture(scope="session")
def ex1_system():
    return LureSystem(EX1_A, EX1_B, EX1_C, odd_power_saturation(2.0, 3.0, 1.0))


@pytest.fixture(scope="session")
def ex1_approx(ex1_system):
    return build_partition(ex1_system.nl, 0.8)


@pytest.fixture(scope="session")
def ex1_aug(ex1_system, ex1_approx):
    return augment(to_pwa_lure(ex1_system, ex1_approx))


def _certified(sys, eta_ref):
    report = certify(sys, eta_ref)
    assert report.outcome == "certified", report.message
    return sys, augment(to_pwa_lure(sys, report.approximation)), report


# systems the pipeline certifies; the behavioral tests run on each of them
CERTIFIED = {
    "half_gain": lambda: (LureSystem(EX1_A, EX1_B, EX1_C, odd_power_saturation(1.0, 3.0, 1.0)), 0.4),
    "first_order_deadzone": lambda: (LureSystem([[-0.5]], [1.0], [1.0], smooth_deadzone(4.0, 0.5)), 0.5),
    "linear_stable": lambda: (LureSystem(EX1_A, EX1_B, EX1_C, linear(0.0)), 1.0),
}

_cache = {}


@pytest.fixture(scope="session", params=sorted(CERTIFIED))
def certified(request):
    if request.param not in _cache:
        _cache[request.param] = _certified(*CERTIFIED[request.param]())
    return _cache[request.param]


@pytest.fixture(scope="session")
def half_gain():
    if "half_gain" not in _cache:
        _cache["half_gain"] = _certified(*CERTIFIED["half_gain"]())
    return _cache["half_gain"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
