import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lurecert.errors import (
    ApproximationInvalid,
    ArgumentError,
    AssumptionViolation,
    MalformedNonlinearity,
)
from lurecert.nonlin import (
    Flags,
    Nonlinearity,
    PwaApproximation,
    arctan_deficit,
    arctan_saturation,
    build_partition,
    derivative_image_length,
    evaluate_pwa,
    from_catalog,
    linear,
    odd_power_saturation,
    required_partition_size,
    smooth_deadzone,
    tabulated,
    tanh_saturation,
    verify_error_lipschitz,
)

from oracles import (
    EX1_BREAKPOINTS,
    EX1_ETA,
    EX1_SLOPES,
    ex1_dphi,
    ex1_intercepts,
    ex1_phi,
    sampled_deriv_range,
)


def assumption2_catalog():
    return [
        odd_power_saturation(2.0, 3.0, 1.0),
        odd_power_saturation(1.0, 2.0, 0.7),
        odd_power_saturation(0.5, 5.0, 1.3),
        smooth_deadzone(3.0, 0.4),
        arctan_deficit(2.5, 2.0, 0.8),
    ]


class TestCatalog:
    def test_example_nonlinearity_matches_closed_form(self):
        nl = odd_power_saturation(2.0, 3.0, 1.0)
        q = np.linspace(-4, 4, 1001)
        np.testing.assert_allclose(nl(q), ex1_phi(q), rtol=0, atol=1e-14)
        np.testing.assert_allclose(nl.deriv(q), ex1_dphi(q), rtol=0, atol=1e-14)

    @pytest.mark.parametrize("nl", assumption2_catalog() + [tanh_saturation(1.5, 2.0), arctan_saturation(2.0, 0.5), linear(-1.0)])
    def test_invariants(self, nl):
        q = np.concatenate([np.linspace(-10, 10, 4001), np.geomspace(1e-6, 1e6, 200)])
        assert nl(0.0) == 0.0
        assert np.all(np.abs(nl.deriv(q)) <= nl.lipschitz + 1e-12)
        if nl.flags.odd:
            np.testing.assert_allclose(nl(-q), -nl(q), rtol=0, atol=1e-12)
        k1, k2 = nl.asymptotic_slopes
        far = np.geomspace(1e4, 1e8, 20)
        assert np.all(np.abs(nl.deriv(far) - k2) < 1e-6)
        assert np.all(np.abs(nl.deriv(-far) - k1) < 1e-6)

    @pytest.mark.parametrize("nl", assumption2_catalog())
    def test_derivative_matches_finite_difference(self, nl):
        q = np.linspace(-3, 3, 97) + 1e-3
        h = 1e-6
        fd = (nl(q + h) - nl(q - h)) / (2 * h)
        np.testing.assert_allclose(nl.deriv(q), fd, rtol=1e-5, atol=1e-6)

    def test_from_catalog_rejects_unknown(self):
        with pytest.raises(ArgumentError):
            from_catalog("cubic_spline_of_doom")
        with pytest.raises(ArgumentError):
            from_catalog("linear", {"slope": 1})

    def test_phi_zero_enforced(self):
        with pytest.raises(MalformedNonlinearity):
            Nonlinearity(lambda q: q + 1, lambda q: np.ones_like(q), (1, 1), 1, Flags())


class TestDerivativeImageLength:
    def test_example(self):
        assert derivative_image_length(odd_power_saturation()) == 6.0
        assert sampled_deriv_range(ex1_dphi) == (0.0, 6.0)

    def test_linear(self):
        assert derivative_image_length(linear(2.5)) == 0.0

    def test_tanh_shape(self):
        nl = tanh_saturation(1.0, 1.0)
        assert derivative_image_length(nl) == pytest.approx(1.0)

    def test_sampling_fallback_agrees_with_closed_form(self):
        base = smooth_deadzone(2.0, 0.5)
        blind = Nonlinearity(base.eval, base.deriv, base.asymptotic_slopes, base.lipschitz, base.flags)
        assert derivative_image_length(blind) == pytest.approx(derivative_image_length(base), abs=1e-7)

    def test_non_finite_derivative(self):
        nl = Nonlinearity(lambda q: q, lambda q: np.where(np.abs(q) > 3, np.nan, 1.0), (1, 1), 1, Flags())
        with pytest.raises(MalformedNonlinearity):
            derivative_image_length(nl)


class TestPartitionSize:
    @pytest.mark.parametrize("nl, eta_ref, expected", [
        (odd_power_saturation(), 0.8, (3, 7)),
        (linear(4.0), 0.1, (0, 1)),
        (tanh_saturation(1.0, 1.0), 0.2, (2, 5)),
        (odd_power_saturation(), 6.0, (0, 1)),
    ])
    def test_formula(self, nl, eta_ref, expected):
        assert required_partition_size(nl, eta_ref) == expected

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ArgumentError):
            required_partition_size(odd_power_saturation(), bad)


class TestBuildPartition:
    def test_example(self):
        approx = build_partition(odd_power_saturation(), 0.8)
        assert approx.N == 7
        assert approx.eta == pytest.approx(EX1_ETA, abs=1e-9)
        np.testing.assert_allclose(approx.breakpoints, EX1_BREAKPOINTS, rtol=0, atol=1e-10)
        np.testing.assert_allclose(approx.slopes, EX1_SLOPES, rtol=0, atol=1e-12)
        np.testing.assert_allclose(approx.intercepts, ex1_intercepts(), rtol=0, atol=1e-10)

    def test_evaluation_examples(self):
        approx = build_partition(odd_power_saturation(), 0.8)
        assert evaluate_pwa(approx, 0.0) == 0.0
        assert evaluate_pwa(approx, 0.5) == pytest.approx(0.375, abs=1e-12)
        assert 2.25 * 0.5 - 0.75 == pytest.approx(0.375)
        eps = ex1_phi(0.5) - evaluate_pwa(approx, 0.5)
        assert eps == pytest.approx(-0.125, abs=1e-12)
        assert abs(eps) <= approx.eta * 0.5

    def test_linear_is_exact(self):
        approx = build_partition(linear(2.0), 0.3)
        assert (approx.N, approx.slopes[0], approx.intercepts[0], approx.eta) == (1, 2.0, 0.0, 0.0)
        assert verify_error_lipschitz(linear(2.0), approx, 1000) == 0.0

    def test_tanh_shape(self):
        nl = tanh_saturation(1.0, 1.0)
        approx = build_partition(nl, 0.2)
        assert approx.N == 5
        assert approx.eta == pytest.approx(1 / 6, abs=1e-12)
        assert verify_error_lipschitz(nl, approx) <= approx.eta + 1e-6

    def test_single_region_uses_full_range(self):
        approx = build_partition(odd_power_saturation(), 6.0)
        assert approx.N == 1 and approx.slopes[0] == 3.0 and approx.eta == 3.0

    def test_forced_region_count(self):
        approx = build_partition(odd_power_saturation(), n_regions=7)
        np.testing.assert_allclose(approx.breakpoints, EX1_BREAKPOINTS, atol=1e-10)
        with pytest.raises(ArgumentError):
            build_partition(odd_power_saturation(), n_regions=4)

    def test_rejects_nonmonotone_derivative(self):
        # phi' = 1 + sin(q)^2 / (1 + q^2) oscillates on the half-line
        nl = Nonlinearity(
            lambda q: q,
            lambda q: 1 + np.sin(3 * q) ** 2 / (1 + q**2),
            (1.0, 1.0), 2.0, Flags(odd=True),
        )
        with pytest.raises(AssumptionViolation):
            build_partition(nl, 0.1)

    def test_corrupted_slope_is_detected(self):
        nl = odd_power_saturation()
        approx = build_partition(nl, 0.8)
        slopes = approx.slopes.copy()
        slopes[1] += 0.5
        bad = PwaApproximation(approx.breakpoints, slopes, approx.intercepts, approx.eta)
        with pytest.raises(ApproximationInvalid):
            verify_error_lipschitz(nl, bad)

    def test_verification_attains_eta_at_region_ends(self):
        nl = odd_power_saturation()
        approx = build_partition(nl, 0.8)
        assert verify_error_lipschitz(nl, approx) == pytest.approx(0.75, abs=1e-4)

    def test_non_odd_nonlinearity(self):
        # slope 1 on the left, rising to 3 on the right
        tab_q = np.linspace(-4, 4, 801)
        dphi = np.where(tab_q < 0, 1.0, 1.0 + 2.0 * np.tanh(tab_q) ** 2)
        phi = np.concatenate([[0.0], np.cumsum((dphi[1:] + dphi[:-1]) / 2 * np.diff(tab_q))])
        phi -= np.interp(0.0, tab_q, phi)
        nl = tabulated(np.c_[tab_q, phi, dphi], rtol=1e-2)
        assert not nl.flags.odd
        approx = build_partition(nl, 0.25)
        assert approx.eta <= 0.25 + 1e-12
        assert verify_error_lipschitz(nl, approx) <= approx.eta + 1e-6
        assert approx.continuity_residual() <= 1e-9
        assert evaluate_pwa(approx, 0.0) == 0.0


def _check_approximation(nl, approx, eta_ref):
    q = np.concatenate([np.linspace(-20, 20, 2001), np.geomspace(1e-5, 1e5, 100)])
    assert approx.eta <= eta_ref
    assert approx.continuity_residual() <= 1e-9
    assert evaluate_pwa(approx, 0.0) == 0.0
    assert approx.intercepts[approx.center] == 0.0
    eps = nl(q) - approx(q)
    assert np.all(np.abs(approx(q) + eps - nl(q)) <= 1e-12 * (1 + np.abs(nl(q))))
    if nl.flags.odd:
        assert np.all(np.abs(approx(-q) + approx(q)) <= 1e-12 * (1 + np.abs(q)))
        np.testing.assert_array_equal(approx.breakpoints, -approx.breakpoints[::-1])
    if approx.images is not None:
        assert np.all(approx.images[:, 1] - approx.images[:, 0] <= 2 * eta_ref + 1e-9)


@settings(max_examples=40, deadline=None)
@given(
    which=st.integers(0, 4),
    eta_ref=st.floats(0.02, 5.0),
)
def test_assumption2_properties(which, eta_ref):
    nl = assumption2_catalog()[which]
    approx = build_partition(nl, eta_ref)
    m, N = required_partition_size(nl, eta_ref)
    length = derivative_image_length(nl)
    assert approx.N == N
    assert approx.eta == pytest.approx(length / (2 * (m + 1)), abs=1e-9)
    _check_approximation(nl, approx, eta_ref)
    refined = build_partition(nl, eta_ref / 2)
    assert refined.eta <= approx.eta


@settings(max_examples=25, deadline=None)
@given(
    k=st.floats(0.5, 5.0),
    a_frac=st.floats(0.05, 1.0),
    width=st.floats(0.1, 3.0),
    eta_ref=st.floats(0.05, 2.0),
)
def test_arctan_deficit_family(k, a_frac, width, eta_ref):
    nl = arctan_deficit(k, a_frac * k, width)
    approx = build_partition(nl, eta_ref)
    assert approx.eta <= eta_ref
    assert verify_error_lipschitz(nl, approx, 20_000) <= approx.eta + 1e-6
    _check_approximation(nl, approx, eta_ref)


@pytest.mark.parametrize("grid", [1_000, 100_000, 1_000_000])
def test_verification_bound_over_grid_sizes(grid):
    nl = smooth_deadzone(3.0, 0.4)
    approx = build_partition(nl, 0.2)
    assert verify_error_lipschitz(nl, approx, grid) <= approx.eta + 1e-6


def test_tabulated_matches_analytic():
    q = np.linspace(-3, 3, 601)
    nl = tabulated(np.c_[q, ex1_phi(q), ex1_dphi(q)])
    assert nl.flags == Flags(odd=True, monotone=True, deriv_nondecreasing_on_Rplus=True)
    approx = build_partition(nl, 0.8)
    assert approx.N == 7
    np.testing.assert_allclose(approx.breakpoints, EX1_BREAKPOINTS, atol=1e-4)


def test_tabulated_rejects_inconsistent_table():
    q = np.linspace(-2, 2, 41)
    with pytest.raises(MalformedNonlinearity):
        tabulated(np.c_[q, 5 * q, np.ones_like(q)])
    with pytest.raises(MalformedNonlinearity):
        tabulated(np.c_[q[::-1], q[::-1], np.ones_like(q)])


def test_approximation_is_immutable():
    approx = build_partition(odd_power_saturation(), 0.8)
    with pytest.raises(ValueError):
        approx.slopes[0] = 1.0
    d = approx.to_dict()
    again = PwaApproximation.from_dict(d)
    for name in ("breakpoints", "slopes", "intercepts"):
        np.testing.assert_array_equal(getattr(again, name), getattr(approx, name))
    assert math.isclose(again.eta, approx.eta)
