import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lurecert import LureSystem, build_partition
from lurecert.errors import ArgumentError
from lurecert.nonlin import odd_power_saturation, smooth_deadzone, tanh_saturation
from lurecert.reformulate import (
    augment,
    cell_polyhedron,
    locate_cells,
    swap_permutation,
    to_pwa_lure,
)

from oracles import EX1_A, EX1_B, EX1_C, cell_rows, ex1_phi

finite = st.floats(-50, 50, allow_nan=False)


def test_system_rejects_bad_shapes():
    with pytest.raises(ArgumentError):
        LureSystem(np.eye(2), [1.0, 0.0, 0.0], [0.0, 1.0], odd_power_saturation())
    with pytest.raises(ArgumentError):
        LureSystem([[1.0, np.nan], [0.0, 1.0]], [1.0, 0.0], [0.0, 1.0], odd_power_saturation())


def test_original_vector_field(ex1_system):
    x = np.array([0.3, -1.7])
    expected = EX1_A @ x - EX1_B[:, 0] * ex1_phi(-1.7)
    np.testing.assert_allclose(ex1_system.rhs(x), expected, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(x=arrays(float, 2, elements=finite))
def test_reformulation_reproduces_vector_field(ex1_system, ex1_approx, x):
    pwa = to_pwa_lure(ex1_system, ex1_approx)
    np.testing.assert_allclose(pwa.rhs(x), ex1_system.rhs(x), rtol=1e-12, atol=1e-10)


def test_reformulation_at_breakpoints(ex1_system, ex1_approx):
    pwa = to_pwa_lure(ex1_system, ex1_approx)
    x = np.array([[0.1, q] for q in ex1_approx.breakpoints])
    np.testing.assert_allclose(pwa.rhs(x), ex1_system.rhs(x), atol=1e-12)
    # both neighbouring affine pieces agree on the boundary
    for k, q in enumerate(ex1_approx.breakpoints):
        xb = np.array([0.1, q])
        np.testing.assert_allclose(pwa.pwa_part(xb, k), pwa.pwa_part(xb, k + 1), atol=1e-12)


def test_cell_matrices(ex1_system, ex1_approx):
    pwa = to_pwa_lure(ex1_system, ex1_approx)
    assert pwa.N == 7 and pwa.D == 0.0 and pwa.eta == 0.75
    for cell, r, s in zip(pwa.cells, ex1_approx.slopes, ex1_approx.intercepts):
        np.testing.assert_array_equal(cell.A, EX1_A - r * EX1_B @ EX1_C)
        np.testing.assert_array_equal(cell.a, -s * EX1_B)


class TestCellPolyhedron:
    def test_bounded(self):
        G, g = cell_polyhedron((-0.5, 0.5), EX1_C)
        np.testing.assert_array_equal(G, [[0, 1], [0, -1]])
        np.testing.assert_array_equal(g, [0.5, 0.5])

    def test_half_lines(self):
        G, g = cell_polyhedron((-np.inf, 2.0), EX1_C)
        assert G.shape == (1, 2) and g.tolist() == [2.0]
        G, g = cell_polyhedron((2.0, np.inf), EX1_C)
        assert G.tolist() == [[0, 1]] and g.tolist() == [-2.0]

    def test_whole_line(self):
        G, g = cell_polyhedron((-np.inf, np.inf), EX1_C)
        assert G.shape == (0, 2) and g.shape == (0,)

    def test_empty_interval(self):
        with pytest.raises(ArgumentError):
            cell_polyhedron((1.0, 1.0), EX1_C)

    @settings(max_examples=200, deadline=None)
    @given(
        lo=st.one_of(st.just(-np.inf), st.floats(-5, 5)),
        width=st.one_of(st.just(np.inf), st.floats(0.01, 5)),
        x=arrays(float, 3, elements=st.floats(-10, 10)),
        c=arrays(float, 3, elements=st.floats(-2, 2)),
    )
    def test_membership(self, lo, width, x, c):
        hi = lo + width if np.isfinite(lo) else (width if np.isfinite(width) else np.inf)
        if not lo < hi:
            return
        G, g = cell_polyhedron((lo, hi), c)
        q = c @ x
        inside = (lo <= q) and (q <= hi)
        assert bool(np.all(G @ x + g >= 0)) == inside


def test_locate_cells_boundary_convention(ex1_approx):
    bp = ex1_approx.breakpoints
    assert locate_cells(bp, bp).tolist() == list(range(6))
    assert locate_cells(bp, np.array([-10.0, 0.0, 10.0])).tolist() == [0, 3, 6]


class TestAugmented:
    def test_shapes(self, ex1_aug):
        assert ex1_aug.dim == 5 and len(ex1_aug.cells) == 49
        np.testing.assert_array_equal(ex1_aug.C, [[0, 1, 0, -1, 0]])
        np.testing.assert_array_equal(ex1_aug.B, [[1, 0], [0, 0], [0, 1], [0, 0], [0, 0]])
        np.testing.assert_array_equal(ex1_aug.D, [[0.0, -0.0]])

    def test_block_structure(self, ex1_aug):
        pwa = ex1_aug.pwa
        for (i, j), cell in ex1_aug.cells.items():
            A = cell.A
            np.testing.assert_array_equal(A[:2, :2], pwa.cells[i].A)
            np.testing.assert_array_equal(A[2:4, 2:4], pwa.cells[j].A)
            np.testing.assert_array_equal(A[:2, 2:4], 0)
            np.testing.assert_array_equal(A[2:4, :2], 0)
            np.testing.assert_array_equal(A[:2, 4], pwa.cells[i].a[:, 0])
            np.testing.assert_array_equal(A[2:4, 4], pwa.cells[j].a[:, 0])
            np.testing.assert_array_equal(A[4], 0)

    def test_row_counts(self, ex1_aug):
        rows = cell_rows(7)
        counts = set()
        for (i, j), cell in ex1_aug.cells.items():
            assert cell.G.shape == (rows[i] + rows[j], 5)
            counts.add(cell.G.shape[0])
        assert counts == {2, 3, 4}

    @settings(max_examples=100, deadline=None)
    @given(x=arrays(float, 2, elements=finite), xt=arrays(float, 2, elements=finite))
    def test_augmented_dynamics(self, ex1_aug, x, xt):
        pwa = ex1_aug.pwa
        i, j = int(pwa.cell_of(x)), int(pwa.cell_of(xt))
        cell = ex1_aug.cells[i, j]
        z = ex1_aug.lift(x, xt)
        assert np.all(cell.G @ z >= -1e-9)
        q = EX1_C[0]
        eps = pwa.source.nl(np.array([q @ x, q @ xt])) - pwa.approx(np.array([q @ x, q @ xt]))
        dz = cell.A @ z + ex1_aug.B @ (-eps)
        np.testing.assert_allclose(dz[:2], pwa.rhs(x), atol=1e-9)
        np.testing.assert_allclose(dz[2:4], pwa.rhs(xt), atol=1e-9)
        assert dz[4] == 0
        assert (ex1_aug.C @ z)[0] == pytest.approx(q @ x - q @ xt, abs=1e-12)

    def test_facets(self, ex1_aug):
        N = 7
        assert len(ex1_aug.facets) == 2 * N * (N - 1)
        keys = {(f.a, f.b) for f in ex1_aug.facets}
        rng = np.random.default_rng(1)
        for f in ex1_aug.facets:
            (i, j), (k, l) = f.a, f.b
            assert abs(i - k) + abs(j - l) == 1
            # points on the shared boundary are annihilated
            if i != k:
                x = np.array([rng.normal(), ex1_aug.breakpoints[i]])
                xt = np.array([rng.normal(), rng.normal()])
            else:
                x = np.array([rng.normal(), rng.normal()])
                xt = np.array([rng.normal(), ex1_aug.breakpoints[j]])
            assert abs(f.E @ ex1_aug.lift(x, xt))[0] < 1e-12
            assert abs(np.linalg.norm(f.E[0, :4]) - 1) < 1e-12
            sw = f.swapped()
            assert (sw.a, sw.b) in keys
            match = next(g for g in ex1_aug.facets if (g.a, g.b) == (sw.a, sw.b))
            np.testing.assert_allclose(match.E, sw.E, atol=1e-15)

    def test_swap_symmetry(self, ex1_aug):
        Pi = swap_permutation(2)
        np.testing.assert_array_equal(Pi @ Pi, np.eye(5))
        for (i, j), cell in ex1_aug.cells.items():
            np.testing.assert_array_equal(Pi @ cell.A @ Pi.T, ex1_aug.cells[j, i].A)


@pytest.mark.parametrize("nl, eta_ref", [(tanh_saturation(2.0, 1.0), 0.3), (smooth_deadzone(3.0, 0.4), 0.5)])
def test_higher_dimensional_reformulation(nl, eta_ref):
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3)) - 3 * np.eye(3)
    sys = LureSystem(A, rng.normal(size=3), rng.normal(size=3), nl)
    approx = build_partition(nl, eta_ref)
    pwa = to_pwa_lure(sys, approx)
    x = rng.normal(size=(500, 3)) * 3
    np.testing.assert_allclose(pwa.rhs(x), sys.rhs(x), atol=1e-10)
    aug = augment(pwa)
    assert aug.dim == 7 and len(aug.cells) == approx.N ** 2
