import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minreg.errors import NonPositivePoint
from minreg.field import (
    attracting_direction,
    corner_cone,
    corner_rates,
    eigen2,
    equal_eigenvalue_scan,
    jacobian,
    jacobian_matrix,
    normal_extremes,
    velocity,
)
from minreg.network import CORNER_LEVELS, corner_point, detailed_balance_point

from conftest import CASE_V, DOUBLE_EIG, NETWORK2

pos = st.floats(0.05, 20)
rate = st.floats(0.1, 10)


def _velocity_by_hand(x, y, k):
    """Network (2) written out term by term: Y <=> 2X, X <=> 2Y."""
    k1, k2, k3, k4 = k
    r1 = k1 * y - k2 * x ** 2
    r2 = k3 * x - k4 * y ** 2
    return np.array([2 * r1 - r2, -r1 + 2 * r2])


@given(pos, pos, st.lists(rate, min_size=4, max_size=4))
@settings(max_examples=100, deadline=None)
def test_velocity_matches_written_out_field(x, y, k):
    np.testing.assert_allclose(velocity(NETWORK2, k, [x, y]), _velocity_by_hand(x, y, k), rtol=1e-12, atol=1e-12)


def test_velocity_is_vectorized():
    pts = np.array([[1.0, 2.0], [0.5, 0.25], [3.0, 3.0]])
    k = np.array([1.0, 2.0, 0.5, 1.5])
    got = velocity(NETWORK2, k, pts)
    for p, g in zip(pts, got):
        np.testing.assert_allclose(g, _velocity_by_hand(*p, k), rtol=1e-13)


def test_velocity_rejects_nonpositive():
    with pytest.raises(NonPositivePoint):
        velocity(NETWORK2, np.ones(4), [0.0, 1.0])


@given(pos, pos, st.lists(rate, min_size=4, max_size=4))
@settings(max_examples=60, deadline=None)
def test_jacobian_matches_central_differences(x, y, k):
    for rp in (NETWORK2, CASE_V):
        J = jacobian_matrix(rp, k, [x, y])
        fd = np.empty((2, 2))
        for j in range(2):
            h = 1e-6 * [x, y][j]
            e = np.zeros(2)
            e[j] = h
            fd[:, j] = (velocity(rp, k, np.array([x, y]) + e) - velocity(rp, k, np.array([x, y]) - e)) / (2 * h)
        scale = np.abs(J).max() + 1
        np.testing.assert_allclose(J, fd, atol=1e-6 * scale)


def test_toy_jacobian_exact():
    J = jacobian_matrix(NETWORK2, np.ones(4), [1.0, 1.0])
    np.testing.assert_array_equal(J, [[-5.0, 4.0], [4.0, -5.0]])
    assert jacobian(NETWORK2, np.ones(4), [1.0, 1.0]).eigenvalues == (-1.0, -9.0)


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
@settings(max_examples=200, deadline=None)
def test_eigen2_matches_numpy(entries):
    J = np.array(entries).reshape(2, 2)
    jm = eigen2(J)
    ref = np.linalg.eigvals(J)
    got = np.array(jm.eigenvalues, dtype=complex)
    scale = 1 + np.abs(J).max()
    assert np.allclose(np.sort_complex(got), np.sort_complex(ref), atol=1e-7 * scale)
    if jm.real and abs(jm.eigenvalues[0] - jm.eigenvalues[1]) > 1e-6 * scale:
        for lam, v in zip(jm.eigenvalues, (jm.e_slow, jm.e_fast)):
            assert np.linalg.norm(v) == pytest.approx(1.0)
            np.testing.assert_allclose(J @ v, lam * v, atol=1e-7 * scale)
        assert abs(jm.eigenvalues[0]) <= abs(jm.eigenvalues[1])


@given(pos, pos, st.floats(0, 2 * math.pi), st.floats(0.1, 0.9))
@settings(max_examples=100, deadline=None)
def test_normal_extremes_match_box_vertices(x, y, theta, eps):
    n = np.array([math.cos(theta), math.sin(theta)])
    lo, hi = normal_extremes(NETWORK2, eps, [x, y], n)
    vals = [velocity(NETWORK2, k, [x, y]) @ n for k in itertools.product((eps, 1 / eps), repeat=4)]
    scale = 1 + max(abs(v) for v in vals)
    assert lo == pytest.approx(min(vals), abs=1e-12 * scale)
    assert hi == pytest.approx(max(vals), abs=1e-12 * scale)


@pytest.mark.parametrize("corner", "ABCD")
@pytest.mark.parametrize("eps", [0.3, 0.5, 0.8])
def test_corner_rates_balance_at_corner(corner, eps):
    k = corner_rates(eps, corner)
    assert np.all((k >= eps - 1e-15) & (k <= 1 / eps + 1e-15))
    np.testing.assert_allclose(detailed_balance_point(NETWORK2, k), corner_point(NETWORK2, eps, CORNER_LEVELS[corner]),
                               rtol=1e-12)


def test_attracting_direction(network2):
    eps = 0.5
    a = corner_point(network2, eps, CORNER_LEVELS["A"])
    assert attracting_direction(network2, eps, 1, a * [1.0, 1.0]) is None  # on the band edge
    below = np.array([0.01, 1.0])  # level x**2 / y tiny: reaction 1 below its band
    np.testing.assert_array_equal(attracting_direction(network2, eps, 1, below), network2.vectors[0])
    above = np.array([1.0, 0.01])
    np.testing.assert_array_equal(attracting_direction(network2, eps, 1, above), -network2.vectors[0])


@given(st.floats(0.02, 0.9))
@settings(max_examples=50, deadline=None)
def test_network2_corner_roles(eps):
    tags = {c: corner_cone(NETWORK2, eps, c).tag for c in "ABCD"}
    assert tags == {"A": "sink", "B": "source", "C": "sink", "D": "source"}


@given(st.floats(0.02, 0.9))
@settings(max_examples=50, deadline=None)
def test_sink_corner_has_stable_linearization(eps):
    for c in "AC":
        jm = jacobian(NETWORK2, corner_rates(eps, c), corner_point(NETWORK2, eps, CORNER_LEVELS[c]))
        assert jm.real and max(jm.eigenvalues) < 0


def test_equal_eigenvalue_scan_finds_double_root():
    roots = equal_eigenvalue_scan(DOUBLE_EIG, "i", n_grid=2000)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(1 / math.sqrt(2), abs=1e-8)
    k = corner_rates(roots[0], "A")
    jm = jacobian(DOUBLE_EIG, k, detailed_balance_point(DOUBLE_EIG, k))
    assert jm.disc / jm.trace ** 2 < 1e-12


def test_equal_eigenvalue_scan_stable_under_refinement():
    for rp in (NETWORK2, DOUBLE_EIG):
        for pattern in ("i", "ii", "iii", "iv"):
            coarse = equal_eigenvalue_scan(rp, pattern, n_grid=1000)
            fine = equal_eigenvalue_scan(rp, pattern, n_grid=10_000)
            assert len(coarse) == len(fine)
            np.testing.assert_allclose(coarse, fine, atol=1e-7)


def test_network2_has_no_double_eigenvalue():
    assert equal_eigenvalue_scan(NETWORK2, "i") == []
