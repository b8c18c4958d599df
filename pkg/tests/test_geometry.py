import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from minreg.geometry import (
    BOUNDARY,
    INSIDE,
    OUTSIDE,
    PolygonIndex,
    centroid,
    close_ring,
    first_crossing,
    is_simple,
    polyline_crossings,
    signed_area,
)


def _star(radii, scale_x=1.0, scale_y=1.0):
    """Star-shaped (hence simple) polygon around the origin."""
    n = len(radii)
    th = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([scale_x * radii * np.cos(th), scale_y * radii * np.sin(th)])


stars = st.lists(st.floats(0.2, 2.0), min_size=3, max_size=60).map(np.array).map(_star)


@given(stars, st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_winding_matches_shapely(poly, seed):
    idx = PolygonIndex(poly, n_cells=32)
    pts = np.random.default_rng(seed).uniform(-2.2, 2.2, size=(400, 2))
    ref = shapely.contains_xy(shapely.Polygon(poly), pts[:, 0], pts[:, 1])
    d = idx.distance(pts)
    far = d > 1e-9
    np.testing.assert_array_equal((idx.winding(pts) != 0)[far], ref[far])


@given(stars, st.integers(0, 2**32 - 1), st.floats(0.0, 0.3))
@settings(max_examples=60, deadline=None)
def test_within_matches_shapely_dilation(poly, seed, delta):
    idx = PolygonIndex(poly, n_cells=16)
    pts = np.random.default_rng(seed).uniform(-2.5, 2.5, size=(400, 2))
    shape = shapely.Polygon(poly)
    d_edge = shapely.distance(shape.exterior, shapely.points(pts))
    inside = shapely.contains_xy(shape, pts[:, 0], pts[:, 1])
    ref = inside | (d_edge <= delta)
    clear = np.abs(d_edge - delta) > 1e-9  # skip points on the dilated edge
    np.testing.assert_array_equal(idx.within(pts, delta)[clear], ref[clear])


def test_distance_matches_shapely(rng):
    poly = _star(rng.uniform(0.5, 1.5, 200))
    idx = PolygonIndex(poly)
    pts = rng.uniform(-2, 2, size=(1000, 2))
    ref = shapely.distance(shapely.Polygon(poly).exterior, shapely.points(pts))
    np.testing.assert_allclose(idx.distance(pts), ref, atol=1e-12)
    sd = idx.signed_distance(pts)
    np.testing.assert_array_equal(sd < 0, shapely.contains_xy(shapely.Polygon(poly), pts[:, 0], pts[:, 1]))


def test_classify_band():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    idx = PolygonIndex(sq)
    got = idx.classify([[0.5, 0.5], [0.5, 1e-10], [2, 2], [1 + 1e-10, 0.5]], band=1e-9)
    assert got.tolist() == [INSIDE, BOUNDARY, OUTSIDE, BOUNDARY]


def test_multiscale_polygon_buckets():
    """Vertices clustered near the origin and far away still classify exactly."""
    t = np.linspace(0, 1, 4000)
    low = np.column_stack([1e-4 + t * 1e-3, 1e-4 + 0 * t])
    right = np.column_stack([np.full(4000, 1.1e-3), np.geomspace(1e-4, 200, 4000)])
    top = np.column_stack([np.linspace(1.1e-3, 1e-4, 10), np.full(10, 200.0)])
    poly = np.vstack([low, right[1:], top[1:]])
    idx = PolygonIndex(poly)
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0, 2e-3, 5000), np.exp(rng.uniform(np.log(5e-5), np.log(300), 5000))])
    ref = shapely.contains_xy(shapely.Polygon(poly), pts[:, 0], pts[:, 1])
    np.testing.assert_array_equal(idx.winding(pts) != 0, ref)
    np.testing.assert_array_equal(idx.within(pts, 0.0), ref)


def test_first_crossing_matches_shapely(rng):
    poly = _star(rng.uniform(0.8, 1.2, 300))
    idx = PolygonIndex(poly)
    for _ in range(20):
        a = rng.uniform(-0.3, 0.3, 2)
        path = a + np.cumsum(rng.normal(0, 0.05, size=(200, 2)), axis=0)
        hit = first_crossing(path, idx)
        line = shapely.LineString(path)
        inter = line.intersection(shapely.Polygon(poly).exterior)
        if inter.is_empty:
            assert hit is None
            continue
        pts = shapely.get_coordinates(inter)
        ref = min(line.project(shapely.Point(p)) for p in pts)
        assert hit is not None
        assert hit[0] == pytest.approx(ref, abs=1e-9)
        assert idx.distance(hit[1])[0] < 1e-9


def test_first_crossing_skip():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    idx = PolygonIndex(sq)
    path = np.array([[-1.0, 0.5], [2.0, 0.5]])
    pos, pt = first_crossing(path, idx)
    assert pos == pytest.approx(1.0) and pt == pytest.approx([0.0, 0.5])
    pos, pt = first_crossing(path, idx, skip=1.5)
    assert pos == pytest.approx(2.0) and pt == pytest.approx([1.0, 0.5])


def test_polyline_crossings():
    p = np.array([[0, 0], [2, 2]], dtype=float)
    q = np.array([[0, 2], [2, 0]], dtype=float)
    (s, t, pt), = polyline_crossings(p, q)
    assert pt == pytest.approx([1.0, 1.0])


@given(stars)
@settings(max_examples=40, deadline=None)
def test_area_centroid_and_simplicity(poly):
    shape = shapely.Polygon(poly)
    assert signed_area(poly) == pytest.approx(shape.area, rel=1e-9)
    assert signed_area(poly[::-1]) == pytest.approx(-shape.area, rel=1e-9)
    np.testing.assert_allclose(centroid(poly), shapely.get_coordinates(shape.centroid)[0], atol=1e-9)
    assert is_simple(close_ring(poly))


def test_bowtie_is_not_simple():
    assert not is_simple(close_ring(np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)))
