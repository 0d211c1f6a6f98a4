"""Polygon primitives: validation, dilation, consolidation, projections."""

import numpy as np
import pytest
from shapely.geometry import Point, Polygon as ShapelyPolygon

from semnav.errors import GeometryError
from semnav.geometry import (
    consolidate,
    convex_hull,
    dilate,
    ensure_ccw,
    point_polygon_distance,
    polygon_area,
    polygon_centroid,
    polygon_contains,
    project_convex,
    project_disk,
    signed_area,
    validate_polygon,
)
from tests.conftest import star_polygon


def test_validate_rejects_few_vertices():
    with pytest.raises(GeometryError):
        validate_polygon([[0, 0], [1, 0]])


def test_validate_rejects_coincident_vertices():
    with pytest.raises(GeometryError):
        validate_polygon([[0, 0], [1, 0], [1, 0 + 1e-12], [0, 1]])


def test_validate_rejects_self_intersection():
    bowtie = [[0, 0], [1, 1], [1, 0], [0, 1]]
    with pytest.raises(GeometryError):
        validate_polygon(bowtie)


def test_validate_reorients_clockwise_input(unit_square):
    cw = unit_square[::-1]
    out = validate_polygon(cw)
    assert signed_area(out) > 0


def test_area_and_centroid(l_shape):
    assert polygon_area(l_shape) == pytest.approx(3.0)
    sh = ShapelyPolygon(l_shape)
    np.testing.assert_allclose(polygon_centroid(l_shape), [sh.centroid.x, sh.centroid.y], atol=1e-12)


def test_contains_matches_shapely_oracle(rng):
    for k in range(5):
        poly = star_polygon(rng, int(rng.integers(5, 13)))
        poly = ensure_ccw(poly)
        sh = ShapelyPolygon(poly)
        pts = rng.uniform(-2.5, 2.5, size=(500, 2))
        # Skip points too close to the boundary to make the oracle unambiguous.
        keep = np.array([sh.exterior.distance(Point(p)) > 1e-9 for p in pts])
        ours = polygon_contains(poly, pts[keep])
        theirs = np.array([sh.contains(Point(p)) for p in pts[keep]])
        np.testing.assert_array_equal(ours, theirs)


def test_signed_distance(unit_square):
    assert point_polygon_distance([0.0, 0.0], unit_square) == pytest.approx(-1.0)
    assert point_polygon_distance([2.0, 0.0], unit_square) == pytest.approx(1.0)
    assert point_polygon_distance([1.0, 0.0], unit_square) == pytest.approx(0.0, abs=1e-12)


# -- dilation -----------------------------------------------------------------


def test_dilate_zero_radius_is_identity(unit_square):
    np.testing.assert_allclose(dilate(unit_square, 0.0), unit_square)


def test_dilate_unit_square_area(unit_square):
    # Minkowski area of polygon + disk: A + P*r + pi*r^2. The polygonal
    # output is an inner approximation, short by at most the arc sagitta band.
    r = 0.2
    exact = 4.0 + 8.0 * r + np.pi * r**2
    area = polygon_area(dilate(unit_square, r))
    sagitta_band = 2 * np.pi * r * (1e-3 * r)
    assert exact - 10 * sagitta_band <= area <= exact


def test_dilate_thin_polygon():
    thin = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 1e-6], [0.0, 1e-6]])
    out = dilate(thin, 0.2)
    assert ShapelyPolygon(out).is_valid
    # Sampled boundary points sit ~0.2 from the segment spine.
    spine = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 1e-6], [0.0, 1e-6]])
    d = np.abs(point_polygon_distance(out, spine, signed=False))
    assert np.all(d <= 0.2 + 1e-9)
    assert np.all(d >= 0.2 - 1e-3)
    # Total width is ~2r (plus the negligible spine height).
    assert np.ptp(out[:, 1]) == pytest.approx(0.4, rel=1e-2)


def test_dilate_monotone(unit_square, rng):
    small = ShapelyPolygon(dilate(unit_square, 0.1))
    big = ShapelyPolygon(dilate(unit_square, 0.3))
    assert big.buffer(1e-9).covers(small)


# -- consolidation ------------------------------------------------------------


def test_consolidate_disjoint(unit_square):
    far = unit_square + np.array([10.0, 0.0])
    comps = consolidate([unit_square, far])
    assert len(comps) == 2
    assert sum(polygon_area(c) for c in comps) == pytest.approx(8.0)


def test_consolidate_overlap_inclusion_exclusion(unit_square):
    shifted = unit_square + np.array([1.0, 0.0])
    comps = consolidate([unit_square, shifted])
    assert len(comps) == 1
    oracle = ShapelyPolygon(unit_square).union(ShapelyPolygon(shifted)).area
    assert polygon_area(comps[0]) == pytest.approx(oracle, rel=1e-12)


def test_consolidate_ring_fills_hole():
    # Four rectangles forming a square ring with a 1x1 hole in the middle.
    bars = [
        np.array([[0, 0], [3, 0], [3, 1], [0, 1]], float),
        np.array([[0, 2], [3, 2], [3, 3], [0, 3]], float),
        np.array([[0, 0], [1, 0], [1, 3], [0, 3]], float),
        np.array([[2, 0], [3, 0], [3, 3], [2, 3]], float),
    ]
    comps = consolidate(bars)
    assert len(comps) == 1
    # Hole is filled: area is the full 3x3 block and the center is inside.
    assert polygon_area(comps[0]) == pytest.approx(9.0)
    assert bool(polygon_contains(comps[0], np.array([[1.5, 1.5]]))[0])


# -- projections --------------------------------------------------------------


def test_project_interior_point_is_identity():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    np.testing.assert_allclose(project_convex([0.3, 0.7], sq), [0.3, 0.7])


def test_project_disk_radial():
    np.testing.assert_allclose(project_disk([2.0, 0.0], [0.0, 0.0], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(project_disk([0.2, 0.1], [0.0, 0.0], 1.0), [0.2, 0.1])


def test_project_corner():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    np.testing.assert_allclose(project_convex([2.0, 2.0], sq), [1.0, 1.0])


def test_projection_optimality(rng):
    hull = convex_hull(rng.normal(size=(12, 2)))
    for _ in range(50):
        x = rng.uniform(-4, 4, 2)
        px = project_convex(x, hull)
        # No sampled member of the region is closer than the projection.
        samples = rng.uniform(hull.min(axis=0), hull.max(axis=0), size=(200, 2))
        inside = samples[polygon_contains(hull, samples)]
        if len(inside):
            assert np.linalg.norm(x - px) <= np.linalg.norm(inside - x, axis=1).min() + 1e-12


def test_convex_hull_square_with_interior_points(rng):
    pts = np.vstack([
        np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float),
        rng.uniform(0.5, 3.5, size=(30, 2)),
    ])
    h = convex_hull(pts)
    assert len(h) == 4
    assert polygon_area(h) == pytest.approx(16.0)
