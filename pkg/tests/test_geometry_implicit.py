"""Implicit polygon functions: sign convention, frozen values, gradients."""

import numpy as np
import pytest
from shapely.geometry import Point, Polygon as ShapelyPolygon

from semnav.errors import GeometryError
from semnav.geometry import ImplicitFn, build_implicit, ensure_ccw
from tests.conftest import star_polygon


def hand_fold_square_center():
    """Independent evaluation of the fold at the center of [-1,1]^2, p=2.

    All four edge half-plane values equal 1 at the center; the chain is
    1^1 = 2 - sqrt(2), then conjoin 1 twice, then negate.
    """
    s = 2.0 - np.sqrt(2.0)
    for _ in range(2):
        s = s + 1.0 - np.hypot(s, 1.0)
    return -s


def test_square_boundary_zero(unit_square):
    f = build_implicit(unit_square, p=2)
    assert f.value([1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert f.value([0.0, -1.0]) == pytest.approx(0.0, abs=1e-12)


def test_square_center_frozen_value(unit_square):
    f = build_implicit(unit_square, p=2)
    expected = hand_fold_square_center()
    assert expected == pytest.approx(-0.3395561993976382, abs=1e-12)
    assert f.value([0.0, 0.0]) == pytest.approx(expected, abs=1e-12)


def test_square_exterior_positive(unit_square):
    f = build_implicit(unit_square, p=2)
    assert f.value([10.0, 0.0]) > 0.0


def test_sign_matches_point_in_polygon_oracle(rng):
    """Sign of the fold agrees with shapely containment away from the boundary."""
    for _ in range(4):
        poly = ensure_ccw(star_polygon(rng, int(rng.integers(5, 13))))
        f = build_implicit(poly, p=2)
        sh = ShapelyPolygon(poly)
        pts = rng.uniform(-2.6, 2.6, size=(10_000, 2))
        dist = np.array([sh.exterior.distance(Point(p)) for p in pts])
        keep = dist > 1e-9
        vals = f.value(pts[keep])
        inside = np.array([sh.contains(Point(p)) for p in pts[keep]])
        np.testing.assert_array_equal(vals < 0, inside)


def test_gradient_matches_finite_differences(rng, unit_square):
    poly = ensure_ccw(star_polygon(rng, 9))
    for f in (build_implicit(unit_square), build_implicit(poly)):
        for _ in range(50):
            x = rng.uniform(-2.4, 2.4, 2)
            v, g = f.value_and_gradient(x[None, :])
            h = 1e-6
            fd = np.array([
                (f.value(x + h * e) - f.value(x - h * e)) / (2 * h) for e in np.eye(2)
            ])
            if np.linalg.norm(fd) < 1e-6:
                continue
            np.testing.assert_allclose(g[0], fd, rtol=1e-5, atol=1e-8)


def test_even_exponent_four(unit_square):
    f = build_implicit(unit_square, p=4)
    assert f.value([0.0, 0.0]) < 0
    assert f.value([3.0, 3.0]) > 0
    assert f.value([1.0, 0.5]) == pytest.approx(0.0, abs=1e-12)


def test_rejects_odd_exponent(unit_square):
    with pytest.raises(GeometryError):
        build_implicit(unit_square, p=3)


def test_rejects_degenerate_polygon():
    with pytest.raises(GeometryError):
        build_implicit([[0, 0], [1, 0], [1, 1e-13], [0, 1e-13]])


def test_collar_convention_positive_inside(unit_square):
    f = ImplicitFn.from_polygon(unit_square, negated=False)
    assert f.value([0.0, 0.0]) > 0
    assert f.value([5.0, 0.0]) < 0
