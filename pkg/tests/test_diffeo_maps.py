"""Stage maps: switches, deforming factors, purging and root transformations."""

import numpy as np
import pytest

from semnav.diffeo import (
    build_chain,
    deforming_factor,
    deforming_factor_and_gradient,
    purging_jacobian,
    purging_map,
    root_map,
    switch,
)
from semnav.diffeo.maps import stage_determinant
from semnav.errors import DomainError
from semnav.geometry import polygon_contains, point_polygon_distance
from tests.conftest import u_shape_world


@pytest.fixture(scope="module")
def u_chain():
    return build_chain(u_shape_world())


@pytest.fixture(scope="module")
def purging_spec(u_chain):
    return u_chain.stages[0]


def collar_band_samples(spec, rng, n=1000):
    """Random points with strictly interior switch value (0 < sigma < 1)."""
    lo = spec.collar.min(axis=0)
    hi = spec.collar.max(axis=0)
    out = []
    while len(out) < n:
        pts = rng.uniform(lo, hi, size=(4 * n, 2))
        s = switch(pts, spec)
        pick = (s > 1e-9) & (s < 1 - 1e-9)
        out.extend(pts[pick])
    return np.asarray(out[:n])


# -- switch --------------------------------------------------------------------


def test_switch_zero_outside_collar(purging_spec, rng):
    lo = purging_spec.collar.min(axis=0) - 2.0
    hi = purging_spec.collar.max(axis=0) + 2.0
    pts = rng.uniform(lo, hi, size=(2000, 2))
    outside = ~polygon_contains(purging_spec.collar, pts)
    s = switch(pts[outside], purging_spec)
    assert np.all(s == 0.0)


def test_switch_one_on_leaf_edge_interior(purging_spec):
    # Midpoint of a free edge of the inner polygon: gamma = 0, delta > 0.
    mid = (purging_spec.inner[3] + purging_spec.inner[4]) / 2.0
    assert switch(mid, purging_spec) == pytest.approx(1.0, abs=1e-12)


def test_switch_one_at_shared_edge_endpoints(purging_spec):
    assert switch(purging_spec.edge_start, purging_spec) == 1.0
    assert switch(purging_spec.edge_end, purging_spec) == 1.0


def test_switch_range(purging_spec, rng):
    lo = purging_spec.collar.min(axis=0) - 0.5
    hi = purging_spec.collar.max(axis=0) + 0.5
    s = switch(rng.uniform(lo, hi, size=(5000, 2)), purging_spec)
    assert np.all((s >= 0.0) & (s <= 1.0))


# -- deforming factor ------------------------------------------------------------


def test_factor_one_on_shared_hyperplane(purging_spec):
    assert deforming_factor(purging_spec.edge_start, purging_spec) == pytest.approx(1.0)
    mid = (purging_spec.edge_start + purging_spec.edge_end) / 2.0
    assert deforming_factor(mid, purging_spec) == pytest.approx(1.0)


def test_factor_ratio_definition(purging_spec):
    x = purging_spec.center + 2.0 * (purging_spec.edge_start - purging_spec.center)
    # Twice the hyperplane distance halves the factor.
    assert deforming_factor(x, purging_spec) == pytest.approx(0.5, rel=1e-12)


def test_factor_gradient_identity(purging_spec, rng):
    pts = collar_band_samples(purging_spec, rng, n=1000)
    nu, dnu = deforming_factor_and_gradient(pts, purging_spec)
    residual = np.einsum("ij,ij->i", pts - purging_spec.center, dnu) + nu
    assert np.abs(residual).max() < 1e-10


def test_factor_singular_hyperplane_raises(purging_spec):
    tangent = purging_spec.edge_end - purging_spec.edge_start
    tangent /= np.linalg.norm(tangent)
    x = purging_spec.center + 3.0 * tangent  # on the line through the center
    with pytest.raises(DomainError):
        deforming_factor(x, purging_spec)


# -- purging map -----------------------------------------------------------------


def test_purging_identity_outside_collar(purging_spec, rng):
    lo = purging_spec.collar.min(axis=0) - 3.0
    hi = purging_spec.collar.max(axis=0) + 3.0
    pts = rng.uniform(lo, hi, size=(3000, 2))
    outside = ~polygon_contains(purging_spec.collar, pts)
    h = purging_map(pts[outside], purging_spec)
    assert np.array_equal(h, pts[outside])  # exact identity, no float drift


def test_purging_boundary_to_shared_hyperplane(purging_spec):
    # Points on the inner polygon's free edges land on the shared hyperplane.
    inner = purging_spec.inner
    samples = []
    for k in range(2, len(inner)):  # skip the two edges through the center
        a, b = inner[k], inner[(k + 1) % len(inner)]
        ts = np.linspace(0.05, 0.95, 7)
        samples.extend(a + t * (b - a) for t in ts)
    samples = np.asarray(samples)
    h = purging_map(samples, purging_spec)
    resid = (h - purging_spec.edge_start) @ purging_spec.normal
    assert np.abs(resid).max() < 1e-9


def test_purging_interior_collar_point(purging_spec, rng):
    pts = collar_band_samples(purging_spec, rng, n=200)
    h = purging_map(pts, purging_spec)
    jac = purging_jacobian(pts, purging_spec)
    det = np.linalg.det(jac)
    assert np.all(det > 0)
    # Images never enter the leaf piece interior (they move parent-ward).
    leaf_like = purging_spec.inner
    step = 1e-6
    fd = np.empty_like(jac)
    for k, e in enumerate(np.eye(2)):
        fd[:, :, k] = (
            purging_map(pts + step * e, purging_spec) - purging_map(pts - step * e, purging_spec)
        ) / (2 * step)
    assert np.all(np.linalg.det(fd) > 0)


# -- purging jacobian --------------------------------------------------------------


def test_jacobian_identity_outside(purging_spec):
    far = purging_spec.collar.max(axis=0) + np.array([5.0, 5.0])
    np.testing.assert_array_equal(purging_jacobian(far, purging_spec), np.eye(2))


def test_jacobian_matches_finite_differences(purging_spec, rng):
    pts = collar_band_samples(purging_spec, rng, n=300)
    jac = purging_jacobian(pts, purging_spec)
    step = 1e-6
    fd = np.empty_like(jac)
    for k, e in enumerate(np.eye(2)):
        fd[:, :, k] = (
            purging_map(pts + step * e, purging_spec) - purging_map(pts - step * e, purging_spec)
        ) / (2 * step)
    rel = np.linalg.norm((fd - jac).reshape(-1, 4), axis=1)
    rel /= np.maximum(1.0, np.linalg.norm(jac.reshape(-1, 4), axis=1))
    assert rel.max() < 1e-5


def test_determinant_formula_matches_direct(purging_spec, rng):
    pts = collar_band_samples(purging_spec, rng, n=1000)
    jac = purging_jacobian(pts, purging_spec)
    direct = np.linalg.det(jac)
    formula = stage_determinant(pts, purging_spec)
    rel = np.abs(formula - direct) / np.maximum(1.0, np.abs(direct))
    assert rel.max() < 1e-10


def test_jacobian_positive_near_unit_switch_region(purging_spec):
    # Approach the inner boundary from the freespace side: sigma -> 1 there and
    # the determinant must stay positive.
    inner = purging_spec.inner
    a, b = inner[3], inner[4]
    mid = (a + b) / 2.0
    edge = b - a
    outward = np.array([edge[1], -edge[0]]) / np.linalg.norm(edge)
    for off in (1e-4, 1e-3, 1e-2):
        x = mid + off * outward
        det = np.linalg.det(purging_jacobian(x, purging_spec))
        assert det > 0


# -- root map ----------------------------------------------------------------------


def test_root_identity_far_away(u_chain):
    x = np.array([-5.5, -5.5])
    np.testing.assert_array_equal(root_map(x, u_chain.roots), x)


def test_disk_root_boundary_to_circle(u_chain):
    root = u_chain.roots[1]  # the convex box obstacle: no purging stages
    assert root.kind == "disk"
    poly = root.inner
    samples = []
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        samples.extend(a + t * (b - a) for t in np.linspace(0.02, 0.98, 9))
    samples = np.asarray(samples)
    images = root_map(samples, u_chain.roots)
    radii = np.linalg.norm(images - root.center, axis=1)
    assert np.abs(radii - root.radius).max() < 1e-9


def test_boundary_root_maps_onto_enclosure():
    from semnav.diffeo import MappedWorld
    from shapely.geometry import Polygon as ShapelyPolygon

    boundary = np.array([[-6.0, -6.0], [6.0, -6.0], [6.0, 6.0], [-6.0, 6.0]])
    rect = np.array([[5.0, -1.0], [7.0, -1.0], [7.0, 1.0], [5.0, 1.0]])
    clipped = np.asarray(
        ShapelyPolygon(rect).intersection(ShapelyPolygon(boundary)).exterior.coords
    )[:-1]
    chain = build_chain(MappedWorld(boundary=boundary, boundary_components=(clipped,)))
    root = chain.roots[0]
    assert root.kind == "boundary"
    assert point_polygon_distance(root.center, boundary) > 0  # center outside
    # Free-boundary samples (off the enclosure) map onto the enclosure polyline.
    samples = []
    m = len(clipped)
    for k in range(m):
        a, b = clipped[k], clipped[(k + 1) % m]
        samples.extend(a + t * (b - a) for t in np.linspace(0.03, 0.97, 9))
    samples = np.asarray(samples)
    off_hull = point_polygon_distance(samples, boundary, signed=False) > 1e-6
    images = root_map(samples[off_hull], chain.roots)
    err = point_polygon_distance(images, boundary, signed=False)
    assert err.max() < 1e-9
