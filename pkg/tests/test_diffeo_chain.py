"""Chain construction and full-map properties on whole worlds."""

import numpy as np
import pytest
from shapely.geometry import Polygon as ShapelyPolygon

from semnav.diffeo import (
    DiffeoChain,
    MappedWorld,
    build_chain,
    check_chain,
    full_jacobian,
    full_map,
    full_map_and_jacobian,
)
from semnav.diffeo.construct import sample_freespace
from semnav.errors import ConstructionError, DomainError
from semnav.geometry import point_polygon_distance, polygon_contains
from tests.conftest import random_chain, u_shape_world


@pytest.fixture(scope="module")
def u_chain():
    return build_chain(u_shape_world())


def test_convex_obstacle_has_no_purging():
    boundary = np.array([[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]])
    box = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    chain = build_chain(MappedWorld(boundary=boundary, disk_components=(box,)))
    assert len(chain.stages) == 0
    assert len(chain.roots) == 1
    assert chain.roots[0].kind == "disk"


def test_u_shape_chain_structure(u_chain):
    # U decomposes into 3 pieces: 2 purgings then a disk root; box adds a root.
    assert len(chain_stages := u_chain.stages) == 2
    assert len(u_chain.roots) == 2
    # Every purging spec satisfies its invariants.
    for spec in chain_stages:
        assert polygon_contains(spec.collar, spec.inner).all()
        q = ShapelyPolygon(spec.collar)
        g = ShapelyPolygon(spec.inner)
        assert q.buffer(1e-9).covers(g)
        # Center strictly inside the parent piece side: (x1 - c)^T n > 0.
        assert spec.edge_offset > 0


def test_boundary_component_gets_merge_root():
    boundary = np.array([[-6.0, -6.0], [6.0, -6.0], [6.0, 6.0], [-6.0, 6.0]])
    rect = np.array([[5.0, -1.0], [7.0, -1.0], [7.0, 1.0], [5.0, 1.0]])
    clipped = np.asarray(
        ShapelyPolygon(rect).intersection(ShapelyPolygon(boundary)).exterior.coords
    )[:-1]
    chain = build_chain(MappedWorld(boundary=boundary, boundary_components=(clipped,)))
    assert len(chain.roots) == 1
    root = chain.roots[0]
    assert root.kind == "boundary"
    assert point_polygon_distance(root.center, boundary) > 1e-12


def test_construction_error_names_obstacle():
    # Boundary obstacle wrapped around an enclosure corner: its root touches
    # two boundary edges, so no single crossed-edge hyperplane exists.
    boundary = np.array([[-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0]])
    corner = np.array([[1.2, 1.2], [2.0, 1.2], [2.0, 2.0], [1.2, 2.0]])
    with pytest.raises(ConstructionError) as err:
        build_chain(MappedWorld(boundary=boundary, boundary_components=(corner,)))
    assert "obstacle 0" in str(err.value)


def test_empty_world_identity():
    chain = DiffeoChain()
    pts = np.random.default_rng(0).uniform(-5, 5, size=(100, 2))
    np.testing.assert_array_equal(full_map(pts, chain), pts)
    np.testing.assert_array_equal(full_jacobian(pts, chain), np.tile(np.eye(2), (100, 1, 1)))


def test_identity_outside_collars_exact(u_chain, rng):
    pts = rng.uniform(-6, 6, size=(4000, 2))
    outside = np.ones(len(pts), dtype=bool)
    for spec in list(u_chain.stages) + list(u_chain.roots):
        outside &= ~polygon_contains(spec.collar, pts)
    h = full_map(pts[outside], u_chain)
    assert np.array_equal(h, pts[outside])


def test_full_jacobian_matches_finite_differences(u_chain, rng):
    pts = sample_freespace(u_chain, 800, rng)
    y, jac = full_map_and_jacobian(pts, u_chain)
    step = 1e-6
    fd = np.empty_like(jac)
    for k, e in enumerate(np.eye(2)):
        fd[:, :, k] = (full_map(pts + step * e, u_chain) - full_map(pts - step * e, u_chain)) / (
            2 * step
        )
    rel = np.linalg.norm((fd - jac).reshape(-1, 4), axis=1)
    rel /= np.maximum(1.0, np.linalg.norm(jac.reshape(-1, 4), axis=1))
    assert rel.max() < 1e-5


def test_orientation_preserved(u_chain, rng):
    pts = sample_freespace(u_chain, 3000, rng)
    det = np.linalg.det(full_jacobian(pts, u_chain))
    assert det.min() > 0


def test_injectivity_sampled(u_chain, rng):
    pts = sample_freespace(u_chain, 3000, rng)
    y = full_map(pts, u_chain)
    ii = rng.integers(0, len(pts), 100_000)
    jj = rng.integers(0, len(pts), 100_000)
    apart = np.linalg.norm(pts[ii] - pts[jj], axis=1) >= 1e-6
    img = np.linalg.norm(y[ii][apart] - y[jj][apart], axis=1)
    assert img.min() > 1e-12


def test_domain_validation(u_chain):
    inside = np.array([0.9, -0.8])  # inside the U's right arm
    assert polygon_contains(u_chain.obstacles[0], inside[None, :])[0]
    with pytest.raises(DomainError):
        full_map(inside, u_chain, validate=True)


def test_check_chain_report(u_chain):
    report = check_chain(u_chain, samples=1500, seed=7)
    assert report["ok"], report["failures"]
    assert report["boundary_error"] < 1e-9
    assert report["jacobian_fd_max_rel"] < 1e-5
    assert report["identity_error"] < 1e-12


def test_random_worlds_battery(rng):
    for seed in (11, 23, 57):
        chain, world = random_chain(seed, n_obstacles=2)
        report = check_chain(chain, samples=1200, seed=seed)
        assert report["ok"], (seed, report["failures"])


def test_deterministic_construction():
    w = u_shape_world()
    a = build_chain(w)
    b = build_chain(w)
    assert len(a.stages) == len(b.stages)
    for sa, sb in zip(a.stages, b.stages):
        np.testing.assert_array_equal(sa.collar, sb.collar)
        np.testing.assert_array_equal(sa.center, sb.center)
