"""Shared fixtures and random-geometry helpers for the test suite."""

import numpy as np
import pytest


def star_polygon(rng, n_vertices, r_lo=0.6, r_hi=2.2, dent_prob=0.3, dent_hi=0.9):
    """Random star-shaped simple polygon around the origin (CCW)."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
    # Enforce angular separation so no two vertices nearly coincide.
    while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 0.08:
        angles = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
    radii = np.where(
        rng.random(n_vertices) < dent_prob,
        rng.uniform(r_lo, dent_hi, n_vertices),
        rng.uniform(1.4, r_hi, n_vertices),
    )
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


def reflex_count(vertices):
    v = np.asarray(vertices, float)
    n = len(v)
    count = 0
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        if (b - a)[0] * (c - b)[1] - (b - a)[1] * (c - b)[0] < 0:
            count += 1
    return count


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_square():
    return np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@pytest.fixture
def l_shape():
    return np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])


@pytest.fixture
def twelve_gon_three_reflex():
    """Frozen random 12-gon with exactly 3 reflex vertices."""
    rng = np.random.default_rng(21)
    angles = np.linspace(0, 2 * np.pi, 13)[:-1]
    radii = np.where(rng.random(12) < 0.25, rng.uniform(0.6, 0.9, 12), rng.uniform(1.7, 2.2, 12))
    v = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    assert reflex_count(v) == 3
    return v


def u_shape_world():
    """Square boundary with one U-shaped interior obstacle and one box."""
    from semnav.diffeo import MappedWorld

    boundary = np.array([[-6.0, -6.0], [6.0, -6.0], [6.0, 6.0], [-6.0, 6.0]])
    u_shape = np.array(
        [[0, 0], [3, 0], [3, 2], [2, 2], [2, 1], [1, 1], [1, 2], [0, 2]], float
    ) - np.array([1.5, 1.0])
    box = np.array([[3.5, 3.0], [4.5, 3.0], [4.5, 4.2], [3.5, 4.2]])
    return MappedWorld(boundary=boundary, disk_components=(u_shape, box), collar_margin=0.1)


def random_mapped_world(seed, n_obstacles=3, box=5.0, max_vertices=12):
    """Random non-overlapping star obstacles in a square boundary; returns a
    MappedWorld or None when the draw is unusable (caller retries seeds)."""
    from shapely.geometry import Polygon as ShapelyPolygon

    from semnav.diffeo import MappedWorld

    rng = np.random.default_rng(seed)
    boundary = np.array([[-box, -box], [box, -box], [box, box], [-box, box]])
    polys = []
    shapes = []
    for _ in range(40):
        if len(polys) == n_obstacles:
            break
        n_v = int(rng.integers(4, max_vertices + 1))
        poly = star_polygon(rng, n_v) * rng.uniform(0.35, 0.7)
        poly = poly + rng.uniform(-box + 2.5, box - 2.5, 2)
        sp = ShapelyPolygon(poly)
        if not sp.is_valid:
            continue
        if any(sp.distance(other) < 0.45 for other in shapes):
            continue
        polys.append(poly)
        shapes.append(sp)
    if len(polys) < n_obstacles:
        return None
    return MappedWorld(boundary=boundary, disk_components=tuple(polys), collar_margin=0.1)


def random_chain(seed, n_obstacles=3):
    """Deterministic (chain, world) from the seed, skipping unbuildable draws."""
    from semnav.diffeo import build_chain
    from semnav.errors import ConstructionError

    s = seed
    for _ in range(60):
        world = random_mapped_world(s, n_obstacles)
        if world is not None:
            try:
                return build_chain(world), world
            except ConstructionError:
                pass
        s += 1000
    raise RuntimeError("could not build a random world")
