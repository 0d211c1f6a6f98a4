"""Simple-polygon primitives: validation, areas, containment, dilation, unions.

Polygons are plain (N, 2) float arrays of vertices in counterclockwise order,
without a repeated closing vertex. Shapely backs the boolean/offsetting
operations; everything evaluated inside control loops is pure numpy.
"""

import math

import numpy as np
import shapely
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.ops import unary_union

from semnav.errors import GeometryError

# Duplicate-vertex tolerance, in meters.
COINCIDENT_TOL = 1e-9

# Arc discretization for dilation: chord sagitta at most 1e-3 * radius means a
# segment angle of at most 2*acos(1 - 1e-3), i.e. at least 18 segments per
# quarter circle.
_QUAD_SEGS = 18


def as_vertices(points) -> np.ndarray:
    """Coerce input to an (N, 2) float array, dropping a repeated closing vertex."""
    v = np.asarray(points, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise GeometryError(f"expected an (N, 2) vertex array, got shape {v.shape}")
    if len(v) >= 2 and np.linalg.norm(v[0] - v[-1]) <= COINCIDENT_TOL:
        v = v[:-1]
    return v


def signed_area(vertices) -> float:
    """Signed area of the vertex cycle (positive for counterclockwise order)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_area(vertices) -> float:
    return abs(signed_area(vertices))


def polygon_centroid(vertices) -> np.ndarray:
    """Area centroid of a simple polygon."""
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    cross = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return v.mean(axis=0)
    cx = ((v[:, 0] + nxt[:, 0]) * cross).sum() / (6.0 * a)
    cy = ((v[:, 1] + nxt[:, 1]) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def dedupe_vertices(vertices, tol: float = 1e-9) -> np.ndarray:
    """Drop consecutive (near-)duplicate vertices from a cycle."""
    v = as_vertices(vertices)
    gaps = np.linalg.norm(np.concatenate((v[1:], v[:1])) - v, axis=1)
    keep = gaps > tol
    return v[keep] if keep.sum() >= 3 else v


def ensure_ccw(vertices) -> np.ndarray:
    """Return the vertex cycle in counterclockwise order."""
    v = as_vertices(vertices)
    return v if signed_area(v) >= 0.0 else v[::-1].copy()


def validate_polygon(vertices) -> np.ndarray:
    """Validate a simple polygon and return its vertices in CCW order.

    Raises GeometryError for fewer than 3 vertices, coincident consecutive
    vertices (tolerance 1e-9 m), self-intersection, or zero area.
    """
    v = as_vertices(vertices)
    if len(v) < 3:
        raise GeometryError(f"polygon needs at least 3 vertices, got {len(v)}")
    gaps = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    if np.any(gaps <= COINCIDENT_TOL):
        k = int(np.argmin(gaps))
        raise GeometryError(f"consecutive vertices {k} and {k + 1} coincide")
    if polygon_area(v) <= COINCIDENT_TOL**2:
        raise GeometryError("polygon has (near-)zero area")
    if not ShapelyPolygon(v).is_valid:
        raise GeometryError("polygon is self-intersecting or otherwise invalid")
    return ensure_ccw(v)


def polygon_contains(vertices, points, include_boundary: bool = True) -> np.ndarray:
    """Crossing-number containment test for a batch of points.

    Returns a boolean array; boundary points count as inside when
    ``include_boundary`` (up to float cancellation on the boundary itself).
    """
    v = np.asarray(vertices, dtype=float)
    p = np.atleast_2d(np.asarray(points, dtype=float))
    a = v
    b = np.concatenate((v[1:], v[:1]))
    # Ray to +x: edge straddles the horizontal line through the point?
    ay = a[:, 1][None, :]
    by = b[:, 1][None, :]
    py = p[:, 1][:, None]
    straddle = (ay <= py) != (by <= py)
    # x-coordinate of the edge at height py.
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (py - ay) / (by - ay)
    xi = a[:, 0][None, :] + t * (b[:, 0] - a[:, 0])[None, :]
    crossing = straddle & (xi > p[:, 0][:, None])
    inside = (crossing.sum(axis=1) % 2) == 1
    if include_boundary:
        d = point_polygon_distance(p, v, signed=False)
        inside |= d <= COINCIDENT_TOL
    return inside if np.asarray(points).ndim == 2 else inside[0]


def point_polygon_distance(points, vertices, signed: bool = True):
    """Distance from points to a polygon; negative inside when ``signed``.

    The unsigned variant returns the distance to the boundary polyline.
    """
    v = np.asarray(vertices, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        return _point_polygon_distance_single(pts, v, signed)
    p = np.atleast_2d(pts)
    a = v
    e = np.concatenate((v[1:], v[:1])) - v
    ee = (e * e).sum(axis=1)
    ee = np.where(ee < 1e-300, 1.0, ee)
    diff = p[:, None, :] - a[None, :, :]
    t = np.clip((diff * e[None, :, :]).sum(axis=2) / ee[None, :], 0.0, 1.0)
    res = diff - t[:, :, None] * e[None, :, :]
    d = np.sqrt((res * res).sum(axis=2).min(axis=1))
    if signed:
        inside = polygon_contains(v, p, include_boundary=False)
        d = np.where(inside, -d, d)
    return d if np.asarray(points).ndim == 2 else float(d[0])


def _point_polygon_distance_single(p, v, signed: bool) -> float:
    a = v
    e = np.concatenate((v[1:], v[:1])) - v
    ee = (e * e).sum(axis=1)
    ee = np.where(ee < 1e-300, 1.0, ee)
    rel = p - a
    t = np.clip((rel * e).sum(axis=1) / ee, 0.0, 1.0)
    res = rel - t[:, None] * e
    d = math.sqrt(float((res * res).sum(axis=1).min()))
    if signed:
        # Crossing-number parity along +x.
        ay = a[:, 1]
        by = ay + e[:, 1]
        straddle = (ay <= p[1]) != (by <= p[1])
        if straddle.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                tt = (p[1] - ay) / (by - ay)
            xi = a[:, 0] + tt * e[:, 0]
            if (np.count_nonzero(straddle & (xi > p[0])) % 2) == 1:
                return -d
    return d


def nearest_boundary_point(point, vertices) -> np.ndarray:
    """Closest point on the polygon boundary to ``point`` (works from either side)."""
    v = np.asarray(vertices, dtype=float)
    p = np.asarray(point, dtype=float)
    a = v
    e = np.concatenate((v[1:], v[:1])) - v
    ee = (e * e).sum(axis=1)
    ee = np.where(ee < 1e-300, 1.0, ee)
    t = np.clip(((p - a) * e).sum(axis=1) / ee, 0.0, 1.0)
    foot = a + t[:, None] * e
    res = foot - p
    d = (res * res).sum(axis=1)
    return foot[int(np.argmin(d))]


def _shapely_to_vertices(geom) -> np.ndarray:
    ext = np.asarray(geom.exterior.coords)[:-1]
    return ensure_ccw(ext)


def dilate(vertices, r: float) -> np.ndarray:
    """Dilate a polygon by a disk of radius r (Minkowski sum), as a polygon.

    Arcs at convex corners are replaced by inscribed chords with sagitta at
    most 1e-3 * r, so the result is an inner approximation of the exact
    dilation: clearance computed against it is never optimistic.
    """
    if r < 0:
        raise GeometryError("dilation radius must be nonnegative")
    v = validate_polygon(vertices)
    if r == 0.0:
        return v
    out = ShapelyPolygon(v).buffer(r, quad_segs=_QUAD_SEGS)
    return _shapely_to_vertices(shapely.geometry.polygon.orient(out, 1.0))


def erode(vertices, r: float) -> np.ndarray:
    """Erode a polygon by a disk of radius r (Minkowski difference).

    Used to turn the physical workspace into the set of admissible robot
    centers. Raises if the polygon vanishes under erosion.
    """
    v = validate_polygon(vertices)
    if r == 0.0:
        return v
    out = ShapelyPolygon(v).buffer(-r, quad_segs=_QUAD_SEGS)
    if out.is_empty:
        raise GeometryError(f"polygon vanishes when eroded by {r}")
    if out.geom_type == "MultiPolygon":
        out = max(out.geoms, key=lambda g: g.area)
    return _shapely_to_vertices(shapely.geometry.polygon.orient(out, 1.0))


def consolidate(polygons) -> list[np.ndarray]:
    """Union a collection of polygons into disjoint connected components.

    Overlapping inputs merge into a single component; interior holes created
    by the union are filled, so every component is simply connected. Returns
    the components in a deterministic order (lexicographic lowest vertex).
    """
    polys = [ShapelyPolygon(validate_polygon(p)) for p in polygons]
    if not polys:
        return []
    merged = unary_union(polys)
    if merged.geom_type == "Polygon":
        geoms = [merged]
    else:
        geoms = list(merged.geoms)
    comps = []
    for g in geoms:
        comps.append(_shapely_to_vertices(ShapelyPolygon(g.exterior)))
    comps.sort(key=lambda c: (round(c[:, 0].min(), 12), round(c[:, 1].min(), 12)))
    return comps


def convex_hull(points) -> np.ndarray:
    """Convex hull of a point set (CCW, near-collinear chain points merged)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise GeometryError("hull needs at least 3 distinct points")
    hull = shapely.MultiPoint(pts).convex_hull
    if hull.geom_type != "Polygon":
        raise GeometryError("points are collinear; hull is degenerate")
    v = ensure_ccw(np.asarray(hull.exterior.coords)[:-1])
    # Merge residual near-collinear vertices so downstream edge counts stay small.
    keep = []
    n = len(v)
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > 1e-12 * max(1.0, np.linalg.norm(b - a) * np.linalg.norm(c - b)):
            keep.append(i)
    if len(keep) < 3:
        raise GeometryError("points are collinear; hull is degenerate")
    return v[keep]
