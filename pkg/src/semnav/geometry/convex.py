"""Convex-set helpers: projections, half-plane clipping, separation.

All polygons here are convex CCW (N, 2) arrays. These routines run inside
the control loop, so they stay in plain numpy.
"""

import numpy as np

from semnav.errors import GeometryError
from semnav.geometry.implicit import cross2, rot90
from semnav.geometry.polygon import polygon_contains


def project_convex(point, region) -> np.ndarray:
    """Euclidean projection of a point onto a closed convex polygon."""
    v = np.asarray(region, dtype=float)
    p = np.asarray(point, dtype=float)
    if len(v) < 3:
        raise GeometryError("projection region must be a polygon")
    a = v
    e = np.concatenate((v[1:], v[:1])) - v
    # Inside a convex CCW polygon iff left of every edge; members project to
    # themselves (boundary points land on their own edge foot anyway).
    rel = p - a
    if np.all(e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0] >= 0.0):
        return p.copy()
    ee = np.maximum((e * e).sum(axis=1), 1e-300)
    t = np.clip((rel * e).sum(axis=1) / ee, 0.0, 1.0)
    feet = a + t[:, None] * e
    res = feet - p
    d = (res * res).sum(axis=1)
    return feet[int(np.argmin(d))].copy()


def project_disk(point, center, radius: float) -> np.ndarray:
    """Euclidean projection of a point onto a closed disk."""
    p = np.asarray(point, dtype=float)
    c = np.asarray(center, dtype=float)
    d = p - c
    norm = float(np.linalg.norm(d))
    if norm <= radius:
        return p.copy()
    return c + (radius / norm) * d


def clip_halfplane(vertices, anchor, inward_normal) -> np.ndarray:
    """Clip a convex CCW polygon by the half-plane (x - anchor)^T n >= 0.

    Returns an empty (0, 2) array when nothing survives.
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) == 0:
        return v.reshape(0, 2)
    a = np.asarray(anchor, dtype=float)
    n = np.asarray(inward_normal, dtype=float)
    s = (v - a) @ n
    keep = s >= 0.0
    if keep.all():
        return v
    if not keep.any():
        return np.zeros((0, 2))
    nxt = np.concatenate((v[1:], v[:1]))
    s_next = np.concatenate((s[1:], s[:1]))
    cross = keep != (s_next >= 0.0)
    t = np.zeros(len(v))
    denom = s - s_next
    np.divide(s, denom, out=t, where=cross & (denom != 0.0))
    crossings = v + t[:, None] * (nxt - v)
    # Interleave kept vertices with edge crossings, preserving cycle order.
    slots = np.empty((2 * len(v), 2))
    valid = np.empty(2 * len(v), dtype=bool)
    slots[0::2] = v
    valid[0::2] = keep
    slots[1::2] = crossings
    valid[1::2] = cross
    result = slots[valid]
    # Drop duplicates introduced by vertices lying exactly on the clip line.
    gaps = result - np.concatenate((result[-1:], result[:-1]))
    dedup = (gaps * gaps).sum(axis=1) > 1e-24
    result = result[dedup]
    return result if len(result) >= 3 else np.zeros((0, 2))


def convex_clip(subject, clip) -> np.ndarray:
    """Intersection of two convex CCW polygons (Sutherland-Hodgman)."""
    result = np.asarray(subject, dtype=float)
    c = np.asarray(clip, dtype=float)
    m = len(c)
    for i in range(m):
        a = c[i]
        edge = c[(i + 1) % m] - a
        n = rot90(edge / max(np.linalg.norm(edge), 1e-300))
        result = clip_halfplane(result, a, n)
        if len(result) == 0:
            return result
    return result


def _segment_distance(p1, p2, q1, q2):
    """Closest points between two segments; returns (d, point_on_p, point_on_q)."""
    best = (np.inf, None, None)
    for (a, b, other_a, other_b, swap) in (
        (p1, p2, q1, q2, False),
        (q1, q2, p1, p2, True),
    ):
        e = b - a
        ee = max(float(e @ e), 1e-300)
        for q in (other_a, other_b):
            t = float(np.clip((q - a) @ e / ee, 0.0, 1.0))
            foot = a + t * e
            d = float(np.linalg.norm(q - foot))
            if d < best[0]:
                best = (d, q, foot) if swap else (d, foot, q)
    # Proper crossing means distance zero.
    r = p2 - p1
    s = q2 - q1
    denom = cross2(r, s)
    if abs(denom) > 1e-300:
        t = cross2(q1 - p1, s) / denom
        u = cross2(q1 - p1, r) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            x = p1 + t * r
            return 0.0, x, x.copy()
    return best


def convex_distance(poly_a, poly_b):
    """Distance between two convex polygons with a closest point pair.

    Returns (d, point_on_a, point_on_b); d == 0 when the polygons touch or
    overlap. Brute force over edge pairs, adequate for small polygons.
    """
    a = np.asarray(poly_a, dtype=float)
    b = np.asarray(poly_b, dtype=float)
    a_in = polygon_contains(b, a, include_boundary=False)
    if a_in.any():
        k = int(np.flatnonzero(a_in)[0])
        return 0.0, a[k].copy(), a[k].copy()
    b_in = polygon_contains(a, b, include_boundary=False)
    if b_in.any():
        k = int(np.flatnonzero(b_in)[0])
        return 0.0, b[k].copy(), b[k].copy()
    best = (np.inf, None, None)
    na, nb = len(a), len(b)
    for i in range(na):
        p1, p2 = a[i], a[(i + 1) % na]
        for j in range(nb):
            q1, q2 = b[j], b[(j + 1) % nb]
            d, pa, pb = _segment_distance(p1, p2, q1, q2)
            if d < best[0]:
                best = (d, pa, pb)
                if d == 0.0:
                    return best
    return best


def _vertex_sector(poly: np.ndarray, v: np.ndarray, tol: float = 1e-9):
    """Interior angular sector (start, sweep) of a convex polygon at vertex v."""
    idx = int(np.argmin(np.linalg.norm(poly - v, axis=1)))
    if np.linalg.norm(poly[idx] - v) > tol:
        return None
    nxt = poly[(idx + 1) % len(poly)]
    prv = poly[idx - 1]
    start = float(np.arctan2(*(nxt - v)[::-1]))
    end = float(np.arctan2(*(prv - v)[::-1]))
    sweep = (end - start) % (2.0 * np.pi)
    return start, sweep


def separating_halfplane(poly_a, poly_b, tol: float = 1e-9):
    """Half-plane keeping poly_a while excluding poly_b's interior.

    Returns (anchor, normal) with poly_a inside {(x - anchor)^T normal >= 0}.
    Disjoint polygons get the bisector of the closest-point segment; polygons
    touching at a single vertex get a line through the contact separating the
    two angular wedges. Raises when the interiors overlap.
    """
    a = np.asarray(poly_a, dtype=float)
    b = np.asarray(poly_b, dtype=float)
    d, pa, pb = convex_distance(a, b)
    if d > tol:
        n = (pa - pb) / d
        return (pa + pb) / 2.0, n
    contact = pa
    sec_a = _vertex_sector(a, contact, tol)
    sec_b = _vertex_sector(b, contact, tol)
    if sec_a is None or sec_b is None:
        raise GeometryError("polygons touch along an edge or overlap; no separating line")
    start_a, sweep_a = sec_a
    start_b, sweep_b = sec_b
    rel = (start_b - start_a) % (2.0 * np.pi)
    # Work relative to poly_a's sector start; need a line direction theta with
    # a's sector in [theta, theta + pi] and b's in the opposite half, which is
    # feasible whenever the two open sectors are disjoint and each below pi.
    lo = max(sweep_a - np.pi, rel + sweep_b - 2.0 * np.pi)
    hi = min(0.0, rel - np.pi)
    if lo > hi + 1e-12:
        raise GeometryError("no separating line exists at the contact vertex")
    theta = start_a + 0.5 * (lo + hi)
    direction = np.array([np.cos(theta), np.sin(theta)])
    return contact.copy(), rot90(direction)


def line_clip_convex(origin, direction, vertices):
    """Intersect the parametrized line origin + t * direction with a convex polygon.

    Returns (t_min, t_max); raises if the line misses the polygon.
    """
    v = np.asarray(vertices, dtype=float)
    o = np.asarray(origin, dtype=float)
    u = np.asarray(direction, dtype=float)
    a = v
    e = np.roll(v, -1, axis=0) - v
    n = rot90(e / np.maximum(np.linalg.norm(e, axis=1), 1e-300)[:, None])
    denom = n @ u
    num = np.einsum("ij,ij->i", a - o, n)
    t_min, t_max = -np.inf, np.inf
    for k in range(len(v)):
        if abs(denom[k]) < 1e-14:
            if num[k] > 0.0:
                raise GeometryError("line lies outside the polygon")
            continue
        t = num[k] / denom[k]
        if denom[k] > 0.0:
            t_min = max(t_min, t)
        else:
            t_max = min(t_max, t)
    if t_min > t_max:
        raise GeometryError("line does not intersect the polygon")
    return float(t_min), float(t_max)
