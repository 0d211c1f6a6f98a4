"""Implicit polygon representations built from smooth blends of half-planes.

Half-plane functions g_k(x) = (x - x_k)^T n_k (inward normals) are combined
with the smooth conjunction / disjunction pair

    a ^ b := a + b - (a^p + b^p)^(1/p)
    a v b := a + b + (a^p + b^p)^(1/p),      p even,

which preserve the zero set of the boolean they replace. A convex region is
the conjunction of its edge half-planes, folded left to right in edge order;
a non-convex polygon is the disjunction of its convex pieces. The final value
is negated so that the represented set is { value <= 0 }, with value exactly
zero on the boundary and smooth away from polygon vertices.
"""

from dataclasses import dataclass

import numpy as np

from semnav.errors import GeometryError

_R90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def rot90(vec: np.ndarray) -> np.ndarray:
    """Rotate one or more 2D vectors by +90 degrees."""
    v = np.asarray(vec, dtype=float)
    return v @ _R90.T


def cross2(a, b) -> float:
    """z-component of the cross product of two 2D vectors."""
    return float(a[0] * b[1] - a[1] * b[0])


def edge_hyperplanes(vertices) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge (anchor, inward unit normal) pairs of a CCW polygon."""
    v = np.asarray(vertices, dtype=float)
    d = np.concatenate((v[1:], v[:1])) - v
    lengths = np.sqrt((d * d).sum(axis=1))
    if np.any(lengths <= 1e-15):
        raise GeometryError("degenerate edge while building hyperplanes")
    normals = rot90(d / lengths[:, None])
    return v.copy(), normals


def _combine(a, b, p, sign):
    if p == 2:
        r = np.hypot(a, b)
    else:
        r = (a**p + b**p) ** (1.0 / p)
    return a + b + sign * r


def _combine_grad(a, da, b, db, p, sign):
    if p == 2:
        r = np.hypot(a, b)
    else:
        r = (a**p + b**p) ** (1.0 / p)
    safe = r > 1e-300
    rs = np.where(safe, r, 1.0)
    if p == 2:
        ra = np.where(safe, a / rs, 0.0)
        rb = np.where(safe, b / rs, 0.0)
    else:
        ra = np.where(safe, (a / rs) ** (p - 1), 0.0)
        rb = np.where(safe, (b / rs) ** (p - 1), 0.0)
    val = a + b + sign * r
    grad = (1.0 + sign * ra)[:, None] * da + (1.0 + sign * rb)[:, None] * db
    return val, grad


@dataclass(frozen=True)
class ImplicitFn:
    """Smooth implicit function of a polygon (or union of convex pieces).

    Each group is one convex conjunction, given as (anchors, normals) arrays;
    groups are folded together with the smooth disjunction. ``negated``
    selects the sign convention: True gives value <= 0 inside (obstacle
    convention), False gives value >= 0 inside (collar convention). Callers
    that need specific hyperplanes to enter a conjunction first rotate the
    edge order before construction.
    """

    groups: tuple[tuple[np.ndarray, np.ndarray], ...]
    p: int = 2
    negated: bool = True

    def __post_init__(self):
        if self.p < 2 or self.p % 2 != 0:
            raise GeometryError(
                f"conjunction exponent must be a positive even integer, got {self.p}"
            )
        for anchors, normals in self.groups:
            if anchors.shape != normals.shape or anchors.ndim != 2 or anchors.shape[1] != 2:
                raise GeometryError("each group needs matching (M, 2) anchor/normal arrays")

    @classmethod
    def from_polygon(cls, vertices, p: int = 2, negated: bool = True, start_edge: int = 0):
        """Single-conjunction build from a convex CCW cycle.

        ``start_edge`` rotates the fold so that a chosen edge enters first.
        """
        v = np.asarray(vertices, dtype=float)
        v = np.roll(v, -start_edge, axis=0)
        anchors, normals = edge_hyperplanes(v)
        return cls(groups=((anchors, normals),), p=p, negated=negated)

    @classmethod
    def from_convex_pieces(cls, pieces, p: int = 2, negated: bool = True):
        """Disjunction of per-piece conjunctions (non-convex polygons)."""
        groups = tuple(edge_hyperplanes(np.asarray(piece, float)) for piece in pieces)
        return cls(groups=groups, p=p, negated=negated)

    def _group_value(self, pts, anchors, normals):
        diff = pts[:, None, :] - anchors[None, :, :]
        g = np.einsum("nmk,mk->nm", diff, normals)
        s = g[:, 0]
        for k in range(1, g.shape[1]):
            s = _combine(s, g[:, k], self.p, -1.0)
        return s

    def _group_value_grad(self, pts, anchors, normals):
        diff = pts[:, None, :] - anchors[None, :, :]
        g = np.einsum("nmk,mk->nm", diff, normals)
        s = g[:, 0]
        ds = np.broadcast_to(normals[0], (len(pts), 2)).copy()
        for k in range(1, g.shape[1]):
            nb = np.broadcast_to(normals[k], (len(pts), 2))
            s, ds = _combine_grad(s, ds, g[:, k], nb, self.p, -1.0)
        return s, ds

    def value(self, points):
        """Implicit value at one point or an (N, 2) batch."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = self._group_value(pts, *self.groups[0])
        for anchors, normals in self.groups[1:]:
            s = _combine(s, self._group_value(pts, anchors, normals), self.p, +1.0)
        if self.negated:
            s = -s
        return s if np.asarray(points).ndim == 2 else float(s[0])

    def value_and_gradient(self, points):
        """Fold value and gradient together; shapes (N,) and (N, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s, ds = self._group_value_grad(pts, *self.groups[0])
        for anchors, normals in self.groups[1:]:
            s2, ds2 = self._group_value_grad(pts, anchors, normals)
            s, ds = _combine_grad(s, ds, s2, ds2, self.p, +1.0)
        if self.negated:
            s, ds = -s, -ds
        return s, ds

    def gradient(self, points):
        pts = np.asarray(points, dtype=float)
        _, ds = self.value_and_gradient(pts)
        return ds if pts.ndim == 2 else ds[0]


def build_implicit(polygon, p: int = 2) -> ImplicitFn:
    """Implicit representation of a simple polygon: value <= 0 inside.

    Convex polygons fold their edge half-planes left to right in vertex
    order; non-convex polygons are decomposed into convex pieces whose
    conjunctions are then disjoined. Either way the zero set is exactly the
    polygon boundary and the sign is negative strictly inside.
    """
    from semnav.geometry.decomposition import decompose_convex, is_convex
    from semnav.geometry.polygon import validate_polygon

    v = validate_polygon(polygon)
    if is_convex(v):
        return ImplicitFn.from_polygon(v, p=p, negated=True)
    tree = decompose_convex(v)
    return ImplicitFn.from_convex_pieces(tree.pieces, p=p, negated=True)
