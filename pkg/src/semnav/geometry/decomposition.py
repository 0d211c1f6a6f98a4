"""Convex decomposition of simple polygons into a dual tree.

Triangulates by ear clipping and merges across inessential diagonals
(Hertel-Mehlhorn). No Steiner points are introduced, so the dual graph of
the partition of a hole-free polygon is a tree. The documented piece-count
bound for this family of algorithms is at most 2r + 1 pieces for r reflex
vertices.
"""

from dataclasses import dataclass, field

import numpy as np

from semnav.errors import GeometryError
from semnav.geometry.implicit import cross2, rot90
from semnav.geometry.polygon import (
    point_polygon_distance,
    polygon_area,
    polygon_centroid,
    validate_polygon,
)

_COLLINEAR_TOL = 1e-12


def is_convex(vertices, tol: float = 1e-9) -> bool:
    """True when every turn of the CCW cycle is left or collinear."""
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    scale = np.linalg.norm(d, axis=1) * np.linalg.norm(np.roll(d, -1, axis=0), axis=1)
    return bool(np.all(cross >= -tol * np.maximum(scale, 1e-300)))


def _drop_collinear(v: np.ndarray) -> np.ndarray:
    keep = []
    n = len(v)
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        cr = cross2(b - a, c - b)
        scale = max(np.linalg.norm(b - a) * np.linalg.norm(c - b), 1e-300)
        if abs(cr) / scale > _COLLINEAR_TOL:
            keep.append(i)
    if len(keep) < 3:
        raise GeometryError("polygon degenerates after dropping collinear vertices")
    return v[keep]


def _point_in_triangle(p, a, b, c, tol=1e-12) -> bool:
    # Inclusive test: points on the triangle boundary block the ear.
    d1 = cross2(b - a, p - a)
    d2 = cross2(c - b, p - b)
    d3 = cross2(a - c, p - c)
    return d1 >= -tol and d2 >= -tol and d3 >= -tol


def _triangulate(v: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a CCW simple polygon (vertex indices)."""
    n = len(v)
    idx = list(range(n))
    tris = []
    while len(idx) > 3:
        clipped = False
        m = len(idx)
        for ii in range(m):
            i0, i1, i2 = idx[ii - 1], idx[ii], idx[(ii + 1) % m]
            a, b, c = v[i0], v[i1], v[i2]
            if cross2(b - a, c - b) <= _COLLINEAR_TOL:
                continue
            blocked = False
            for jj in idx:
                if jj in (i0, i1, i2):
                    continue
                if _point_in_triangle(v[jj], a, b, c):
                    blocked = True
                    break
            if not blocked:
                tris.append((i0, i1, i2))
                idx.pop(ii)
                clipped = True
                break
        if not clipped:
            raise GeometryError("ear clipping failed; polygon may be non-simple")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def _cycle_convex(cycle: list[int], v: np.ndarray) -> bool:
    pts = v[cycle]
    d = np.roll(pts, -1, axis=0) - pts
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    scale = np.linalg.norm(d, axis=1) * np.linalg.norm(np.roll(d, -1, axis=0), axis=1)
    return bool(np.all(cross >= -1e-9 * np.maximum(scale, 1e-300)))


def _merge_cycles(ca: list[int], cb: list[int], u: int, w: int) -> list[int]:
    """Join two CCW cycles sharing the directed edge u->w in ca (w->u in cb)."""
    ia = ca.index(u)
    if ca[(ia + 1) % len(ca)] != w:
        u, w = w, u
        ia = ca.index(u)
        if ca[(ia + 1) % len(ca)] != w:
            raise GeometryError("pieces do not share the stated diagonal")
    ib = cb.index(w)
    if cb[(ib + 1) % len(cb)] != u:
        raise GeometryError("pieces do not share the stated diagonal")
    rot_a = ca[(ia + 1) % len(ca):] + ca[:(ia + 1) % len(ca)]  # starts at w ... ends at u
    rot_b = cb[(ib + 1) % len(cb):] + cb[:(ib + 1) % len(cb)]  # starts at u ... ends at w
    return rot_a + rot_b[1:-1]


@dataclass
class DecompositionTree:
    """Convex pieces of a polygon plus the dual adjacency, orientable to a root.

    ``pieces`` are CCW vertex arrays that tile the input polygon. Adjacency
    maps an unordered piece pair to the shared-segment endpoints. After
    ``orient``, each non-root piece knows its parent and the shared edge
    (x1, x2) ordered so that the +90-degree rotation of (x2 - x1) points into
    the child piece.
    """

    pieces: list[np.ndarray]
    adjacency: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]
    root: int | None = None
    parent: dict[int, int] = field(default_factory=dict)
    shared_edge: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.pieces)

    @property
    def n_edges(self) -> int:
        return len(self.adjacency)

    def neighbors(self, i: int) -> list[int]:
        out = []
        for (a, b) in self.adjacency:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def orient(self, root: int) -> None:
        """Set parent pointers by BFS from ``root`` and order shared edges."""
        if not (0 <= root < self.n_nodes):
            raise GeometryError(f"root id {root} out of range")
        self.root = root
        self.parent = {}
        self.shared_edge = {}
        seen = {root}
        frontier = [root]
        while frontier:
            nxt = []
            for node in frontier:
                for nb in self.neighbors(node):
                    if nb in seen:
                        continue
                    seen.add(nb)
                    self.parent[nb] = node
                    key = (min(nb, node), max(nb, node))
                    e1, e2 = self.adjacency[key]
                    x1, x2 = np.asarray(e1, float), np.asarray(e2, float)
                    normal = rot90((x2 - x1) / np.linalg.norm(x2 - x1))
                    child_centroid = polygon_centroid(self.pieces[nb])
                    if float(np.dot(child_centroid - x1, normal)) < 0.0:
                        x1, x2 = x2, x1
                        normal = -normal
                    self.shared_edge[nb] = (x1, x2, normal)
                    nxt.append(nb)
            frontier = nxt
        if len(seen) != self.n_nodes:
            raise GeometryError("decomposition adjacency is not connected")

    def purge_order(self) -> list[int]:
        """Non-root pieces in processing order: current leaves, largest id first."""
        if self.root is None:
            raise GeometryError("tree must be oriented before ordering")
        remaining = set(range(self.n_nodes)) - {self.root}
        child_count = {i: 0 for i in range(self.n_nodes)}
        for c, p in self.parent.items():
            child_count[p] += 1
        order = []
        while remaining:
            leaves = [i for i in remaining if child_count[i] == 0]
            if not leaves:
                raise GeometryError("cycle detected in decomposition tree")
            pick = max(leaves)
            order.append(pick)
            remaining.discard(pick)
            child_count[self.parent[pick]] -= 1
        return order


def decompose_convex(polygon) -> DecompositionTree:
    """Partition a simple hole-free polygon into convex pieces with a dual tree.

    Convex input produces a single piece. Collinear input vertices are
    dropped before triangulation (no Steiner points are ever added). The
    returned tree is unoriented; pick a root and call ``orient``.
    """
    v = validate_polygon(polygon)
    v = _drop_collinear(v)
    if is_convex(v):
        return DecompositionTree(pieces=[v], adjacency={})

    tris = _triangulate(v)
    cycles: dict[int, list[int]] = {i: list(t) for i, t in enumerate(tris)}

    boundary = {(i, (i + 1) % len(v)) for i in range(len(v))}
    boundary |= {(b, a) for (a, b) in boundary}

    # Map each internal diagonal to the two triangles it separates.
    diag_pieces: dict[tuple[int, int], list[int]] = {}
    for pid, cyc in cycles.items():
        for k in range(3):
            a, b = cyc[k], cyc[(k + 1) % 3]
            if (a, b) in boundary:
                continue
            diag_pieces.setdefault((min(a, b), max(a, b)), []).append(pid)

    alias = {i: i for i in cycles}

    def resolve(i: int) -> int:
        while alias[i] != i:
            alias[i] = alias[alias[i]]
            i = alias[i]
        return i

    for diag in sorted(diag_pieces):
        owners = diag_pieces[diag]
        if len(owners) != 2:
            raise GeometryError("diagonal not shared by exactly two pieces")
        pa, pb = resolve(owners[0]), resolve(owners[1])
        if pa == pb:
            continue
        merged = _merge_cycles(cycles[pa], cycles[pb], diag[0], diag[1])
        if _cycle_convex(merged, v):
            cycles[pa] = merged
            del cycles[pb]
            alias[pb] = pa

    piece_ids = sorted(cycles)
    remap = {pid: k for k, pid in enumerate(piece_ids)}
    pieces = [v[cycles[pid]].copy() for pid in piece_ids]

    # Remaining diagonals between surviving pieces form the dual adjacency;
    # consecutive collinear diagonals between one pair collapse to one edge.
    segments: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for diag, owners in diag_pieces.items():
        pa, pb = resolve(owners[0]), resolve(owners[1])
        if pa == pb:
            continue
        key = (min(remap[pa], remap[pb]), max(remap[pa], remap[pb]))
        segments.setdefault(key, []).append(diag)

    adjacency: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for key, diags in segments.items():
        ids = sorted({i for d in diags for i in d})
        pts = v[ids]
        if len(ids) > 2:
            # Collapse collinear chain to its extreme endpoints.
            direction = pts[-1] - pts[0]
            order = np.argsort(pts @ direction)
            pts = pts[[order[0], order[-1]]]
        adjacency[key] = (pts[0].copy(), pts[1].copy())

    tree = DecompositionTree(pieces=pieces, adjacency=adjacency)
    if tree.n_edges != tree.n_nodes - 1:
        raise GeometryError("decomposition dual graph is not a tree")
    return tree


def pick_root(tree: DecompositionTree, kind: str, enclosing_boundary=None) -> int:
    """Select the root piece: largest area for interior ('disk') obstacles,
    lowest-id boundary-adjacent piece for boundary ('merge') obstacles.

    Area ties break toward the lowest node id. For boundary obstacles a piece
    qualifies when one of its edges lies on the enclosing boundary polyline
    (both endpoints within 1e-9).
    """
    if kind == "disk":
        areas = np.array([polygon_area(p) for p in tree.pieces])
        best = np.where(areas >= areas.max() - 1e-12)[0]
        return int(best.min())
    if kind == "merge":
        if enclosing_boundary is None:
            raise GeometryError("boundary-merge root selection needs the enclosing boundary")
        bnd = np.asarray(enclosing_boundary, dtype=float)
        for i, piece in enumerate(tree.pieces):
            m = len(piece)
            for k in range(m):
                a, b = piece[k], piece[(k + 1) % m]
                da = point_polygon_distance(a, bnd, signed=False)
                db = point_polygon_distance(b, bnd, signed=False)
                if da < 1e-9 and db < 1e-9:
                    return i
        raise GeometryError("no piece of a boundary obstacle touches the enclosing boundary")
    raise GeometryError(f"unknown obstacle kind {kind!r}")
