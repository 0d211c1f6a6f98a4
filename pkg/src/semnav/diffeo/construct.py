"""Construction of deformation chains: centers, collars, and validation.

The geometry recipe, per stage:

* center: placed on the inward normal of the shared edge at depth
  min(0.2 * edge length, half the parent's centroid inradius), halving the
  depth until the augmented polygon is convex and the center stays strictly
  inside the parent (outside the enclosing freespace for boundary roots).
* collar: intersection of half-planes. The two augmented-polygon edges
  through the center are kept exact (the collar pinches there, which keeps it
  out of the parent beyond the wedge); every free edge is offset outward by
  the collar margin; separating half-planes exclude all other convex pieces
  and the enclosing-boundary edges. The result is verified set-wise and the
  margin shrinks geometrically on failure.

Root collars of different obstacles are mutually clipped by the bisector
half-planes between their pieces, so at most one root switch is ever active.
"""

import logging

import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon

from semnav.errors import ConstructionError, GeometryError
from semnav.diffeo.maps import full_map_and_jacobian, switch
from semnav.diffeo.specs import BumpParams, DiffeoChain, MappedWorld, PurgingSpec, RootSpec
from semnav.geometry.convex import clip_halfplane, separating_halfplane
from semnav.geometry.decomposition import decompose_convex, is_convex, pick_root
from semnav.geometry.implicit import ImplicitFn, edge_hyperplanes, rot90
from semnav.geometry.polygon import (
    point_polygon_distance,
    polygon_centroid,
    polygon_contains,
    validate_polygon,
)

log = logging.getLogger("semnav.diffeo")

_DEPTH_SCALES = (1.0, 0.8, 0.5, 0.3, 0.15)
_MAX_COLLAR_SHRINKS = 20


def _inradius_about(point, polygon) -> float:
    """Distance from an interior point to the nearest polygon edge."""
    return float(-point_polygon_distance(point, polygon, signed=True))


def _augmented_polygon(piece: np.ndarray, x1, x2, center) -> np.ndarray:
    """Insert the center between the shared-edge endpoints of a CCW piece.

    The piece is rolled so the cycle reads [x1, center, x2, free vertices...];
    vertices lying on the open segment (x1, x2) are dropped (they are interior
    to the augmented polygon).
    """
    m = len(piece)
    start = None
    for i in range(m):
        if np.linalg.norm(piece[i] - x1) < 1e-9:
            start = i
            break
    if start is None:
        raise ConstructionError("shared edge endpoint is not a piece vertex")
    cyc = np.roll(piece, -start, axis=0)
    # Walk past any collinear chain up to x2.
    k = 1
    while k < m and np.linalg.norm(cyc[k] - x2) >= 1e-9:
        k += 1
    if k == m:
        raise ConstructionError("shared edge end is not a piece vertex")
    rest = cyc[k:]
    return np.vstack([x1, np.asarray(center, float), rest])


def _convex_center_search(piece, x1, x2, normal, depth0, outside_test):
    """Halve the wedge depth until the augmented polygon is convex and the
    center passes the placement test. Returns (center, augmented)."""
    mid = (np.asarray(x1) + np.asarray(x2)) / 2.0
    depth = depth0
    for _ in range(40):
        center = mid - depth * normal
        if outside_test(center):
            try:
                aug = _augmented_polygon(piece, x1, x2, center)
            except ConstructionError:
                aug = None
            if aug is not None and is_convex(aug, tol=1e-12) and len(aug) >= 3:
                return center, aug
        depth *= 0.5
    raise ConstructionError("no admissible center found for a deformation stage")


def _collar_halfplanes(inner, margin, wedge: bool):
    """Base collar constraints from the inner polygon's own edges."""
    anchors, normals = edge_hyperplanes(inner)
    planes = []
    for k in range(len(anchors)):
        if wedge and k < 2:
            planes.append((anchors[k], normals[k]))  # exact through the center
        else:
            planes.append((anchors[k] - margin * normals[k], normals[k]))
    return planes


def _seed_box(inner, pad):
    lo = inner.min(axis=0) - pad
    hi = inner.max(axis=0) + pad
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])


def _clip_all(seed, planes):
    q = seed
    for anchor, normal in planes:
        q = clip_halfplane(q, anchor, normal)
        if len(q) == 0:
            return None
    return q


def _boundary_planes(boundary, skip_edge=None):
    anchors, normals = edge_hyperplanes(boundary)
    planes = []
    for k in range(len(anchors)):
        if skip_edge is not None and k == skip_edge:
            continue
        planes.append((anchors[k], normals[k]))
    return planes


def _verify_collar(inner, collar, forbidden, boundary, outside_ok_inside_inner):
    """Set-wise admissibility: collar convex, contains the inner polygon, and
    the band collar-minus-inner avoids every forbidden interior and stays
    inside the enclosing boundary."""
    if collar is None or len(collar) < 3 or not is_convex(collar, tol=1e-9):
        return False
    q = ShapelyPolygon(collar)
    g = ShapelyPolygon(inner)
    if not q.buffer(1e-9).covers(g):
        return False
    band = q.difference(g.buffer(1e-12))
    if band.is_empty:
        return True
    for poly in forbidden:
        other = ShapelyPolygon(poly).buffer(-1e-9)
        if not other.is_empty and band.intersects(other):
            return False
    if boundary is not None:
        outside = band.difference(ShapelyPolygon(boundary).buffer(1e-12))
        if not outside.is_empty and outside.area > 1e-12:
            if not outside_ok_inside_inner:
                return False
            stray = outside.difference(g.buffer(1e-9))
            if not stray.is_empty and stray.area > 1e-12:
                return False
    return True


def _separators(inner, others):
    """Mid (or contact) separating half-planes keeping the inner polygon."""
    planes = []
    for poly in others:
        planes.append(separating_halfplane(inner, poly))
    return planes


def _build_stage_collar(inner, margin, wedge, others, boundary, skip_boundary_edge,
                        outside_ok_inside_inner):
    """Collar construction with geometric shrinking of the offset margin.

    Returns (collar, margin_used) or (None, None)."""
    c = margin
    for _ in range(_MAX_COLLAR_SHRINKS):
        planes = _collar_halfplanes(inner, c, wedge)
        planes += _separators(inner, others)
        if boundary is not None:
            planes += _boundary_planes(boundary, skip_boundary_edge)
        seed = _seed_box(inner, 2.0 * c + 0.05)
        collar = _clip_all(seed, planes)
        if collar is not None and _verify_collar(
            inner, collar, others, boundary, outside_ok_inside_inner
        ):
            return collar, c
        c *= 0.5
    return None, None


def _bump_for(inner_fn, collar_fn, inner, collar, center, band_width, wedge, mu_scale):
    """Scale-aware bump parameters.

    epsilon is half the inner implicit depth at the centroid. The mu values
    are matched to the local scales of their arguments (mu_gamma to epsilon;
    mu_delta to the collar implicit over distance-to-center at a reference
    point inside the transition band): fixed O(1) mu on metre-scale worlds
    drives the collar bump to ~1e-6 and concentrates the whole switch
    transition in a micrometre skin, which ruins the conditioning of the
    pulled-back control field.
    """
    centroid = polygon_centroid(inner)
    depth = abs(float(inner_fn.value(centroid)))
    if depth <= 0:
        raise ConstructionError("inner polygon has no interior depth for the bump width")
    # The inner cutoff width spans the physical collar band: estimate the
    # implicit value's growth rate on the longest free edge and convert the
    # band width into implicit units. (Sampling the raw folded value farther
    # out is not an option: outside vertex-dense polygons it explodes
    # multiplicatively, while on the boundary the gradient stays tame.)
    anchors, normals = edge_hyperplanes(inner)
    first = 2 if wedge else 0
    lengths = np.linalg.norm(np.roll(inner, -1, axis=0) - inner, axis=1)
    k = first + int(np.argmax(lengths[first:]))
    edge_mid = (inner[k] + inner[(k + 1) % len(inner)]) / 2.0
    grad_mid = inner_fn.gradient(edge_mid)
    rate = max(float(np.linalg.norm(grad_mid)), 1e-3)
    eps = max(band_width * rate, 1e-6)
    # The collar cutoff rate is matched to the worst (largest-distance) scale
    # so the collar bump stays order-one throughout long collars.
    x_ref = edge_mid - 0.5 * band_width * normals[k]
    rho_max = float(np.linalg.norm(collar - np.asarray(center), axis=1).max())
    alpha_ref = max(float(collar_fn.value(x_ref)), 1e-9) / max(rho_max, 1e-12)
    return BumpParams(
        mu_gamma=mu_scale * 0.5 * eps,
        mu_delta=mu_scale * alpha_ref,
        epsilon=eps,
    )


def _hull_edge_chain(piece, boundary):
    """Locate the boundary-edge chain of a root piece lying on the enclosing
    boundary. Returns (x1, x2, hull_edge_index) or raises."""
    bnd = np.asarray(boundary, float)
    ha, hn = edge_hyperplanes(bnd)
    m = len(piece)
    on_hull = []
    for k in range(m):
        a, b = piece[k], piece[(k + 1) % m]
        if (
            point_polygon_distance(a, bnd, signed=False) < 1e-9
            and point_polygon_distance(b, bnd, signed=False) < 1e-9
        ):
            on_hull.append(k)
    if not on_hull:
        raise ConstructionError("boundary obstacle root has no edge on the enclosing boundary")
    # All chain vertices must sit on one hull edge line.
    pts = np.array([piece[k] for k in on_hull] + [piece[(k + 1) % m] for k in on_hull])
    edge_idx = None
    for e in range(len(ha)):
        if np.all(np.abs((pts - ha[e]) @ hn[e]) < 1e-7):
            edge_idx = e
            break
    if edge_idx is None:
        raise ConstructionError(
            "boundary obstacle crosses more than one enclosing-boundary edge"
        )
    # Chain endpoints ordered along the boundary's CCW direction.
    direction = rot90(hn[edge_idx]) * -1.0  # CCW tangent of the hull edge
    proj = pts @ direction
    x1 = pts[int(np.argmin(proj))]
    x2 = pts[int(np.argmax(proj))]
    return x1, x2, edge_idx


def _collect_components(world: MappedWorld):
    comps = []
    for poly in world.disk_components:
        comps.append(("disk", validate_polygon(poly)))
    for poly in world.boundary_components:
        comps.append(("boundary", validate_polygon(poly)))
    return comps


def build_chain(world: MappedWorld, mu: float = 1.0) -> DiffeoChain:
    """Assemble the full deformation chain for a consolidated mapped space.

    Deterministic for a fixed world. Raises ConstructionError naming the
    obstacle when no admissible center or collar exists (clearances too
    tight).
    """
    comps = _collect_components(world)
    boundary = validate_polygon(world.boundary) if world.boundary is not None else None
    margin = min(world.collar_margin, 0.1)
    if margin <= 0:
        raise ConstructionError("collar margin must be positive")

    trees = []
    for idx, (kind, poly) in enumerate(comps):
        tree = decompose_convex(poly)
        root = pick_root(tree, "disk" if kind == "disk" else "merge", boundary)
        tree.orient(root)
        trees.append(tree)

    all_pieces = {i: list(t.pieces) for i, t in enumerate(trees)}

    def forbidden_pieces(comp_id, keep_own=()):
        """Pieces a collar must avoid: the surviving same-obstacle pieces named
        in keep_own, every piece of every other obstacle, and the separately
        sensed regions. Already-purged same-obstacle pieces are free space in
        the intermediate domain and must not constrain the collar."""
        out = []
        for i, pieces in all_pieces.items():
            for k, piece in enumerate(pieces):
                if i == comp_id and k not in keep_own:
                    continue
                out.append(piece)
        out.extend(world.unknown_regions)
        return out

    stages: list[PurgingSpec] = []
    roots: list[RootSpec] = []

    for comp_id, (kind, poly) in enumerate(comps):
        tree = trees[comp_id]
        try:
            order = tree.purge_order()
            for pos, leaf in enumerate(order):
                # Pieces still standing when this stage runs: later-purged
                # leaves and the root, minus this leaf and its parent.
                surviving = set(order[pos + 1:]) | {tree.root}
                parent = tree.parent[leaf]
                x1, x2, normal = tree.shared_edge[leaf]
                parent_piece = tree.pieces[parent]
                depth0 = min(
                    0.2 * float(np.linalg.norm(x2 - x1)),
                    0.5 * _inradius_about(polygon_centroid(parent_piece), parent_piece),
                )
                spec = None
                for scale in _DEPTH_SCALES:
                    try:
                        center, inner = _convex_center_search(
                            tree.pieces[leaf],
                            x1,
                            x2,
                            normal,
                            depth0 * scale,
                            lambda c: point_polygon_distance(c, parent_piece) < -1e-12,
                        )
                        others = forbidden_pieces(
                            comp_id, keep_own=surviving - {leaf, parent}
                        )
                        collar, c_used = _build_stage_collar(
                            inner, margin, True, others, boundary, None, False
                        )
                    except (ConstructionError, GeometryError):
                        continue
                    if collar is None:
                        continue
                    inner_fn = ImplicitFn.from_polygon(inner, negated=True)
                    collar_fn = ImplicitFn.from_polygon(collar, negated=False)
                    spec = PurgingSpec(
                        obstacle=comp_id,
                        leaf=leaf,
                        parent=parent,
                        center=center,
                        inner=inner,
                        collar=collar,
                        inner_fn=inner_fn,
                        collar_fn=collar_fn,
                        edge_start=x1,
                        edge_end=x2,
                        normal=normal,
                        bump=_bump_for(inner_fn, collar_fn, inner, collar, center, c_used, True, mu),
                    )
                    break
                if spec is None:
                    raise ConstructionError("no admissible collar for a leaf piece")
                stages.append(spec)

            root_piece = tree.pieces[tree.root]
            others = forbidden_pieces(comp_id, keep_own=())
            if kind == "disk":
                center = polygon_centroid(root_piece)
                radius = 0.8 * _inradius_about(center, root_piece)
                if radius <= 0:
                    raise ConstructionError("degenerate root piece")
                collar, c_used = _build_stage_collar(
                    root_piece, margin, False, others, boundary, None, False
                )
                if collar is None:
                    raise ConstructionError("no admissible collar for a disk root")
                inner_fn = ImplicitFn.from_polygon(root_piece, negated=True)
                collar_fn = ImplicitFn.from_polygon(collar, negated=False)
                roots.append(
                    RootSpec(
                        obstacle=comp_id,
                        root=tree.root,
                        kind="disk",
                        center=center,
                        radius=radius,
                        inner=root_piece,
                        collar=collar,
                        inner_fn=inner_fn,
                        collar_fn=collar_fn,
                        bump=_bump_for(inner_fn, collar_fn, root_piece, collar, center, c_used, False, mu),
                    )
                )
            else:
                x1, x2, edge_idx = _hull_edge_chain(root_piece, boundary)
                tangent = (x2 - x1) / np.linalg.norm(x2 - x1)
                normal = rot90(tangent)  # points into the freespace
                depth0 = 0.2 * float(np.linalg.norm(x2 - x1))
                center, inner = _convex_center_search(
                    root_piece,
                    x1,
                    x2,
                    normal,
                    depth0,
                    lambda c: point_polygon_distance(c, boundary) > 1e-12,
                )
                collar, c_used = _build_stage_collar(
                    inner, margin, True, others, boundary, edge_idx, True
                )
                if collar is None:
                    raise ConstructionError("no admissible collar for a boundary root")
                inner_fn = ImplicitFn.from_polygon(inner, negated=True)
                collar_fn = ImplicitFn.from_polygon(collar, negated=False)
                roots.append(
                    RootSpec(
                        obstacle=comp_id,
                        root=tree.root,
                        kind="boundary",
                        center=center,
                        inner=inner,
                        collar=collar,
                        inner_fn=inner_fn,
                        collar_fn=collar_fn,
                        bump=_bump_for(inner_fn, collar_fn, inner, collar, center, c_used, True, mu),
                        edge_start=x1,
                        edge_end=x2,
                        normal=normal,
                    )
                )
        except (ConstructionError, GeometryError) as exc:
            raise ConstructionError(
                f"obstacle {comp_id} ({kind}): {exc}"
            ) from exc

    log.debug("built chain: %d purging stages, %d roots", len(stages), len(roots))
    return DiffeoChain(
        stages=tuple(stages),
        roots=tuple(roots),
        boundary=boundary,
        obstacles=tuple(poly for _, poly in comps),
    )


# -- validation battery --------------------------------------------------------


def sample_freespace(chain: DiffeoChain, n: int, rng, vertex_guard: float = 1e-6):
    """Rejection-sample points strictly inside the freespace of the chain's
    world, at least ``vertex_guard`` from every obstacle and the boundary."""
    if chain.boundary is None:
        raise ConstructionError("freespace sampling needs an enclosing boundary")
    lo = chain.boundary.min(axis=0)
    hi = chain.boundary.max(axis=0)
    out = []
    attempts = 0
    while len(out) < n and attempts < 400 * n + 10_000:
        batch = rng.uniform(lo, hi, size=(max(4 * (n - len(out)), 64), 2))
        attempts += len(batch)
        ok = point_polygon_distance(batch, chain.boundary) < -vertex_guard
        for poly in chain.obstacles:
            ok &= point_polygon_distance(batch, poly) > vertex_guard
        out.extend(batch[ok])
    if len(out) < n:
        raise ConstructionError("freespace sampling failed; world too tight")
    return np.asarray(out[:n])


def sample_obstacle_boundaries(chain: DiffeoChain, per_edge: int, vertex_guard: float = 1e-6):
    """Points on each mapped obstacle boundary, away from vertices; boundary
    obstacles contribute only their free boundary (off the enclosing hull)."""
    groups = []
    for poly in chain.obstacles:
        pts = []
        m = len(poly)
        for k in range(m):
            a, b = poly[k], poly[(k + 1) % m]
            length = np.linalg.norm(b - a)
            if length < 3 * vertex_guard:
                continue
            ts = np.linspace(vertex_guard / length, 1.0 - vertex_guard / length, per_edge)
            pts.extend(a + t * (b - a) for t in ts)
        pts = np.asarray(pts)
        if chain.boundary is not None and len(pts):
            off_hull = point_polygon_distance(pts, chain.boundary, signed=False) > vertex_guard
            pts = pts[off_hull]
        groups.append(pts)
    return groups


def check_chain(chain: DiffeoChain, samples: int = 2000, seed: int = 0,
                fd_step: float = 1e-6, fd_rtol: float = 1e-5) -> dict:
    """Run the validity battery; returns a report dict (raises nothing).

    Checks: positive Jacobian determinant, exact identity outside collars,
    obstacle boundaries mapping onto their model components, analytic
    Jacobian against central finite differences, and switch range.
    """
    rng = np.random.default_rng(seed)
    report = {"ok": True, "failures": [], "n_samples": samples}

    pts = sample_freespace(chain, samples, rng)
    y, jac = full_map_and_jacobian(pts, chain)

    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if not np.all(det > 0):
        report["ok"] = False
        bad = pts[det <= 0]
        report["failures"].append(("determinant", bad[:5].tolist()))
    report["det_min"] = float(det.min())

    # Identity outside all collars (exact).
    outside = np.ones(len(pts), dtype=bool)
    for spec in list(chain.stages) + list(chain.roots):
        outside &= ~polygon_contains(spec.collar, pts)
    if outside.any():
        err = np.abs(y[outside] - pts[outside]).max()
        report["identity_error"] = float(err)
        if err >= 1e-12:
            report["ok"] = False
            report["failures"].append(("identity", float(err)))
    else:
        report["identity_error"] = 0.0

    # Finite-difference Jacobian comparison.
    h = fd_step
    fd = np.empty_like(jac)
    for k, e in enumerate(np.eye(2)):
        plus = full_map_and_jacobian(pts + h * e, chain)[0]
        minus = full_map_and_jacobian(pts - h * e, chain)[0]
        fd[:, :, k] = (plus - minus) / (2 * h)
    num = np.linalg.norm((fd - jac).reshape(len(pts), 4), axis=1)
    den = np.maximum(1.0, np.linalg.norm(jac.reshape(len(pts), 4), axis=1))
    rel = num / den
    report["jacobian_fd_max_rel"] = float(rel.max())
    if not np.all(rel < fd_rtol):
        report["ok"] = False
        report["failures"].append(("jacobian_fd", float(rel.max())))

    # Boundary mapping per component.
    disk_by_obstacle = {r.obstacle: r for r in chain.roots if r.kind == "disk"}
    groups = sample_obstacle_boundaries(chain, per_edge=8)
    worst = 0.0
    for comp_id, bpts in enumerate(groups):
        if len(bpts) == 0:
            continue
        images = chain.map(bpts)
        if comp_id in disk_by_obstacle:
            r = disk_by_obstacle[comp_id]
            err = np.abs(np.linalg.norm(images - r.center, axis=1) - r.radius)
        else:
            err = point_polygon_distance(images, chain.boundary, signed=False)
        worst = max(worst, float(err.max()))
        if np.any(err > 1e-9):
            report["ok"] = False
            report["failures"].append(("boundary_mapping", comp_id, float(err.max())))
    report["boundary_error"] = worst

    # Switch range on collar samples.
    for spec in list(chain.stages) + list(chain.roots):
        lo = spec.collar.min(axis=0)
        hi = spec.collar.max(axis=0)
        probes = rng.uniform(lo, hi, size=(256, 2))
        s = switch(probes, spec)
        if np.any((s < 0) | (s > 1)):
            report["ok"] = False
            report["failures"].append(("switch_range", spec.obstacle))
            break
    return report
