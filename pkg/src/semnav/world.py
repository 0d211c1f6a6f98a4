"""Planning-space bookkeeping: sensing, hybrid modes, consolidation, classification.

The simulator's ground truth lives in an ObstacleCatalog. The robot-side
WorldState keeps the index set of instantiated familiar obstacles (the hybrid
mode), consolidates their dilated footprints into mapped-space components,
classifies components as interior (deformed to disks) or boundary-crossing
(merged into the enclosing freespace boundary), and rebuilds the deformation
chain whenever a sensing guard fires. Chains are cached per mode, so a guard
that re-discovers nothing is free.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon

from semnav.errors import GeometryError, ScenarioError
from semnav.diffeo import DiffeoChain, MappedWorld, build_chain
from semnav.geometry import (
    consolidate,
    convex_clip,
    dedupe_vertices,
    convex_hull,
    decompose_convex,
    dilate,
    ensure_ccw,
    erode,
    is_convex,
    point_polygon_distance,
    validate_polygon,
)

log = logging.getLogger("semnav.world")

BOUNDARY_TIE_TOL = 1e-9


def transform_polygon(template, pose) -> np.ndarray:
    """Place a canonical-frame polygon at pose (x, y, theta)."""
    x, y, theta = pose
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(template, float) @ rot.T + np.array([x, y])


@dataclass(frozen=True)
class FamiliarObstacle:
    """Catalogued polygon of known geometry; pose unknown until sensed."""

    label: str
    template: np.ndarray
    pose: tuple[float, float, float]
    known_at_start: bool = False
    placed: np.ndarray = None
    dilated: np.ndarray = None

    def materialize(self, robot_radius: float) -> "FamiliarObstacle":
        placed = validate_polygon(transform_polygon(self.template, self.pose))
        return FamiliarObstacle(
            label=self.label,
            template=self.template,
            pose=self.pose,
            known_at_start=self.known_at_start,
            placed=placed,
            dilated=dilate(placed, robot_radius),
        )


@dataclass(frozen=True)
class UnknownObstacle:
    """Uncatalogued obstacle; only sensed fragments ever reach the planner.

    The dilated footprint is pre-split into convex pieces so sensing can clip
    convex pieces against the sensor disk (convex in, convex out)."""

    polygon: np.ndarray
    dilated: np.ndarray = None
    convex: bool = True
    pieces: tuple = ()

    def materialize(self, robot_radius: float) -> "UnknownObstacle":
        placed = validate_polygon(self.polygon)
        dilated = dilate(placed, robot_radius)
        convex = is_convex(placed)
        pieces = (dilated,) if is_convex(dilated) else tuple(decompose_convex(dilated).pieces)
        return UnknownObstacle(
            polygon=placed,
            dilated=dilated,
            convex=convex,
            pieces=pieces,
        )


@dataclass(frozen=True)
class ObstacleCatalog:
    """Ground-truth obstacle set (simulator side)."""

    familiar: tuple[FamiliarObstacle, ...] = ()
    unknown: tuple[UnknownObstacle, ...] = ()

    def materialize(self, robot_radius: float) -> "ObstacleCatalog":
        labels = [f.label for f in self.familiar]
        if len(set(labels)) != len(labels):
            raise ScenarioError("familiar obstacle labels must be distinct")
        return ObstacleCatalog(
            familiar=tuple(f.materialize(robot_radius) for f in self.familiar),
            unknown=tuple(u.materialize(robot_radius) for u in self.unknown),
        )


@dataclass(frozen=True)
class SensorSpec:
    """Idealized sensor: full reveal of familiar obstacles intersecting the
    footprint, clipped fragments of unknown obstacles within range."""

    range: float
    angular_resolution: float = 0.15

    def __post_init__(self):
        if self.range <= 0:
            raise ScenarioError("sensor range must be positive")
        if not (0 < self.angular_resolution < 1.0):
            raise ScenarioError("angular resolution must be in (0, 1) radians")

    def disk_polygon(self, center) -> np.ndarray:
        n = max(int(math.ceil(2 * math.pi / self.angular_resolution)), 8)
        ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        return np.asarray(center, float) + self.range * np.stack(
            [np.cos(ang), np.sin(ang)], axis=1
        )


@dataclass(frozen=True)
class ModeState:
    """Hybrid mode: which familiar obstacles have been instantiated."""

    instantiated: frozenset = frozenset()

    def with_discoveries(self, ids) -> "ModeState":
        return ModeState(self.instantiated | frozenset(ids))


@dataclass(frozen=True)
class SensingReport:
    visible_familiar: tuple[int, ...] = ()
    fragments: tuple[tuple[int, np.ndarray], ...] = ()


@dataclass(frozen=True)
class ModelSpaceView:
    """Everything the controller sees in the model space: the enclosing
    boundary, the disk images of interior obstacles, and the (undeformed)
    convex pieces of currently sensed unknown fragments. Boundary edge
    half-planes are precomputed once per view."""

    boundary: np.ndarray | None = None
    disks: tuple[tuple[np.ndarray, float], ...] = ()
    fragments: tuple[np.ndarray, ...] = ()
    boundary_planes: tuple[np.ndarray, np.ndarray] | None = None

    def planes(self):
        if self.boundary is None:
            return None
        if self.boundary_planes is not None:
            return self.boundary_planes
        from semnav.geometry.implicit import edge_hyperplanes

        return edge_hyperplanes(self.boundary)


def sense(robot, catalog: ObstacleCatalog, spec: SensorSpec,
          clip: bool = True) -> SensingReport:
    """Idealized sensing oracle at the robot position (dilated world).

    Fragments are the convex pieces of unknown obstacles intersected with the
    sensor footprint. With ``clip=False`` straddling pieces are reported whole
    instead of clipped: the local-freespace separator depends only on the
    nearest in-range point, which the whole piece shares with its clipped
    fragment, so control behavior is identical and the clipping cost is
    saved in the simulation loop."""
    robot = np.asarray(robot, float)
    visible = []
    for i, fam in enumerate(catalog.familiar):
        if point_polygon_distance(robot, fam.dilated) <= spec.range:
            visible.append(i)
    fragments = []
    disk = None
    for j, unk in enumerate(catalog.unknown):
        if point_polygon_distance(robot, unk.dilated) > spec.range:
            continue
        for piece in unk.pieces:
            rel = piece - robot
            if not clip or (rel * rel).sum(axis=1).max() <= spec.range**2:
                if point_polygon_distance(robot, piece) <= spec.range:
                    fragments.append((j, piece))
                continue
            if point_polygon_distance(robot, piece) > spec.range:
                continue
            if disk is None:
                disk = spec.disk_polygon(robot)
            frag = convex_clip(disk, piece)
            if len(frag) >= 3:
                fragments.append((j, frag))
    return SensingReport(visible_familiar=tuple(visible), fragments=tuple(fragments))


def classify(components, boundary):
    """Split consolidated components into interior and boundary-crossing sets.

    A component within BOUNDARY_TIE_TOL of the enclosing boundary (closed
    intersection tie rule) is boundary-crossing; its geometry is clipped to
    the enclosure. Returns (disk_components, boundary_components).
    """
    hull = ShapelyPolygon(boundary)
    ring = hull.exterior
    disk_comps = []
    boundary_comps = []
    for comp in components:
        sp = ShapelyPolygon(comp)
        if sp.distance(ring) > BOUNDARY_TIE_TOL and sp.within(hull):
            disk_comps.append(comp)
            continue
        clipped = sp.intersection(hull)
        if clipped.is_empty or clipped.area < 1e-12:
            continue
        geoms = [clipped] if clipped.geom_type == "Polygon" else list(clipped.geoms)
        for g in sorted(geoms, key=lambda g: (g.centroid.x, g.centroid.y)):
            if g.area < 1e-12:
                continue
            boundary_comps.append(dedupe_vertices(ensure_ccw(np.asarray(g.exterior.coords)[:-1])))
    return disk_comps, boundary_comps


def fragment_pieces(fragments):
    """Convex pieces of sensed fragments. Sensing already produces convex
    pieces; non-convex input (external callers) is decomposed."""
    pieces = []
    for _, frag in fragments:
        if is_convex(frag):
            pieces.append(frag)
        else:
            try:
                pieces.extend(decompose_convex(frag).pieces)
            except GeometryError:
                pieces.append(convex_hull(frag))
    return tuple(pieces)


class ClearanceField:
    """Vectorized point-to-world clearance over stacked polygon edges."""

    def __init__(self, eroded, obstacle_polys):
        polys = [np.asarray(eroded, float)] + [np.asarray(p, float) for p in obstacle_polys]
        self.anchors = np.concatenate(polys, axis=0)
        edges = np.concatenate(
            [np.concatenate((p[1:], p[:1])) - p for p in polys], axis=0
        )
        self.edges = edges
        ee = (edges * edges).sum(axis=1)
        self.ee = np.where(ee < 1e-300, 1.0, ee)
        counts = [len(p) for p in polys]
        self.offsets = np.concatenate([[0], np.cumsum(counts)])[:-1]
        self.n_polys = len(polys)

    def query(self, p) -> float:
        rel = p - self.anchors
        t = np.clip((rel * self.edges).sum(axis=1) / self.ee, 0.0, 1.0)
        res = rel - t[:, None] * self.edges
        d = math.sqrt(float((res * res).sum(axis=1).min()))
        # Crossing parity per polygon: inside the workspace is required,
        # inside any obstacle is a collision.
        ay = self.anchors[:, 1]
        by = ay + self.edges[:, 1]
        straddle = (ay <= p[1]) != (by <= p[1])
        hit = np.zeros(len(ay), dtype=bool)
        if straddle.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                tt = (p[1] - ay) / (by - ay)
            xi = self.anchors[:, 0] + tt * self.edges[:, 0]
            hit = straddle & (xi > p[0])
        counts = np.add.reduceat(hit.astype(np.int64), self.offsets)
        inside = (counts % 2) == 1
        ok = inside[0] and not inside[1:].any()
        return d if ok else -d


class WorldState:
    """Single-writer holder of the four planning spaces and the hybrid mode.

    The physical space (ground truth) stays in the catalog; the semantic
    space is the set of instantiated dilated obstacles; the mapped space is
    their consolidation (plus boundary intrusions of a non-convex workspace);
    the model space is described by the chain's disks plus fragments.
    """

    def __init__(self, workspace, catalog: ObstacleCatalog, sensor: SensorSpec,
                 robot_radius: float, clearance_margin: float = 0.1):
        self.workspace = validate_polygon(workspace)
        self.robot_radius = float(robot_radius)
        self.catalog = catalog.materialize(self.robot_radius)
        self.sensor = sensor
        self.clearance_margin = float(clearance_margin)
        self.eroded = erode(self.workspace, self.robot_radius)
        self.boundary = convex_hull(self.eroded)
        from semnav.geometry.implicit import edge_hyperplanes

        self._boundary_planes = edge_hyperplanes(self.boundary)
        self._clearance_field = None
        self.intrusions = self._boundary_intrusions()
        start = frozenset(
            i for i, f in enumerate(self.catalog.familiar) if f.known_at_start
        )
        self.mode = ModeState(start)
        self._cache: dict[frozenset, tuple] = {}
        self._rebuild()

    def _boundary_intrusions(self) -> tuple[np.ndarray, ...]:
        """Non-convex workspace notches between the enclosing boundary and the
        eroded workspace act as permanently known boundary obstacles."""
        diff = ShapelyPolygon(self.boundary).difference(ShapelyPolygon(self.eroded))
        if diff.is_empty:
            return ()
        geoms = [diff] if diff.geom_type == "Polygon" else list(diff.geoms)
        out = []
        for g in sorted(geoms, key=lambda g: (g.centroid.x, g.centroid.y)):
            if g.area < 1e-9:
                continue
            out.append(dedupe_vertices(ensure_ccw(np.asarray(g.exterior.coords)[:-1])))
        return tuple(out)

    # -- mode management -------------------------------------------------------

    def _rebuild(self):
        key = self.mode.instantiated
        if key not in self._cache:
            semantic = [self.catalog.familiar[i].dilated for i in sorted(key)]
            semantic.extend(self.intrusions)
            components = consolidate(semantic) if semantic else []
            disk_comps, boundary_comps = classify(components, self.boundary)
            world = MappedWorld(
                boundary=self.boundary,
                disk_components=tuple(disk_comps),
                boundary_components=tuple(boundary_comps),
                collar_margin=min(0.1, self.clearance_margin / 2)
                if self.clearance_margin > 0
                else 0.1,
            )
            chain = build_chain(world)
            self._cache[key] = (components, disk_comps, boundary_comps, chain)
            log.info(
                "mode %s: %d components (%d disk, %d boundary), %d purging stages",
                sorted(key), len(components), len(disk_comps), len(boundary_comps),
                len(chain.stages),
            )
        (self.components, self.disk_components,
         self.boundary_components, self.chain) = self._cache[key]

    def sense(self, robot, clip: bool = True) -> SensingReport:
        return sense(robot, self.catalog, self.sensor, clip=clip)

    def apply_guard(self, report: SensingReport) -> bool:
        """Incorporate discoveries; returns True when the mode switched. The
        reset is the identity in the physical space: only the mapped/model
        representations change."""
        new = frozenset(report.visible_familiar) - self.mode.instantiated
        if not new:
            return False
        self.mode = self.mode.with_discoveries(new)
        self._rebuild()
        return True

    def model_view(self, report: SensingReport | None = None) -> ModelSpaceView:
        return ModelSpaceView(
            boundary=self.boundary,
            disks=tuple((r.center, r.radius) for r in self.chain.roots if r.kind == "disk"),
            fragments=fragment_pieces(report.fragments) if report else (),
            boundary_planes=self._boundary_planes,
        )

    @property
    def terminal(self) -> bool:
        return self.mode.instantiated == frozenset(range(len(self.catalog.familiar)))

    def make_terminal(self):
        """Instantiate every familiar obstacle (the terminal mode)."""
        self.mode = ModeState(frozenset(range(len(self.catalog.familiar))))
        self._rebuild()

    # -- ground-truth geometry (simulator side) --------------------------------

    def clearance(self, point) -> float:
        """True distance to the nearest dilated obstacle or workspace boundary
        (negative means the robot body is in collision)."""
        if self._clearance_field is None:
            polys = [fam.dilated for fam in self.catalog.familiar]
            polys += [unk.dilated for unk in self.catalog.unknown]
            self._clearance_field = ClearanceField(self.eroded, polys)
        return self._clearance_field.query(np.asarray(point, float))

    def in_freespace(self, point) -> bool:
        return self.clearance(point) > 0.0


def validate_assumptions(workspace, catalog: ObstacleCatalog, robot_radius: float,
                         clearance_margin: float) -> list[str]:
    """Check the separation assumptions; returns a list of human-readable
    problems (empty when the scenario is compliant).

    Unknown obstacles must keep positive clearance from each other, from the
    freespace boundary, and from every familiar obstacle's margin-inflated
    footprint. Non-convex unknown obstacles are reported as out-of-theory
    (allowed, but the convergence guarantees no longer apply).
    """
    problems = []
    cat = catalog.materialize(robot_radius)
    eroded = erode(validate_polygon(workspace), robot_radius)
    eroded_poly = ShapelyPolygon(eroded)
    for j, unk in enumerate(cat.unknown):
        if not unk.convex:
            problems.append(f"warning: unknown obstacle {j} is non-convex (out of theory)")
        sp = ShapelyPolygon(unk.dilated)
        if not eroded_poly.contains(sp) or sp.distance(eroded_poly.exterior) <= 0:
            problems.append(f"unknown obstacle {j} touches the workspace boundary")
        for k in range(j + 1, len(cat.unknown)):
            if ShapelyPolygon(unk.dilated).distance(ShapelyPolygon(cat.unknown[k].dilated)) <= 0:
                problems.append(f"unknown obstacles {j} and {k} are not separated")
        for i, fam in enumerate(cat.familiar):
            gap = ShapelyPolygon(unk.dilated).distance(ShapelyPolygon(fam.dilated))
            if gap <= clearance_margin:
                problems.append(
                    f"unknown obstacle {j} is within the clearance margin "
                    f"({gap:.4f} <= {clearance_margin}) of familiar obstacle "
                    f"{i} ({fam.label}); separation assumption 2 fails"
                )
    return problems
