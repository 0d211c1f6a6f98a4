"""Typed descriptions of the deformation stages and the assembled chain."""

from dataclasses import dataclass, field

import numpy as np

from semnav.errors import GeometryError
from semnav.geometry.implicit import ImplicitFn


@dataclass(frozen=True)
class BumpParams:
    """Tunable sharpness of a deformation switch; all strictly positive.

    mu_gamma shapes the cutoff in the inner-polygon implicit value, mu_delta
    the cutoff in the collar implicit value, and epsilon is the width of the
    inner transition band.
    """

    mu_gamma: float = 1.0
    mu_delta: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.mu_gamma <= 0 or self.mu_delta <= 0 or self.epsilon <= 0:
            raise GeometryError("bump parameters must be strictly positive")


def _bbox(vertices: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(vertices[:, 0].min()),
        float(vertices[:, 1].min()),
        float(vertices[:, 0].max()),
        float(vertices[:, 1].max()),
    )


@dataclass(frozen=True)
class PurgingSpec:
    """One leaf-collapse stage: geometry, implicit functions and bump shape.

    ``inner`` is the leaf polygon augmented with the center (convex, the
    center is its second vertex), ``collar`` the convex region confining the
    deformation. ``edge_start``/``edge_end`` bound the edge shared with the
    parent piece; ``normal`` is the +90-degree rotation of the normalized
    shared edge and points from the parent side into the leaf.
    """

    obstacle: int
    leaf: int
    parent: int
    center: np.ndarray
    inner: np.ndarray
    collar: np.ndarray
    inner_fn: ImplicitFn
    collar_fn: ImplicitFn
    edge_start: np.ndarray
    edge_end: np.ndarray
    normal: np.ndarray
    bump: BumpParams
    bbox: tuple[float, float, float, float] = field(default=None)

    def __post_init__(self):
        if self.bbox is None:
            object.__setattr__(self, "bbox", _bbox(np.asarray(self.collar, float)))

    @property
    def edge_offset(self) -> float:
        """Distance factor (edge_start - center)^T normal; positive by construction."""
        return float(np.dot(self.edge_start - self.center, self.normal))


@dataclass(frozen=True)
class RootSpec:
    """Final per-obstacle stage: deform the root piece to a disk, or merge it
    into the enclosing boundary.

    Disk kind: ``center`` lies strictly inside the root piece and the disk of
    ``radius`` about it is contained in the piece. Boundary kind: ``center``
    lies outside the enclosing freespace beyond the crossed boundary edge, and
    the shared-edge fields describe the crossed segment exactly like a
    purging stage.
    """

    obstacle: int
    root: int
    kind: str  # "disk" | "boundary"
    center: np.ndarray
    inner: np.ndarray
    collar: np.ndarray
    inner_fn: ImplicitFn
    collar_fn: ImplicitFn
    bump: BumpParams
    radius: float | None = None
    edge_start: np.ndarray | None = None
    edge_end: np.ndarray | None = None
    normal: np.ndarray | None = None
    bbox: tuple[float, float, float, float] = field(default=None)

    def __post_init__(self):
        if self.kind not in ("disk", "boundary"):
            raise GeometryError(f"unknown root kind {self.kind!r}")
        if self.kind == "disk" and (self.radius is None or self.radius <= 0):
            raise GeometryError("disk root needs a positive radius")
        if self.kind == "boundary" and self.normal is None:
            raise GeometryError("boundary root needs the crossed-edge geometry")
        if self.bbox is None:
            object.__setattr__(self, "bbox", _bbox(np.asarray(self.collar, float)))

    @property
    def edge_offset(self) -> float:
        return float(np.dot(self.edge_start - self.center, self.normal))


@dataclass(frozen=True)
class DiffeoChain:
    """Ordered purging stages plus the per-obstacle root stages.

    ``stages`` apply in sequence (each leaf is a current leaf of its tree when
    processed); ``roots`` apply jointly afterwards, their collars pairwise
    disjoint so at most one root switch is active anywhere. ``obstacles``
    keeps the consolidated mapped-space components for domain checks, and
    ``boundary`` the enclosing freespace polygon (None in synthetic tests).
    """

    stages: tuple[PurgingSpec, ...] = ()
    roots: tuple[RootSpec, ...] = ()
    boundary: np.ndarray | None = None
    obstacles: tuple[np.ndarray, ...] = ()

    def map(self, points, validate: bool = False):
        from semnav.diffeo.maps import full_map

        return full_map(points, self, validate=validate)

    def jacobian(self, points):
        from semnav.diffeo.maps import full_jacobian

        return full_jacobian(points, self)

    def map_and_jacobian(self, points):
        from semnav.diffeo.maps import full_map_and_jacobian

        return full_map_and_jacobian(points, self)

    @property
    def disk_obstacles(self) -> list[tuple[np.ndarray, float]]:
        """Model-space disks (center, radius) of the disk-kind roots."""
        return [(r.center, r.radius) for r in self.roots if r.kind == "disk"]


@dataclass(frozen=True)
class MappedWorld:
    """Input contract for chain construction: the consolidated mapped space.

    ``disk_components`` are the consolidated obstacles to deform to disks,
    ``boundary_components`` the ones to merge into the enclosing boundary
    (already clipped to it). ``unknown_regions`` are convex regions the
    collars must additionally avoid (used by verification; the separation
    margin keeps collars clear of them by construction). ``collar_margin``
    caps the collar offset.
    """

    boundary: np.ndarray
    disk_components: tuple[np.ndarray, ...] = ()
    boundary_components: tuple[np.ndarray, ...] = ()
    unknown_regions: tuple[np.ndarray, ...] = ()
    collar_margin: float = 0.1
