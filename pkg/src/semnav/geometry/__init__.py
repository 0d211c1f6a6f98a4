"""Polygon primitives, implicit representations, decomposition and convex helpers."""

from semnav.geometry.polygon import (
    as_vertices,
    dedupe_vertices,
    validate_polygon,
    signed_area,
    polygon_area,
    polygon_centroid,
    ensure_ccw,
    polygon_contains,
    point_polygon_distance,
    dilate,
    erode,
    consolidate,
    convex_hull,
)
from semnav.geometry.implicit import ImplicitFn, build_implicit
from semnav.geometry.decomposition import (
    DecompositionTree,
    decompose_convex,
    pick_root,
    is_convex,
)
from semnav.geometry.convex import (
    project_convex,
    project_disk,
    clip_halfplane,
    convex_clip,
    convex_distance,
    separating_halfplane,
    line_clip_convex,
)

__all__ = [
    "as_vertices",
    "dedupe_vertices",
    "validate_polygon",
    "signed_area",
    "polygon_area",
    "polygon_centroid",
    "ensure_ccw",
    "polygon_contains",
    "point_polygon_distance",
    "dilate",
    "erode",
    "consolidate",
    "convex_hull",
    "ImplicitFn",
    "build_implicit",
    "DecompositionTree",
    "decompose_convex",
    "pick_root",
    "is_convex",
    "project_convex",
    "project_disk",
    "clip_halfplane",
    "convex_clip",
    "convex_distance",
    "separating_halfplane",
    "line_clip_convex",
]
