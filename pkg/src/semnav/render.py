"""Offline SVG rendering of episodes: workspace, obstacles, trajectory, fields.

Hand-rolled SVG output keeps files byte-for-byte reproducible. Known
(familiar) obstacles render dark, unknown obstacles light; the trajectory is
a polyline with start/goal markers. An optional determinant field renders as
colored grid cells under everything else.
"""

import numpy as np

_STYLE = {
    "workspace_fill": "#f7f7f5",
    "workspace_stroke": "#222222",
    "familiar_fill": "#5a5a5a",
    "unknown_fill": "#b8b8b8",
    "trajectory": "#c03020",
    "start": "#1a6faf",
    "goal": "#2e9e44",
    "boundary": "#888888",
}

# Compact diverging-ish ramp for log-determinant heatmaps.
_RAMP = [
    (0.0, (49, 54, 149)),
    (0.25, (116, 173, 209)),
    (0.5, (255, 255, 191)),
    (0.75, (244, 109, 67)),
    (1.0, (165, 0, 38)),
]


def _ramp_color(t):
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_RAMP, _RAMP[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(round(a + f * (b - a)) for a, b in zip(c0, c1))
    return _RAMP[-1][1]


class SvgCanvas:
    """Minimal SVG writer with a y-up world frame."""

    def __init__(self, bounds, width=760):
        (x0, y0), (x1, y1) = bounds
        pad = 0.05 * max(x1 - x0, y1 - y0)
        self.x0, self.y0 = x0 - pad, y0 - pad
        self.x1, self.y1 = x1 + pad, y1 + pad
        self.scale = width / (self.x1 - self.x0)
        self.width = width
        self.height = (self.y1 - self.y0) * self.scale
        self.parts = []

    def _pt(self, p):
        return (
            (p[0] - self.x0) * self.scale,
            (self.y1 - p[1]) * self.scale,
        )

    def polygon(self, vertices, fill, stroke="none", opacity=1.0, stroke_width=1.0):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in map(self._pt, vertices))
        self.parts.append(
            f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{stroke_width}" fill-opacity="{opacity}"/>'
        )

    def polyline(self, points, stroke, width=2.0):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in map(self._pt, points))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def circle(self, center, radius_world, fill, stroke="none"):
        cx, cy = self._pt(center)
        r = radius_world * self.scale
        self.parts.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="{fill}" stroke="{stroke}"/>'
        )

    def rect_world(self, lo, hi, color):
        x, y = self._pt((lo[0], hi[1]))
        w = (hi[0] - lo[0]) * self.scale
        h = (hi[1] - lo[1]) * self.scale
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="rgb{color}" stroke="none"/>'
        )

    def to_svg(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width:.0f}" '
            f'height="{self.height:.0f}" viewBox="0 0 {self.width:.0f} {self.height:.0f}">\n'
            f"{body}\n</svg>\n"
        )


def render_episode(scenario, trace=None, world=None, det_field=None) -> str:
    """SVG for a scenario and (optionally) its trace and determinant field.

    det_field is (points, values) with points an (N, 2) grid; values are
    rendered in log scale as colored cells below the geometry.
    """
    ws = np.asarray(scenario.workspace, float)
    canvas = SvgCanvas((ws.min(axis=0), ws.max(axis=0)))

    if det_field is not None:
        pts, vals = det_field
        good = np.isfinite(vals) & (vals > 0)
        if good.any():
            logs = np.log10(vals[good])
            lo, hi = logs.min(), logs.max()
            span = hi - lo if hi > lo else 1.0
            xs = np.unique(pts[:, 0])
            cell = (xs[1] - xs[0]) / 2 if len(xs) > 1 else 0.05
            for p, v in zip(pts[good], logs):
                canvas.rect_world(p - cell, p + cell, _ramp_color((v - lo) / span))

    canvas.polygon(ws, _STYLE["workspace_fill"], _STYLE["workspace_stroke"], stroke_width=2)
    catalog = scenario.catalog.materialize(scenario.robot.radius)
    for fam in catalog.familiar:
        canvas.polygon(fam.dilated, _STYLE["familiar_fill"], opacity=0.25)
        canvas.polygon(fam.placed, _STYLE["familiar_fill"])
    for unk in catalog.unknown:
        canvas.polygon(unk.dilated, _STYLE["unknown_fill"], opacity=0.3)
        canvas.polygon(unk.polygon, _STYLE["unknown_fill"])
    if world is not None:
        canvas.polygon(world.boundary, "none", _STYLE["boundary"], stroke_width=1)
        for root in world.chain.roots:
            if root.kind == "disk":
                canvas.circle(root.center, root.radius, "none", stroke=_STYLE["boundary"])
    if trace is not None and trace.records:
        canvas.polyline([r.x for r in trace.records], _STYLE["trajectory"])
        canvas.circle(trace.records[0].x, 0.08, _STYLE["start"])
    canvas.circle(np.asarray(scenario.robot.start, float), 0.06, _STYLE["start"])
    goal = scenario.goal
    if goal is None and scenario.target is not None:
        canvas.polyline(scenario.target["waypoints"], _STYLE["goal"], width=1.0)
        goal = scenario.target["waypoints"][-1]
    if goal is not None:
        canvas.circle(np.asarray(goal, float), 0.08, _STYLE["goal"])
    return canvas.to_svg()
