"""Reactive control laws evaluated in the model space and pulled back.

The fully-actuated law steers along the negated error to the projection of
the goal onto a convex local freespace cell; the differential-drive law
realizes the same projected-goal strategy through the heading map
phi = angle(Dh . [cos psi, sin psi]). Both are evaluated on immutable
snapshots and are safe for concurrent use.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from semnav.errors import DomainError, GeometryError
from semnav.diffeo import full_map, full_map_and_jacobian
from semnav.geometry import (
    clip_halfplane,
    line_clip_convex,
    point_polygon_distance,
    polygon_contains,
    project_convex,
)
from semnav.geometry.implicit import edge_hyperplanes, rot90
from semnav.world import ModelSpaceView

_SENSOR_GON = 32  # inscribed polygon approximating the sensor disk
_COS_MARGIN = math.cos(math.pi / _SENSOR_GON)
_SENSOR_DIRS = np.stack(
    [
        np.cos(np.linspace(0.0, 2 * math.pi, _SENSOR_GON, endpoint=False)),
        np.sin(np.linspace(0.0, 2 * math.pi, _SENSOR_GON, endpoint=False)),
    ],
    axis=1,
)


@dataclass(frozen=True)
class Gains:
    """Controller gains; all strictly positive."""

    k: float = 1.0
    k_v: float = 1.0
    k_omega: float = 1.0

    def __post_init__(self):
        if self.k <= 0 or self.k_v <= 0 or self.k_omega <= 0:
            raise ValueError("controller gains must be strictly positive")


@dataclass(frozen=True)
class TargetState:
    """Moving-goal state in the physical space."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass(frozen=True)
class ControlCommand:
    """Command plus the diagnostics streamed into traces."""

    velocity: np.ndarray | None = None  # fully actuated input
    v: float | None = None  # unicycle linear input
    omega: float | None = None  # unicycle angular input
    model_position: np.ndarray | None = None
    model_goal: np.ndarray | None = None
    lyapunov: float = 0.0
    local_freespace: np.ndarray | None = None
    projected_goal: np.ndarray | None = None
    jacobian_norm: float = 1.0

    @property
    def magnitude(self) -> float:
        if self.velocity is not None:
            return float(np.linalg.norm(self.velocity))
        return abs(self.v) + abs(self.omega)


def _sensor_polygon(center, radius):
    return np.asarray(center, float) + radius * _SENSOR_DIRS


def _signed_distance_nearest(p, poly):
    """One-pass signed distance (negative inside) and nearest boundary point
    for a convex CCW region (robust for degenerate slivers)."""
    v = poly
    e = np.concatenate((v[1:], v[:1])) - v
    rel = p - v
    ee = (e * e).sum(axis=1)
    t = np.clip((rel * e).sum(axis=1) / np.where(ee < 1e-300, 1.0, ee), 0.0, 1.0)
    res = rel - t[:, None] * e
    d2 = (res * res).sum(axis=1)
    k = int(np.argmin(d2))
    d = math.sqrt(float(d2[k]))
    q = v[k] + t[k] * e[k]
    inside = bool(np.all(e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0] >= 0.0))
    return (-d if inside else d), q


def _disk_separator(y, center, radius):
    """Half-plane keeping the robot side of a disk obstacle; well defined on
    both sides of the circle so stationary-point probes can cross it."""
    rel = y - center
    dist = float(np.linalg.norm(rel))
    if dist < 1e-14:
        raise DomainError("robot position coincides with a model disk center")
    n = rel / dist
    m = center + 0.5 * (dist + radius) * n
    return m, n


def _polygon_separator_from(y, d, q, poly):
    """Half-plane keeping the robot side of a convex region, given its signed
    distance and nearest boundary point; robust on the boundary and slightly
    inside (mirror construction)."""
    gap = math.hypot(y[0] - q[0], y[1] - q[1])
    if gap > 1e-12:
        n = (y - q) / gap if d > 0 else (q - y) / gap
    else:
        # On the boundary: use the outward normal of the supporting edge.
        anchors, normals = edge_hyperplanes(poly)
        vals = np.einsum("ij,ij->i", y - anchors, normals)
        n = -normals[int(np.argmax(vals))]
    m = (y + q) / 2.0 if d > 0 else q + 0.5 * abs(d) * n
    return m, n


def local_freespace(y, model: ModelSpaceView, sensor_range: float,
                    strict: bool = True) -> np.ndarray:
    """Convex local freespace cell around the model-space position.

    Intersection of the inscribed sensor polygon with the bisector half-plane
    toward every model obstacle in range and toward each enclosing-boundary
    edge; it contains the ball of radius half the model boundary distance
    (capped by the sensor radius). With ``strict``, positions outside the
    model freespace (beyond 1e-9) raise a DomainError.
    """
    y = np.asarray(y, float)
    violation = 0.0
    cell = _sensor_polygon(y, sensor_range)
    if model.boundary is not None:
        anchors, normals = model.planes()
        depth = np.einsum("ij,ij->i", y - anchors, normals)
        violation = min(violation, float(depth.min()))
        for k in np.flatnonzero(depth < 2 * sensor_range):
            m = anchors[k] + 0.5 * max(depth[k], 0.0) * normals[k]
            cell = clip_halfplane(cell, m, normals[k])
            if len(cell) == 0:
                raise DomainError("local freespace is empty")
    for center, radius in model.disks:
        d = math.hypot(y[0] - center[0], y[1] - center[1]) - radius
        violation = min(violation, d)
        if d > 2 * sensor_range:
            continue
        m, n = _disk_separator(y, np.asarray(center, float), radius)
        cell = clip_halfplane(cell, m, n)
        if len(cell) == 0:
            raise DomainError("local freespace is empty")
    for frag in model.fragments:
        d, q = _signed_distance_nearest(y, frag)
        violation = min(violation, d)
        if d > 2 * sensor_range:
            continue
        m, n = _polygon_separator_from(y, d, q, frag)
        cell = clip_halfplane(cell, m, n)
        if len(cell) == 0:
            raise DomainError("local freespace is empty")
    if strict and violation < -1e-9:
        raise DomainError("position outside the model freespace")
    return cell


def model_boundary_distance(y, model: ModelSpaceView) -> float:
    """Distance to the model-space freespace boundary (negative outside)."""
    y = np.asarray(y, float)
    best = np.inf
    if model.boundary is not None:
        best = -float(point_polygon_distance(y, model.boundary))
    for center, radius in model.disks:
        best = min(best, float(np.linalg.norm(y - center)) - radius)
    for frag in model.fragments:
        best = min(best, float(point_polygon_distance(y, frag)))
    return best


def _invert_jacobian(jac):
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    norm = np.abs(jac).max()
    if abs(det) < 1e-12 or (norm > 0 and norm * norm / abs(det) > 1e10):
        raise DomainError("deformation Jacobian is near singular (corner proximity)")
    return np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]]) / det


def control_fully_actuated(x, goal, chain, model: ModelSpaceView, gains: Gains,
                           sensor_range: float, strict: bool = True) -> ControlCommand:
    """Velocity command for first-order fully actuated dynamics."""
    x = np.asarray(x, float)
    y, jac = full_map_and_jacobian(x, chain)
    y_goal = full_map(np.asarray(goal, float), chain)
    cell = local_freespace(y, model, sensor_range, strict=strict)
    target = project_convex(y_goal, cell)
    u_model = -(y - target)
    u = gains.k * (_invert_jacobian(jac) @ u_model)
    return ControlCommand(
        velocity=u,
        model_position=y,
        model_goal=y_goal,
        lyapunov=float(np.sum((y - y_goal) ** 2)),
        local_freespace=cell,
        projected_goal=target,
        jacobian_norm=float(np.abs(jac).max()),
    )


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def heading_map(x, psi, chain):
    """Model-space heading phi and the pushed-forward heading vector e."""
    _, jac = full_map_and_jacobian(np.asarray(x, float), chain)
    e = jac @ np.array([math.cos(psi), math.sin(psi)])
    return math.atan2(e[1], e[0]), e, jac


def heading_derivatives(x, psi, chain, step: float = 1e-6):
    """(d phi / d psi, grad_x phi).

    The psi derivative is exact: rotating the heading through the linear map
    Dh rotates e at rate det(Dh)/|e|^2. The position gradient needs second
    derivatives of the deformation and uses central differences.
    """
    phi0, e, jac = heading_map(x, psi, chain)
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    ee = float(e @ e)
    if ee < 1e-24:
        raise DomainError("pushed-forward heading vanished (corner proximity)")
    dphi_dpsi = det / ee
    grad = np.zeros(2)
    for k, ek in enumerate(np.eye(2)):
        phi_p, _, _ = heading_map(x + step * ek, psi, chain)
        phi_m, _, _ = heading_map(x - step * ek, psi, chain)
        grad[k] = _wrap(phi_p - phi_m) / (2 * step)
    return dphi_dpsi, grad


def control_unicycle(pose, goal, chain, model: ModelSpaceView, gains: Gains,
                     sensor_range: float, strict: bool = True) -> ControlCommand:
    """(v, omega) command for differential-drive dynamics.

    Model-space inputs come from the projected-goal strategy: linear motion
    toward the goal's projection onto the local-freespace chord along the
    heading, angular motion steering toward the projected goal. They are
    pulled back through the heading map derivatives.
    """
    pose = np.asarray(pose, float)
    x, psi = pose[:2], pose[2]
    y, jac = full_map_and_jacobian(x, chain)
    e = jac @ np.array([math.cos(psi), math.sin(psi)])
    e_norm = float(np.linalg.norm(e))
    if e_norm < 1e-12:
        raise DomainError("pushed-forward heading vanished (corner proximity)")
    phi = math.atan2(e[1], e[0])
    y_goal = full_map(np.asarray(goal, float), chain)
    cell = local_freespace(y, model, sensor_range, strict=strict)
    target = project_convex(y_goal, cell)

    heading = np.array([math.cos(phi), math.sin(phi)])
    try:
        t_lo, t_hi = line_clip_convex(y, heading, cell)
    except GeometryError:
        t_lo = t_hi = 0.0
    t_lo, t_hi = min(t_lo, 0.0), max(t_hi, 0.0)
    v_model = float(np.clip(heading @ (y_goal - y), t_lo, t_hi))

    to_target = target - y
    if np.linalg.norm(to_target) > 1e-12:
        omega_model = math.atan2(
            float(rot90(heading) @ to_target), float(heading @ to_target)
        )
    else:
        omega_model = 0.0

    dphi_dpsi, grad_phi = heading_derivatives(x, psi, chain)
    v = gains.k_v * v_model / e_norm
    omega = (gains.k_omega * omega_model
             - v * float(grad_phi @ np.array([math.cos(psi), math.sin(psi)]))) / dphi_dpsi
    return ControlCommand(
        v=v,
        omega=omega,
        model_position=y,
        model_goal=y_goal,
        lyapunov=float(np.sum((y - y_goal) ** 2)),
        local_freespace=cell,
        projected_goal=target,
        jacobian_norm=float(np.abs(jac).max()),
    )


def nonadversarial_check(robot, target: TargetState, chain, model: ModelSpaceView,
                         gains: Gains, sensor_range: float | None = None):
    """Moving-target admissibility: (passes, max admissible model-space speed).

    A target is admissible when it approaches the robot, or moves slower than
    gain * reach^2 / distance with reach the radius of the ball around the
    robot guaranteed to lie in its local freespace. Coincident robot and
    target positions pass with unbounded allowance.
    """
    y = full_map(np.asarray(robot, float), chain)
    y_goal, jac_goal = full_map_and_jacobian(np.asarray(target.position, float), chain)
    y_dot = jac_goal @ np.asarray(target.velocity, float)
    gap = float(np.linalg.norm(y - y_goal))
    if gap < 1e-12:
        return True, np.inf
    reach = 0.5 * model_boundary_distance(y, model)
    if sensor_range is not None:
        reach = min(reach, sensor_range * _COS_MARGIN)
    reach = max(min(reach, gap), 0.0)
    bound = gains.k * reach * reach / gap
    approaching = float((y - y_goal) @ y_dot) >= 0.0
    return approaching or float(np.linalg.norm(y_dot)) <= bound + 1e-12, bound


def invert_map(chain, target, seed=None, tol: float = 1e-10, max_iter: int = 100):
    """Numerically invert the deformation: find x with map(x) = target.

    Damped Jacobian-preconditioned fixed-point iteration seeded at the model
    point. Raises when the residual fails to reach the tolerance.
    """
    target = np.asarray(target, float)
    x = np.array(target if seed is None else seed, dtype=float)
    for _ in range(max_iter):
        y, jac = full_map_and_jacobian(x, chain)
        r = y - target
        if float(np.linalg.norm(r)) < tol:
            return x
        step = _invert_jacobian(jac) @ r
        lam = 1.0
        base = float(np.linalg.norm(r))
        while lam > 1e-4:
            cand = x - lam * step
            if float(np.linalg.norm(full_map(cand, chain) - target)) < base:
                x = cand
                break
            lam *= 0.5
        else:
            x = x - 1e-4 * step
    raise DomainError(f"map inversion did not converge (residual at {x})")


def field_at(x, goal, chain, model, gains, sensor_range):
    """Closed-loop fully actuated field, tolerant to boundary-straddling
    probe points (used by stationary-point verification)."""
    cmd = control_fully_actuated(x, goal, chain, model, gains, sensor_range, strict=False)
    return cmd.velocity


def _model_field(y, y_goal, model, gains, sensor_range):
    """Model-space closed loop (no pullback): well defined on both sides of
    the model obstacle boundaries via the mirror separators."""
    cell = local_freespace(y, model, sensor_range, strict=False)
    return -gains.k * (y - project_convex(y_goal, cell))


def _classify_model(y, y_goal, model, gains, sensor_range, fd_step, is_goal):
    """Eigenstructure of the model-space field at a stationary point. The
    physical field Jacobian at a zero is similar to the model one (chain rule
    with vanishing field), so the classification transfers through the
    deformation unchanged."""
    jac = np.zeros((2, 2))
    for k, e in enumerate(np.eye(2)):
        up = _model_field(y + fd_step * e, y_goal, model, gains, sensor_range)
        um = _model_field(y - fd_step * e, y_goal, model, gains, sensor_range)
        jac[:, k] = (up - um) / (2 * fd_step)
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    tr = jac[0, 0] + jac[1, 1]
    if is_goal:
        return "goal" if det > 0 and tr < 0 else "degenerate"
    if det < 0:
        return "saddle"
    if det > 0 and tr < 0:
        return "stable"
    if det > 0 and tr > 0:
        return "unstable"
    return "degenerate"


def _boundary_preimage(chain, polygon, center, target, n_samples: int = 512):
    """Point on a mapped obstacle boundary whose image is the circle point
    ``target``: 1D bisection in the angle around ``center``, using that the
    boundary maps monotonically (degree one) onto the circle."""
    poly = np.asarray(polygon, float)
    edges = np.concatenate((poly[1:], poly[:1])) - poly
    lengths = np.linalg.norm(edges, axis=1)
    total = lengths.sum()
    cum = np.concatenate([[0.0], np.cumsum(lengths)])

    def point_at(s):
        s = s % total
        k = int(np.searchsorted(cum, s, side="right")) - 1
        k = min(k, len(poly) - 1)
        t = (s - cum[k]) / lengths[k]
        return poly[k] + t * edges[k]

    def angle_at(s):
        image = full_map(point_at(s), chain)
        rel = image - center
        return math.atan2(rel[1], rel[0])

    theta = math.atan2(target[1] - center[1], target[0] - center[0])
    ss = np.linspace(0.0, total, n_samples, endpoint=False)
    angles = np.array([angle_at(s) for s in ss])
    # Find the segment whose unwrapped angle range brackets theta.
    for i in range(n_samples):
        a0 = angles[i]
        a1 = angles[(i + 1) % n_samples]
        d_total = _wrap(a1 - a0)
        d_here = _wrap(theta - a0)
        if 0.0 <= d_here <= d_total or abs(d_here) < 1e-12:
            lo = ss[i]
            hi = ss[i] + (lengths.sum() / n_samples)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _wrap(angle_at(mid) - a0) < d_here:
                    lo = mid
                else:
                    hi = mid
            s_hat = 0.5 * (lo + hi)
            k = int(np.searchsorted(cum, s_hat % total, side="right")) - 1
            k = min(k, len(poly) - 1)
            outward = -rot90(edges[k] / lengths[k])
            return point_at(s_hat), outward
    raise DomainError("boundary preimage search failed to bracket the target angle")


def stationary_points(chain, model: ModelSpaceView, goal, gains: Gains,
                      sensor_range: float, unknown_obstacles=(), fd_step: float = 1e-4):
    """Stationary points of the closed-loop field in the terminal mode.

    Returns a list of (point, kind, field_norm) with kind in {'goal',
    'saddle', 'stable', 'unstable', 'degenerate'}. Disk obstacles contribute
    the boundary point diametrically behind the obstacle relative to the
    model goal, pulled back by inverting the deformation along the obstacle
    boundary; convex unknown obstacles contribute the boundary points whose
    outward normal points away from the goal. Reported points sit a hair
    outside the boundary so the pulled-back field is evaluable there.
    """
    goal = np.asarray(goal, float)
    y_goal = full_map(goal, chain)
    nudge = 2e-10
    results = [
        (goal, _classify_model(y_goal, y_goal, model, gains, sensor_range, fd_step, True))
    ]
    for root in chain.roots:
        if root.kind != "disk":
            continue
        away = y_goal - root.center
        norm = float(np.linalg.norm(away))
        if norm < 1e-12:
            continue
        s = root.center - root.radius * away / norm
        x_boundary, outward = _boundary_preimage(
            chain, chain.obstacles[root.obstacle], root.center, s
        )
        x_saddle = x_boundary + nudge * outward
        kind = _classify_model(s, y_goal, model, gains, sensor_range, fd_step, False)
        results.append((x_saddle, kind))
    for poly in unknown_obstacles:
        anchors, normals = edge_hyperplanes(np.asarray(poly, float))
        for q, n_out in _convex_far_points(np.asarray(poly, float), y_goal):
            kind = _classify_model(q, y_goal, model, gains, sensor_range, fd_step, False)
            results.append((q + nudge * n_out, kind))
    out = []
    for point, kind in results:
        u = field_at(point, goal, chain, model, gains, sensor_range)
        out.append((point, kind, float(np.linalg.norm(u))))
    return out


def _convex_far_points(poly, y_goal):
    """Boundary points (with outward normals) of a convex region whose outward
    normal is parallel to the ray from the goal: the classic trap points
    behind the obstacle."""
    out = []
    anchors, normals = edge_hyperplanes(poly)
    m = len(poly)
    for k in range(m):
        n_out = -normals[k]
        a, b = poly[k], poly[(k + 1) % m]
        # Foot of the goal's normal line on the edge.
        edge = b - a
        length2 = float(edge @ edge)
        t = float((y_goal - a) @ edge) / length2
        if 0.0 < t < 1.0:
            q = a + t * edge
            if float((q - y_goal) @ n_out) > 0:
                out.append((q, n_out))
    for k in range(m):
        v = poly[k]
        d = v - y_goal
        dn = float(np.linalg.norm(d))
        if dn < 1e-12:
            continue
        d = d / dn
        n_prev = -normals[(k - 1) % m]
        n_next = -normals[k]
        # Direction inside the vertex normal cone?
        if _ccw_between(n_prev, d, n_next):
            out.append((v.copy(), d))
    return out


def _ccw_between(a, d, b):
    cross_ad = a[0] * d[1] - a[1] * d[0]
    cross_db = d[0] * b[1] - d[1] * b[0]
    cross_ab = a[0] * b[1] - a[1] * b[0]
    if cross_ab >= 0:
        return cross_ad >= -1e-12 and cross_db >= -1e-12
    return cross_ad >= -1e-12 or cross_db >= -1e-12