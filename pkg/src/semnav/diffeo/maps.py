"""Evaluation of the deformation stages: switches, factors, maps, Jacobians.

Every function accepts a single (2,) point or an (N, 2) batch. Stage
evaluation is exactly the identity outside the stage collar (no floating
error is introduced there), value 1 of the switch on and inside the inner
polygon, and the smooth blend in between:

    sigma = s_g * s_d / (s_g * s_d + (1 - s_g))

with s_g a cutoff in the inner implicit value and s_d a flat bump in the
collar implicit value scaled by the distance to the center. The stage map is

    h(x) = sigma * (center + nu * (x - center)) + (1 - sigma) * x

with deforming factor nu either the shared-hyperplane ratio (purging and
boundary-merge stages) or radius/|x - center| (disk roots). Jacobians use the
rank-one structure D h = [1 + sigma (nu - 1)] I + (x - c) [(nu - 1) grad_sigma
+ sigma grad_nu]^T, and both factor kinds satisfy (x - c)^T grad_nu = -nu,
which gives the closed-form determinant used in the validity battery.
"""

import numpy as np

from semnav.errors import DomainError
from semnav.geometry.polygon import polygon_contains

_EYE = np.eye(2)

# Points whose inner implicit value is this close to zero are treated as lying
# on the inner boundary (switch exactly 1). Composed stages land boundary
# points on the next stage's boundary only up to float cancellation, and near
# the shared-edge endpoints the raw switch formula would amplify that noise.
_GAMMA_BOUNDARY_TOL = 1e-12


def _as_batch(points):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def _switch_parts(pts, spec):
    """sigma and grad sigma for one stage; exact 0/1 on the branch sets."""
    n = len(pts)
    sigma = np.zeros(n)
    dsigma = np.zeros((n, 2))
    gamma, dgamma = spec.inner_fn.value_and_gradient(pts)
    sigma[gamma <= _GAMMA_BOUNDARY_TOL] = 1.0
    outer = gamma > _GAMMA_BOUNDARY_TOL
    if not outer.any():
        return sigma, dsigma
    eps = spec.bump.epsilon
    mu_g = spec.bump.mu_gamma
    mu_d = spec.bump.mu_delta
    cand = outer & (gamma < eps)
    if not cand.any():
        return sigma, dsigma
    delta, ddelta = spec.collar_fn.value_and_gradient(pts[cand])
    band_local = delta > 0.0
    if not band_local.any():
        return sigma, dsigma
    idx = np.flatnonzero(cand)[band_local]
    g = gamma[idx]
    dg = dgamma[idx]
    d = delta[band_local]
    dd = ddelta[band_local]
    rel = pts[idx] - spec.center
    rho = np.linalg.norm(rel, axis=1)

    # s_g = zeta(eps - g) / zeta(eps); underflows cleanly to 0 as g -> eps.
    s_g = np.exp(-mu_g / (eps - g) + mu_g / eps)
    alpha = d / rho
    s_d = np.exp(-mu_d / alpha)
    den = s_g * s_d + (1.0 - s_g)
    s = s_g * s_d / den

    ds_g = -(mu_g * s_g / (eps - g) ** 2)[:, None] * dg
    dalpha = (dd - (alpha / rho)[:, None] * rel) / rho[:, None]
    ds_d = (mu_d * s_d / alpha**2)[:, None] * dalpha
    ds = (s_d[:, None] * ds_g + (s_g * (1.0 - s_g))[:, None] * ds_d) / (den**2)[:, None]

    sigma[idx] = s
    dsigma[idx] = ds
    return sigma, dsigma


def _factor_parts(rel, spec):
    """nu and grad nu for the stage's deforming factor on active rows."""
    if getattr(spec, "kind", None) == "disk":
        rho2 = (rel * rel).sum(axis=1)
        rho = np.sqrt(rho2)
        nu = spec.radius / rho
        dnu = -(nu / rho2)[:, None] * rel
        return nu, dnu
    q = rel @ spec.normal
    d1 = spec.edge_offset
    nu = d1 / q
    dnu = -(d1 / q**2)[:, None] * spec.normal
    return nu, dnu


def _bbox_mask(pts, bbox, pad=0.0):
    x0, y0, x1, y1 = bbox
    return (
        (pts[:, 0] >= x0 - pad)
        & (pts[:, 0] <= x1 + pad)
        & (pts[:, 1] >= y0 - pad)
        & (pts[:, 1] <= y1 + pad)
    )


def switch(points, spec):
    """Stage switch in [0, 1]: 1 on the inner polygon boundary (and inside its
    closure), 0 outside the collar, smooth in between away from vertices."""
    pts, single = _as_batch(points)
    sigma, _ = _switch_parts(pts, spec)
    return float(sigma[0]) if single else sigma


def switch_and_gradient(points, spec):
    pts, single = _as_batch(points)
    sigma, dsigma = _switch_parts(pts, spec)
    if single:
        return float(sigma[0]), dsigma[0]
    return sigma, dsigma


def deforming_factor(points, spec):
    """Ratio collapsing the stage boundary onto its target (hyperplane or circle)."""
    pts, single = _as_batch(points)
    rel = pts - spec.center
    if getattr(spec, "kind", None) == "disk":
        nu, _ = _factor_parts(rel, spec)
    else:
        q = rel @ spec.normal
        if np.any(np.abs(q) < 1e-14):
            raise DomainError("deforming factor evaluated on its singular hyperplane")
        nu, _ = _factor_parts(rel, spec)
    return float(nu[0]) if single else nu


def deforming_factor_and_gradient(points, spec):
    pts, single = _as_batch(points)
    rel = pts - spec.center
    if getattr(spec, "kind", None) != "disk":
        q = rel @ spec.normal
        if np.any(np.abs(q) < 1e-14):
            raise DomainError("deforming factor evaluated on its singular hyperplane")
    nu, dnu = _factor_parts(rel, spec)
    if single:
        return float(nu[0]), dnu[0]
    return nu, dnu


def _stage_apply(pts, spec, want_jacobian):
    """Evaluate one stage on a batch: returns (h, J or None). Identity outside
    the collar bounding box is exact (rows untouched)."""
    n = len(pts)
    h = pts.copy()
    jac = np.tile(_EYE, (n, 1, 1)) if want_jacobian else None
    near = _bbox_mask(pts, spec.bbox, pad=1e-12)
    if not near.any():
        return h, jac
    sub = pts[near]
    sigma, dsigma = _switch_parts(sub, spec)
    act_local = sigma > 0.0
    if not act_local.any():
        return h, jac
    rows = np.flatnonzero(near)[act_local]
    x = pts[rows]
    s = sigma[act_local]
    ds = dsigma[act_local]
    rel = x - spec.center
    nu, dnu = _factor_parts(rel, spec)
    h[rows] = x + s[:, None] * (spec.center + nu[:, None] * rel - x)
    if want_jacobian:
        a = 1.0 + s * (nu - 1.0)
        v = (nu - 1.0)[:, None] * ds + s[:, None] * dnu
        jac[rows] = a[:, None, None] * _EYE[None, :, :] + rel[:, :, None] * v[:, None, :]
    return h, jac


def purging_map(points, spec):
    pts, single = _as_batch(points)
    h, _ = _stage_apply(pts, spec, want_jacobian=False)
    return h[0] if single else h


def purging_jacobian(points, spec):
    pts, single = _as_batch(points)
    _, jac = _stage_apply(pts, spec, want_jacobian=True)
    return jac[0] if single else jac


def stage_determinant(points, spec):
    """Closed-form Jacobian determinant of one stage (matrix determinant
    lemma plus the radial identity of the deforming factor)."""
    pts, single = _as_batch(points)
    n = len(pts)
    det = np.ones(n)
    near = _bbox_mask(pts, spec.bbox, pad=1e-12)
    if near.any():
        sub = pts[near]
        sigma, dsigma = _switch_parts(sub, spec)
        act_local = sigma > 0.0
        if act_local.any():
            rows = np.flatnonzero(near)[act_local]
            x = pts[rows]
            s = sigma[act_local]
            ds = dsigma[act_local]
            rel = x - spec.center
            nu, _ = _factor_parts(rel, spec)
            radial = np.einsum("ij,ij->i", rel, ds)
            det[rows] = (1.0 + s * (nu - 1.0)) * ((1.0 - s) + (nu - 1.0) * radial)
    return float(det[0]) if single else det


def root_map(points, roots):
    pts, single = _as_batch(points)
    h, _ = _root_apply(pts, roots, want_jacobian=False)
    return h[0] if single else h


def root_jacobian(points, roots):
    pts, single = _as_batch(points)
    _, jac = _root_apply(pts, roots, want_jacobian=True)
    if jac is None:
        jac = np.tile(_EYE, (len(pts), 1, 1))
    return jac[0] if single else jac


def _root_apply(pts, roots, want_jacobian, single: bool = False):
    """All root stages jointly; their collars are disjoint, so each point sees
    at most one active switch (violations raise). With ``single``, a plain
    scalar bounding-box test skips inactive roots without touching numpy; the
    returned Jacobian is then None when no root acted."""
    n = len(pts)
    h = pts
    jac = None
    touched = np.zeros(n, dtype=bool) if not single else None
    for spec in roots:
        if single:
            if _outside_bbox(pts[0, 0], pts[0, 1], spec.bbox):
                continue
        else:
            near = _bbox_mask(pts, spec.bbox, pad=1e-12)
            if not near.any():
                continue
        if h is pts:
            h = pts.copy()
            if want_jacobian:
                jac = np.tile(_EYE, (n, 1, 1))
        if single:
            near = np.ones(1, dtype=bool)
        sub = pts[near]
        sigma, dsigma = _switch_parts(sub, spec)
        act_local = sigma > 0.0
        if not act_local.any():
            continue
        rows = np.flatnonzero(near)[act_local]
        if touched is not None:
            if touched[rows].any():
                raise DomainError(
                    "two root switches positive at one point; root collars violate admissibility"
                )
            touched[rows] = True
        x = pts[rows]
        s = sigma[act_local]
        ds = dsigma[act_local]
        rel = x - spec.center
        nu, dnu = _factor_parts(rel, spec)
        h[rows] = x + s[:, None] * (spec.center + nu[:, None] * rel - x)
        if want_jacobian:
            a = 1.0 + s * (nu - 1.0)
            v = (nu - 1.0)[:, None] * ds + s[:, None] * dnu
            jac[rows] = a[:, None, None] * _EYE[None, :, :] + rel[:, :, None] * v[:, None, :]
    return h, jac


def _validate_domain(pts, chain):
    for poly in chain.obstacles:
        inside = polygon_contains(poly, pts, include_boundary=False)
        if inside.any():
            k = int(np.flatnonzero(inside)[0])
            raise DomainError(f"point {pts[k]} lies inside a mapped obstacle")


def _outside_bbox(x0, x1, bbox):
    return (
        x0 < bbox[0] - 1e-12
        or x0 > bbox[2] + 1e-12
        or x1 < bbox[1] - 1e-12
        or x1 > bbox[3] + 1e-12
    )


def full_map(points, chain, validate: bool = False):
    """Composition of all purging stages followed by the root stages."""
    pts, single = _as_batch(points)
    if validate:
        _validate_domain(pts, chain)
    x = pts
    for spec in chain.stages:
        if single and _outside_bbox(x[0, 0], x[0, 1], spec.bbox):
            continue
        x, _ = _stage_apply(x, spec, want_jacobian=False)
    x, _ = _root_apply(x, chain.roots, want_jacobian=False, single=single)
    return x[0] if single else x


def full_map_and_jacobian(points, chain, validate: bool = False):
    """Map and chain-rule Jacobian of the full composition."""
    pts, single = _as_batch(points)
    if validate:
        _validate_domain(pts, chain)
    x = pts
    jac = np.tile(_EYE, (len(pts), 1, 1))
    for spec in chain.stages:
        if single and _outside_bbox(x[0, 0], x[0, 1], spec.bbox):
            continue
        x, j = _stage_apply(x, spec, want_jacobian=True)
        jac = np.einsum("nij,njk->nik", j, jac)
    x, j = _root_apply(x, chain.roots, want_jacobian=True, single=single)
    if j is not None:
        jac = np.einsum("nij,njk->nik", j, jac)
    if single:
        return x[0], jac[0]
    return x, jac


def full_jacobian(points, chain):
    _, jac = full_map_and_jacobian(points, chain)
    return jac
