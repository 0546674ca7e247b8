"""Error norms of discrete fields: global/local L2, broken energy, weighted.

Regions are open mesh-aligned boxes; element membership is decided by the
barycenter, and a face contributes to a region norm only when both adjacent
elements are inside (for the whole domain, boundary faces contribute with
one-sided jumps).
"""

import numpy as np

from . import basis as _basis
from .curve import distance_to_curve
from .fields import WholeDomain, region_element_mask

_SINGULAR_SNAP = 1e-12
_SINGULAR_PUSH = 1e-10


def _element_quad_points(mesh, elements, rule):
    tc = mesh.tet_coords(elements)
    return _basis.map_to_physical(tc, rule.points)  # (n, q, 3)


def _guard_points(points, curve, h):
    """Nudge quadrature points off the curve so singular integrands stay finite.

    Points within 1e-12 of the curve move radially (against the nearest
    curve direction) by 1e-10 * h, far below reported precision.
    """
    flat = points.reshape(-1, 3)
    d = distance_to_curve(flat, curve)
    close = d < _SINGULAR_SNAP
    if not np.any(close):
        return points
    flat = flat.copy()
    for i in np.flatnonzero(close):
        p = flat[i]
        # a radial direction orthogonal to the nearest segment
        seg = curve.points[1] - curve.points[0]
        ref = np.array([1.0, 0.0, 0.0])
        if abs(seg @ ref) > 0.9 * np.linalg.norm(seg):
            ref = np.array([0.0, 1.0, 0.0])
        radial = np.cross(seg, ref)
        radial /= np.linalg.norm(radial)
        flat[i] = p + _SINGULAR_PUSH * h * radial
    return flat.reshape(points.shape)


def l2_error(field, exact, region=None, exactness=None, singular_curve=None):
    """sqrt(sum over region elements of (u_h - u)^2) by quadrature.

    ``exact`` is a callable over points (n, 3) (pass ``0`` for the plain
    norm of the field).
    """
    mesh = field.mesh
    mask = region_element_mask(mesh, region)
    elements = np.flatnonzero(mask)
    if elements.size == 0:
        return 0.0
    if exactness is None:
        exactness = 2 * field.degree + 2
    rule = _basis.tet_quadrature(exactness)
    uh = field.eval_in_elements(elements, rule.points)  # (n, q)
    pts = _element_quad_points(mesh, elements, rule)
    if singular_curve is not None:
        pts = _guard_points(pts, singular_curve, mesh.h)
    if callable(exact):
        ue = np.asarray(exact(pts.reshape(-1, 3)), dtype=float).reshape(uh.shape)
    else:
        ue = float(exact)
    diff2 = (uh - ue) ** 2
    total = np.einsum("nq,q,n->", diff2, rule.weights, mesh.det_jacobians[elements])
    return float(np.sqrt(total))


def _region_interior_faces(mesh, mask):
    both = mask[mesh.iface_elems[:, 0]] & mask[mesh.iface_elems[:, 1]]
    return np.flatnonzero(both)


def _face_quad_values(mesh, field, face_verts, elems, exactness):
    """Face quadrature points, physical weights, and field traces per side."""
    rule = _basis.tri_quadrature(exactness)
    A = mesh.vertices[face_verts[:, 0]]
    B = mesh.vertices[face_verts[:, 1]]
    C = mesh.vertices[face_verts[:, 2]]
    u = rule.points[:, 0][None, :, None]
    v = rule.points[:, 1][None, :, None]
    x = A[:, None, :] + u * (B - A)[:, None, :] + v * (C - A)[:, None, :]
    traces = []
    for e in elems:
        a0 = mesh.vertices[mesh.tets[e, 0]]
        jinv = mesh.jac_invs[e]
        ref = np.einsum("fmd,fqd->fqm", jinv, x - a0[:, None, :])
        vals = field.basis.eval(ref.reshape(-1, 3)).reshape(ref.shape[0], ref.shape[1], -1)
        traces.append(np.einsum("fi,fqi->fq", field.coeffs[e], vals))
    return x, rule.weights, traces


def dg_energy_error(field, exact, exact_grad, sigma, region=None, exactness=None):
    """Broken energy norm of (u_h - u) over a region.

    ``exact`` / ``exact_grad`` are callables over points (pass 0 / 0 for the
    plain energy norm); the jump weight is sigma / h.  Since the exact
    solution is continuous inside the region, interior-face jumps use the
    discrete field only; for the whole domain, boundary faces add the
    one-sided trace (u_h - u).
    """
    mesh = field.mesh
    mask = region_element_mask(mesh, region)
    elements = np.flatnonzero(mask)
    if elements.size == 0:
        return 0.0
    if exactness is None:
        exactness = 2 * field.degree + 2
    rule = _basis.tet_quadrature(exactness)
    gh = field.grad_in_elements(elements, rule.points)  # (n, q, 3)
    if callable(exact_grad):
        pts = _element_quad_points(mesh, elements, rule)
        ge = np.asarray(exact_grad(pts.reshape(-1, 3)), dtype=float).reshape(gh.shape)
        gh = gh - ge
    diff2 = (gh ** 2).sum(-1)
    total = np.einsum("nq,q,n->", diff2, rule.weights, mesh.det_jacobians[elements])

    face_exactness = 2 * field.degree + 2
    w_jump = sigma / mesh.grid_spacing
    fsel = _region_interior_faces(mesh, mask)
    if fsel.size:
        verts = mesh.iface_verts[fsel]
        e1 = mesh.iface_elems[fsel, 0]
        e2 = mesh.iface_elems[fsel, 1]
        _, wq, traces = _face_quad_values(mesh, field, verts, (e1, e2), face_exactness)
        jump = traces[0] - traces[1]
        areas = mesh.iface_areas[fsel]
        total += w_jump * np.einsum("fq,q,f->", jump ** 2, wq, 2.0 * areas)
    if region is None or isinstance(region, WholeDomain):
        verts = mesh.bface_verts
        e = mesh.bface_elem
        x, wq, traces = _face_quad_values(mesh, field, verts, (e,), face_exactness)
        jump = traces[0]
        if callable(exact):
            jump = jump - np.asarray(exact(x.reshape(-1, 3)), dtype=float).reshape(jump.shape)
        elif exact:
            jump = jump - float(exact)
        total += w_jump * np.einsum("fq,q,f->", jump ** 2, wq, 2.0 * mesh.bface_areas)
    return float(np.sqrt(total))


def dg_norm(field, sigma, region=None):
    """Broken energy norm of a discrete field."""
    return dg_energy_error(field, 0, 0, sigma, region=region)


def weighted_l2_norm(field, curve, alpha, exact=None, region=None, exactness=None):
    """L2 norm weighted by dist(x, curve)^(2 alpha); alpha in (-1, 1).

    Measures ``field - exact`` when ``exact`` is given.
    """
    if not -1.0 < alpha < 1.0:
        raise ValueError("alpha must be in (-1, 1)")
    mesh = field.mesh
    mask = region_element_mask(mesh, region)
    elements = np.flatnonzero(mask)
    if exactness is None:
        exactness = 2 * field.degree + 2
    rule = _basis.tet_quadrature(exactness)
    uh = field.eval_in_elements(elements, rule.points)
    pts = _element_quad_points(mesh, elements, rule)
    pts = _guard_points(pts, curve, mesh.h)
    if exact is not None:
        ue = np.asarray(exact(pts.reshape(-1, 3)), dtype=float).reshape(uh.shape)
        uh = uh - ue
    d = distance_to_curve(pts.reshape(-1, 3), curve).reshape(uh.shape)
    total = np.einsum(
        "nq,nq,q,n->", uh ** 2, d ** (2.0 * alpha), rule.weights,
        mesh.det_jacobians[elements],
    )
    return float(np.sqrt(total))


def weighted_dg_norm(field, curve, alpha, sigma, exact=None, exact_grad=None, exactness=None):
    """Distance-weighted energy norm; alpha in (0, 1).

    Volume part weights the broken gradient by d^(2 alpha); the jump part is
    (sigma / h) * ||d^alpha [v]||^2 over all faces.  For an error field,
    pass ``exact``/``exact_grad``: interior jumps of a continuous exact
    solution vanish, but its boundary trace must be subtracted.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    mesh = field.mesh
    if exactness is None:
        exactness = 2 * field.degree + 2
    rule = _basis.tet_quadrature(exactness)
    elements = np.arange(mesh.n_elements)
    gh = field.grad_in_elements(elements, rule.points)
    pts = _element_quad_points(mesh, elements, rule)
    pts = _guard_points(pts, curve, mesh.h)
    if exact_grad is not None:
        ge = np.asarray(exact_grad(pts.reshape(-1, 3)), dtype=float).reshape(gh.shape)
        gh = gh - ge
    d = distance_to_curve(pts.reshape(-1, 3), curve).reshape(gh.shape[:2])
    total = np.einsum(
        "nq,nq,q,n->", (gh ** 2).sum(-1), d ** (2.0 * alpha), rule.weights,
        mesh.det_jacobians,
    )

    face_exactness = 2 * field.degree + 2
    w_jump = sigma / mesh.grid_spacing
    verts = mesh.iface_verts
    e1 = mesh.iface_elems[:, 0]
    e2 = mesh.iface_elems[:, 1]
    x, wq, traces = _face_quad_values(mesh, field, verts, (e1, e2), face_exactness)
    jump = traces[0] - traces[1]
    dfa = distance_to_curve(x.reshape(-1, 3), curve).reshape(jump.shape)
    total += w_jump * np.einsum(
        "fq,fq,q,f->", jump ** 2, dfa ** (2.0 * alpha), wq, 2.0 * mesh.iface_areas
    )
    x, wq, traces = _face_quad_values(mesh, field, mesh.bface_verts, (mesh.bface_elem,), face_exactness)
    jump = traces[0]
    if exact is not None:
        jump = jump - np.asarray(exact(x.reshape(-1, 3)), dtype=float).reshape(jump.shape)
    dfa = distance_to_curve(x.reshape(-1, 3), curve).reshape(jump.shape)
    total += w_jump * np.einsum(
        "fq,fq,q,f->", jump ** 2, dfa ** (2.0 * alpha), wq, 2.0 * mesh.bface_areas
    )
    return float(np.sqrt(total))


def convergence_rates(errors, hs):
    """Pairwise observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.size < 2:
        raise ValueError("need equally many errors and mesh sizes, at least two")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive to compute rates")
    return list(np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:]))
