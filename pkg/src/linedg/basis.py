"""Nodal polynomial bases and quadrature rules on reference simplices.

Reference elements: tetrahedron with vertices (0,0,0), (1,0,0), (0,1,0),
(0,0,1); triangle (0,0), (1,0), (0,1); segment [0,1].  Bases are nodal
Lagrange on the equispaced lattice, built by inverting a monomial
Vandermonde matrix; conditioning is fine for the low degrees used here.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import CapabilityError, GeometryError

MAX_DEGREE = 4

REF_TET_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)


def _lattice_exponents(k, dim):
    """Multi-indices (a_1..a_dim) with sum <= k, graded lexicographic."""
    out = []
    for total in range(k + 1):
        for combo in _compositions(total, dim):
            out.append(combo)
    return np.array(out, dtype=np.int64)


def _compositions(total, dim):
    # descending first coordinate so the degree-1 lattice lists the
    # reference vertices in their conventional order
    if dim == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, dim - 1):
            yield (head,) + rest


@dataclass(frozen=True)
class BasisSet:
    """Nodal Lagrange basis of degree ``k`` on the reference tetrahedron."""

    degree: int
    nodes: np.ndarray          # (dim_P, 3) lattice nodes, vertices first for k=1
    exponents: np.ndarray      # (dim_P, 3) monomial powers
    coeffs: np.ndarray         # (dim_P, dim_P), phi_j = sum_l coeffs[l, j] x^expo[l]

    @property
    def dim(self):
        return self.nodes.shape[0]

    def eval(self, points):
        """Basis values at reference points; returns (npts, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mono = _monomials(pts, self.exponents)
        return mono @ self.coeffs

    def grad(self, points):
        """Reference gradients at reference points; returns (npts, dim, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((pts.shape[0], self.dim, 3))
        for d in range(3):
            dmono = _monomial_derivs(pts, self.exponents, d)
            out[:, :, d] = dmono @ self.coeffs
        return out


def _monomials(pts, exponents):
    npts = pts.shape[0]
    vals = np.ones((npts, exponents.shape[0]))
    for d in range(3):
        e = exponents[:, d]
        if e.max(initial=0) > 0:
            vals *= pts[:, d][:, None] ** e[None, :]
    return vals


def _monomial_derivs(pts, exponents, axis):
    npts = pts.shape[0]
    vals = np.ones((npts, exponents.shape[0]))
    for d in range(3):
        e = exponents[:, d].astype(float).copy()
        if d == axis:
            coef = e.copy()
            e = np.maximum(e - 1.0, 0.0)
            vals *= coef[None, :] * pts[:, d][:, None] ** e[None, :]
        else:
            vals *= pts[:, d][:, None] ** e[None, :]
    return vals


def make_basis(k):
    """Build the degree-``k`` nodal basis on the reference tetrahedron.

    dim = (k+1)(k+2)(k+3)/6; k=1 gives the 4 vertex hat functions in
    reference-vertex order.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise CapabilityError(f"polynomial degree must be an integer >= 1, got {k!r}")
    if k > MAX_DEGREE:
        raise CapabilityError(
            f"degree {k} not supported (equispaced nodal basis capped at {MAX_DEGREE})"
        )
    expo = _lattice_exponents(k, 3)
    # lattice nodes (a/k, b/k, c/k) reuse the exponent enumeration
    nodes = expo.astype(float) / float(k)
    vander = _monomials(nodes, expo)
    coeffs = np.linalg.inv(vander)
    return BasisSet(degree=int(k), nodes=nodes, exponents=expo, coeffs=coeffs)


@dataclass(frozen=True)
class QuadRule:
    """Positive-weight quadrature rule on a reference simplex."""

    points: np.ndarray   # (n, dim)
    weights: np.ndarray  # (n,)
    exactness: int

    @property
    def n(self):
        return self.points.shape[0]


_MAX_QUAD_EXACTNESS = 30


def _gauss_01(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _jacobi_01(m, alpha):
    # nodes/weights on [0,1] for weight (1-u)^alpha
    x, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (x + 1.0), w * 0.5 ** (alpha + 1.0)


def _check_exactness(min_exactness):
    if min_exactness < 0:
        raise CapabilityError("quadrature exactness must be nonnegative")
    if min_exactness > _MAX_QUAD_EXACTNESS:
        raise CapabilityError(
            f"quadrature exactness {min_exactness} exceeds supported maximum "
            f"{_MAX_QUAD_EXACTNESS}"
        )
    return max(int(min_exactness), 0)


def segment_quadrature(min_exactness):
    """Gauss rule on [0,1] exact for polynomials of the given degree."""
    d = _check_exactness(min_exactness)
    m = d // 2 + 1
    x, w = _gauss_01(m)
    return QuadRule(points=x[:, None], weights=w, exactness=2 * m - 1)


def tri_quadrature(min_exactness):
    """Conical-product rule on the reference triangle (weights sum to 1/2)."""
    d = _check_exactness(min_exactness)
    m = d // 2 + 1
    xu, wu = _jacobi_01(m, 1.0)
    xv, wv = _gauss_01(m)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = np.outer(wu, wv).ravel()
    return QuadRule(points=np.column_stack([x, y]), weights=w, exactness=d)


def tet_quadrature(min_exactness):
    """Conical-product rule on the reference tetrahedron (weights sum to 1/6)."""
    d = _check_exactness(min_exactness)
    m = d // 2 + 1
    xu, wu = _jacobi_01(m, 2.0)
    xv, wv = _jacobi_01(m, 1.0)
    xw, ww = _gauss_01(m)
    U, V, W = np.meshgrid(xu, xv, xw, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    z = (W * (1.0 - U) * (1.0 - V)).ravel()
    wts = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    return QuadRule(points=np.column_stack([x, y, z]), weights=wts, exactness=d)


def reference_tet_monomial_integral(a, b, c):
    """Exact integral of x^a y^b z^c over the reference tetrahedron."""
    from math import factorial

    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)


# ---------------------------------------------------------------------------
# Affine reference-to-physical maps


def tet_jacobian(tet_coords):
    """Jacobian data for affine maps of one or many tetrahedra.

    ``tet_coords``: (..., 4, 3) vertex coordinates.  Returns (J, detJ, Jinv)
    with J[..., :, d] the image of reference axis d.  Raises GeometryError on
    non-positive ``detJ`` (degenerate or inverted element).
    """
    tc = np.asarray(tet_coords, dtype=float)
    J = np.stack([tc[..., 1, :] - tc[..., 0, :],
                  tc[..., 2, :] - tc[..., 0, :],
                  tc[..., 3, :] - tc[..., 0, :]], axis=-1)
    detJ = np.linalg.det(J)
    scale = np.max(np.abs(J), axis=(-1, -2)) ** 3
    if np.any(detJ <= 1e-14 * np.maximum(scale, 1e-300)):
        raise GeometryError("degenerate or negatively oriented tetrahedron")
    return J, detJ, np.linalg.inv(J)


def map_to_physical(tet_coords, ref_points):
    """Map reference points into physical tetrahedra.

    ``tet_coords``: (4, 3) or (n, 4, 3); ``ref_points``: (q, 3).
    Returns (q, 3) or (n, q, 3).
    """
    tc = np.asarray(tet_coords, dtype=float)
    rp = np.atleast_2d(np.asarray(ref_points, dtype=float))
    J, _, _ = tet_jacobian(tc)
    if tc.ndim == 2:
        return tc[0] + rp @ J.T
    return tc[:, None, 0, :] + np.einsum("nde,qe->nqd", J, rp)


def to_reference(tet_coords, phys_points):
    """Inverse affine map: physical points to reference coordinates."""
    tc = np.asarray(tet_coords, dtype=float)
    pp = np.atleast_2d(np.asarray(phys_points, dtype=float))
    _, _, Jinv = tet_jacobian(tc)
    if tc.ndim == 2:
        return (pp - tc[0]) @ Jinv.T
    return np.einsum("nde,nqe->nqd", Jinv, pp - tc[:, None, 0, :])


def push_gradients(ref_grads, Jinv):
    """Physical gradients from reference gradients: grad_x = Jinv^T grad_ref.

    ``ref_grads``: (..., nb, 3); ``Jinv``: broadcastable (..., 3, 3).
    """
    return np.einsum("...im,...md->...id", ref_grads, Jinv)


def tet_volume(tet_coords):
    """Signed-volume magnitude |(b-a).((c-a)x(d-a))| / 6 for (..., 4, 3)."""
    tc = np.asarray(tet_coords, dtype=float)
    a = tc[..., 0, :]
    m = np.stack([tc[..., 1, :] - a, tc[..., 2, :] - a, tc[..., 3, :] - a], axis=-2)
    return np.abs(np.linalg.det(m)) / 6.0
