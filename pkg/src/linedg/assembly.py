"""Interior penalty DG assembly: stiffness, mass, and boundary lifting.

Degrees of freedom are blocked per element (block size = dim of the local
polynomial space); ``dof = element * block_size + local_index``.  The jump
penalty uses the global mesh size h, which matches the quasi-uniform grids
built here.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import basis as _basis

# configurations with a minus/zero symmetrizing term are only coercive for a
# large enough penalty; this floor rejects obviously unusable values and the
# coercivity probe in the test suite guards the rest
SIGMA_FLOOR = {-1: 1.0, 0: 1.0, 1: 0.0}


@dataclass(frozen=True)
class DGSpec:
    """Discretization parameters of the penalized bilinear form.

    ``epsilon``: -1 symmetric, 0 incomplete, +1 nonsymmetric variant.
    Defaults used by the built-in studies: sigma 5 for degree 1, 12 for
    degree 2, epsilon -1, beta 1.
    """

    k: int
    epsilon: int = -1
    sigma: float = 5.0
    beta: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("degree k must be >= 1")
        if self.epsilon not in (-1, 0, 1):
            raise ValueError("epsilon must be one of -1, 0, +1")
        if self.sigma <= SIGMA_FLOOR[self.epsilon]:
            raise ValueError(
                f"sigma={self.sigma} is at or below the coercivity floor "
                f"{SIGMA_FLOOR[self.epsilon]} for epsilon={self.epsilon}"
            )
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if self.epsilon == -1 and self.beta != 1.0:
            raise ValueError("the symmetric variant uses beta = 1")

    @classmethod
    def default(cls, k, epsilon=-1):
        sigma = {1: 5.0, 2: 12.0}.get(k, 12.0 + 6.0 * (k - 2))
        beta = 1.0 if epsilon == -1 else 2.0
        return cls(k=k, epsilon=epsilon, sigma=sigma, beta=beta)


@dataclass
class SparseSystem:
    """CSR operator over element-blocked DoFs."""

    matrix: sp.csr_matrix
    block_size: int
    symmetric: bool = False

    @property
    def ndof(self):
        return self.matrix.shape[0]

    @property
    def n_blocks(self):
        return self.ndof // self.block_size

    def export_matrix_market(self, path):
        from scipy.io import mmwrite

        mmwrite(str(path), self.matrix)


def _volume_grad_gram(mesh, basis, exactness=None):
    """COO data of the broken gradient term, sum_E (grad u, grad v)_E."""
    if exactness is None:
        exactness = 2 * basis.degree
    rule = _basis.tet_quadrature(exactness)
    g = basis.grad(rule.points)  # (q, nb, 3)
    # S[m, n, i, j] = sum_q w_q dphi_i/dxi_m dphi_j/dxi_n
    S = np.einsum("q,qim,qjn->mnij", rule.weights, g, g)
    jinv = mesh.jac_invs
    C = np.einsum("emd,end->emn", jinv, jinv)
    blocks = np.einsum("emn,mnij->eij", C, S) * mesh.det_jacobians[:, None, None]
    return blocks  # (nt, nb, nb)


def _block_coo(elem_rows, elem_cols, blocks, nb):
    """COO triplets for dense (nb, nb) blocks between element pairs."""
    n = elem_rows.shape[0]
    i = np.arange(nb, dtype=np.int64)
    rows = np.broadcast_to(
        (elem_rows[:, None, None] * nb + i[None, :, None]), (n, nb, nb)
    ).ravel()
    cols = np.broadcast_to(
        (elem_cols[:, None, None] * nb + i[None, None, :]), (n, nb, nb)
    ).ravel()
    return rows, cols, blocks.reshape(-1)


class _FaceBatch:
    """Per-face basis traces used by all face terms.

    For each face and adjacent side: values V (f, q, nb) and normal
    derivatives Gn (f, q, nb) at the face quadrature points, plus physical
    weights w (f, q) absorbing the face area.
    """

    def __init__(self, mesh, basis, face_verts, elems, normals, areas, exactness):
        rule = _basis.tri_quadrature(exactness)
        A = mesh.vertices[face_verts[:, 0]]
        B = mesh.vertices[face_verts[:, 1]]
        C = mesh.vertices[face_verts[:, 2]]
        u = rule.points[:, 0][None, :, None]
        v = rule.points[:, 1][None, :, None]
        self.x = A[:, None, :] + u * (B - A)[:, None, :] + v * (C - A)[:, None, :]
        self.w = rule.weights[None, :] * (2.0 * areas)[:, None]
        self.normals = normals
        self.sides = []
        for e in elems:
            a0 = mesh.vertices[mesh.tets[e, 0]]
            jinv = mesh.jac_invs[e]
            ref = np.einsum("fmd,fqd->fqm", jinv, self.x - a0[:, None, :])
            flat = ref.reshape(-1, 3)
            vals = basis.eval(flat).reshape(ref.shape[0], ref.shape[1], basis.dim)
            grads = basis.grad(flat).reshape(ref.shape[0], ref.shape[1], basis.dim, 3)
            phys_g = np.einsum("fqim,fmd->fqid", grads, jinv)
            gn = np.einsum("fqid,fd->fqi", phys_g, normals)
            self.sides.append((vals, gn))


def _face_term_blocks(batch, signs, factors, epsilon, penalty_weight):
    """All element-pair blocks of the face part of the bilinear form.

    Yields (side_test, side_trial, block) with block[f, i, j] adding into
    rows of the test side and columns of the trial side:
      - consistency  -({grad u}.n) [v]
      - symmetrizing +eps ({grad v}.n) [u]
      - penalty      +pen [u][v]
    """
    w = batch.w
    for b, (Vb, Gnb) in enumerate(batch.sides):
        for a, (Va, Gna) in enumerate(batch.sides):
            blk = -signs[b] * factors[a] * np.einsum("fq,fqi,fqj->fij", w, Vb, Gna)
            blk += epsilon * signs[a] * factors[b] * np.einsum(
                "fq,fqi,fqj->fij", w, Gnb, Va
            )
            blk += (penalty_weight * signs[a] * signs[b]) * np.einsum(
                "fq,fqi,fqj->fij", w, Vb, Va
            )
            yield b, a, blk


def assemble_stiffness(mesh, spec, basis, face_chunk=16384):
    """Assemble the penalized broken Laplacian for the given parameters."""
    if basis.degree != spec.k:
        raise ValueError("basis degree and spec.k disagree")
    nb = basis.dim
    ndof = mesh.n_elements * nb
    penalty = spec.sigma / mesh.grid_spacing ** spec.beta
    face_exactness = 2 * spec.k + 1

    rows_parts, cols_parts, vals_parts = [], [], []

    vol_blocks = _volume_grad_gram(mesh, basis)
    r, c, v = _block_coo(
        np.arange(mesh.n_elements, dtype=np.int64),
        np.arange(mesh.n_elements, dtype=np.int64),
        vol_blocks,
        nb,
    )
    rows_parts.append(r)
    cols_parts.append(c)
    vals_parts.append(v)

    ni = mesh.iface_elems.shape[0]
    for start in range(0, ni, face_chunk):
        sl = slice(start, min(start + face_chunk, ni))
        e1 = mesh.iface_elems[sl, 0]
        e2 = mesh.iface_elems[sl, 1]
        batch = _FaceBatch(
            mesh, basis, mesh.iface_verts[sl], (e1, e2),
            mesh.iface_normals[sl], mesh.iface_areas[sl], face_exactness,
        )
        elems = (e1, e2)
        for b, a, blk in _face_term_blocks(
            batch, signs=(1.0, -1.0), factors=(0.5, 0.5),
            epsilon=spec.epsilon, penalty_weight=penalty,
        ):
            r, c, v = _block_coo(elems[b], elems[a], blk, nb)
            rows_parts.append(r)
            cols_parts.append(c)
            vals_parts.append(v)

    nbf = mesh.bface_elem.shape[0]
    for start in range(0, nbf, face_chunk):
        sl = slice(start, min(start + face_chunk, nbf))
        e = mesh.bface_elem[sl]
        batch = _FaceBatch(
            mesh, basis, mesh.bface_verts[sl], (e,),
            mesh.bface_normals[sl], mesh.bface_areas[sl], face_exactness,
        )
        for b, a, blk in _face_term_blocks(
            batch, signs=(1.0,), factors=(1.0,),
            epsilon=spec.epsilon, penalty_weight=penalty,
        ):
            r, c, v = _block_coo(e, e, blk, nb)
            rows_parts.append(r)
            cols_parts.append(c)
            vals_parts.append(v)

    mat = sp.coo_matrix(
        (np.concatenate(vals_parts), (np.concatenate(rows_parts), np.concatenate(cols_parts))),
        shape=(ndof, ndof),
    ).tocsr()
    return SparseSystem(matrix=mat, block_size=nb, symmetric=(spec.epsilon == -1))


def reference_mass(basis):
    """Mass matrix on the reference tetrahedron."""
    rule = _basis.tet_quadrature(2 * basis.degree)
    vals = basis.eval(rule.points)
    return np.einsum("q,qi,qj->ij", rule.weights, vals, vals)


def assemble_mass(mesh, basis):
    """Block-diagonal broken mass matrix (affine elements share one block)."""
    nb = basis.dim
    mref = reference_mass(basis)
    blocks = mref[None, :, :] * mesh.det_jacobians[:, None, None]
    e = np.arange(mesh.n_elements, dtype=np.int64)
    r, c, v = _block_coo(e, e, blocks, nb)
    mat = sp.coo_matrix((v, (r, c)), shape=(mesh.n_elements * nb,) * 2).tocsr()
    return SparseSystem(matrix=mat, block_size=nb, symmetric=True)


def assemble_jump_penalty(mesh, basis, weight, face_exactness=None):
    """Jump bilinear form weight * sum_faces (jump u, jump v), boundary included."""
    nb = basis.dim
    ndof = mesh.n_elements * nb
    if face_exactness is None:
        face_exactness = 2 * basis.degree + 1
    rows_parts, cols_parts, vals_parts = [], [], []
    e1 = mesh.iface_elems[:, 0]
    e2 = mesh.iface_elems[:, 1]
    batch = _FaceBatch(
        mesh, basis, mesh.iface_verts, (e1, e2),
        mesh.iface_normals, mesh.iface_areas, face_exactness,
    )
    elems = (e1, e2)
    signs = (1.0, -1.0)
    for b in range(2):
        Vb = batch.sides[b][0]
        for a in range(2):
            Va = batch.sides[a][0]
            blk = (weight * signs[a] * signs[b]) * np.einsum(
                "fq,fqi,fqj->fij", batch.w, Vb, Va
            )
            r, c, v = _block_coo(elems[b], elems[a], blk, nb)
            rows_parts.append(r)
            cols_parts.append(c)
            vals_parts.append(v)
    e = mesh.bface_elem
    batch = _FaceBatch(
        mesh, basis, mesh.bface_verts, (e,),
        mesh.bface_normals, mesh.bface_areas, face_exactness,
    )
    V = batch.sides[0][0]
    blk = weight * np.einsum("fq,fqi,fqj->fij", batch.w, V, V)
    r, c, v = _block_coo(e, e, blk, nb)
    rows_parts.append(r)
    cols_parts.append(c)
    vals_parts.append(v)
    mat = sp.coo_matrix(
        (np.concatenate(vals_parts), (np.concatenate(rows_parts), np.concatenate(cols_parts))),
        shape=(ndof, ndof),
    ).tocsr()
    return SparseSystem(matrix=mat, block_size=nb, symmetric=True)


def assemble_dg_norm_gram(mesh, basis, sigma):
    """Gram matrix of the broken energy norm: v^T G v = ||v||_DG^2."""
    nb = basis.dim
    vol_blocks = _volume_grad_gram(mesh, basis)
    e = np.arange(mesh.n_elements, dtype=np.int64)
    r, c, v = _block_coo(e, e, vol_blocks, nb)
    vol = sp.coo_matrix((v, (r, c)), shape=(mesh.n_elements * nb,) * 2).tocsr()
    pen = assemble_jump_penalty(mesh, basis, sigma / mesh.grid_spacing)
    return SparseSystem(matrix=(vol + pen.matrix).tocsr(), block_size=nb, symmetric=True)


def assemble_dirichlet_rhs(mesh, spec, basis, g, exactness=None):
    """Weak (Nitsche) lifting of Dirichlet data g on the boundary faces.

    r_i = eps * int_e g grad(phi_i).n + sigma/h^beta * int_e g phi_i.
    g is a callable over points (n, 3) or a constant; g == 0 gives the zero
    vector of the homogeneous problem.
    """
    nb = basis.dim
    b = np.zeros(mesh.n_elements * nb)
    if not callable(g):
        if float(g) == 0.0:
            return b
        g_val = float(g)
        g = lambda pts: np.full(pts.shape[0], g_val)
    if exactness is None:
        exactness = 2 * basis.degree + 2
    penalty = spec.sigma / mesh.grid_spacing ** spec.beta
    e = mesh.bface_elem
    batch = _FaceBatch(
        mesh, basis, mesh.bface_verts, (e,),
        mesh.bface_normals, mesh.bface_areas, exactness,
    )
    V, Gn = batch.sides[0]
    gv = np.asarray(g(batch.x.reshape(-1, 3)), dtype=float).reshape(batch.w.shape)
    contrib = spec.epsilon * np.einsum("fq,fq,fqi->fi", batch.w, gv, Gn)
    contrib += penalty * np.einsum("fq,fq,fqi->fi", batch.w, gv, V)
    np.add.at(b.reshape(mesh.n_elements, nb), e, contrib)
    return b


def assemble_volume_rhs(mesh, basis, F, exactness=None):
    """Volume load vector (F, phi_i) for a callable F over points (n, 3)."""
    if exactness is None:
        exactness = 2 * basis.degree + 2
    rule = _basis.tet_quadrature(exactness)
    vals = basis.eval(rule.points)  # (q, nb)
    phys = _basis.map_to_physical(mesh.tet_coords(), rule.points)  # (nt, q, 3)
    Fv = np.asarray(F(phys.reshape(-1, 3)), dtype=float).reshape(mesh.n_elements, rule.n)
    contrib = np.einsum("q,eq,qi->ei", rule.weights, Fv, vals) * mesh.det_jacobians[:, None]
    return contrib.ravel()
