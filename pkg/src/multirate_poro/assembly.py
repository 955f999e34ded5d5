"""Sparse assembly of the bilinear forms, loads and boundary constraints.

All element loops are vectorized over triangles and scattered with a COO
to CSR conversion, which sums duplicate entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .fem import SpacePair, eval_basis, rigid_motion_basis
from .mesh import SEGMENT_TAGS, edge_gauss3, quadrature_rule

FIELDS = ("ux", "uy", "p")
ELEMENT_DEGREE = 4
LOAD_DEGREE = 6  # P2 test functions against data up to degree 4


@dataclass(frozen=True)
class Dirichlet:
    value: Callable  # (x, y, t) -> array


@dataclass(frozen=True)
class Neumann:
    """Traction component (for ux/uy) or inflow flux phi_1 (for p)."""

    value: Callable  # (x, y, t) -> array


def _zero(x, y, t):
    return np.zeros_like(x)


@dataclass(frozen=True)
class BoundaryCondition:
    """One condition per (segment tag, field) pair.

    Missing pairs default to homogeneous Neumann.
    """

    conditions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        full = {}
        for key, cond in self.conditions.items():
            tag, fld = key
            if tag not in SEGMENT_TAGS:
                raise InvalidArgumentError(f"unknown boundary tag {tag!r}")
            if fld not in FIELDS:
                raise InvalidArgumentError(f"unknown boundary field {fld!r}")
            if not isinstance(cond, (Dirichlet, Neumann)):
                raise InvalidArgumentError(f"condition for {key} must be Dirichlet or Neumann")
            full[key] = cond
        for tag in SEGMENT_TAGS:
            for fld in FIELDS:
                full.setdefault((tag, fld), Neumann(_zero))
        object.__setattr__(self, "conditions", full)

    def kind(self, tag, fld):
        return self.conditions[(tag, fld)]

    def dirichlet_tags(self, fld):
        return [t for t in SEGMENT_TAGS if isinstance(self.conditions[(t, fld)], Dirichlet)]

    @property
    def has_displacement_dirichlet(self) -> bool:
        return bool(self.dirichlet_tags("ux") or self.dirichlet_tags("uy"))

    @property
    def has_pressure_dirichlet(self) -> bool:
        return bool(self.dirichlet_tags("p"))

    @property
    def pure_neumann(self) -> bool:
        return not (self.has_displacement_dirichlet or self.has_pressure_dirichlet)

    def vector_dirichlet(self, spaces: SpacePair, t: float):
        """Constrained vector dofs and their values at time t."""
        dofs, vals = [], []
        for comp, fld in enumerate(("ux", "uy")):
            seen = set()
            for tag in self.dirichlet_tags(fld):
                nodes = np.array([k for k in spaces.segment_nodes(tag) if k not in seen], dtype=np.int64)
                if nodes.size == 0:
                    continue
                seen.update(nodes.tolist())
                x, y = spaces.nodes[nodes, 0], spaces.nodes[nodes, 1]
                dofs.append(2 * nodes + comp)
                vals.append(np.broadcast_to(self.conditions[(tag, fld)].value(x, y, t), x.shape))
        return _pack(dofs, vals)

    def scalar_dirichlet(self, spaces: SpacePair, t: float):
        """Constrained pressure dofs (vertices) and prescribed pressure values."""
        dofs, vals, seen = [], [], set()
        for tag in self.dirichlet_tags("p"):
            verts = np.array([k for k in spaces.segment_vertices(tag) if k not in seen], dtype=np.int64)
            if verts.size == 0:
                continue
            seen.update(verts.tolist())
            x, y = spaces.scalar_coords[verts, 0], spaces.scalar_coords[verts, 1]
            dofs.append(verts)
            vals.append(np.broadcast_to(self.conditions[(tag, "p")].value(x, y, t), x.shape))
        return _pack(dofs, vals)


def _pack(dofs, vals):
    if not dofs:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    d = np.concatenate(dofs)
    v = np.concatenate([np.asarray(a, dtype=float) for a in vals])
    order = np.argsort(d, kind="stable")
    return d[order], v[order]


# ---------------------------------------------------------------------------
# Element kernels


def _quad_data(spaces: SpacePair, degree=ELEMENT_DEGREE):
    rule = quadrature_rule(degree)
    p2, dp2, p1, dp1 = eval_basis(rule.points)
    det, inv_t, _ = spaces.geometry
    g2 = np.einsum("tij,qaj->tqai", inv_t, dp2)  # (nt, q, 6, 2)
    g1 = np.einsum("tij,qaj->tqai", inv_t, dp1)  # (nt, q, 3, 2)
    wdet = det[:, None] * rule.weights[None, :]  # (nt, q)
    return rule, p2, g2, p1, g1, wdet


def _scatter(local, rows, cols, shape):
    nt, nr, nc = local.shape
    r = np.repeat(rows, nc, axis=1).reshape(nt, nr, nc)
    c = np.tile(cols, (1, nr)).reshape(nt, nr, nc)
    mat = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_a(spaces: SpacePair, mu: float) -> sp.csr_matrix:
    """Matrix of a(u, v) = mu (eps(u), eps(v)) on X_h."""
    if mu <= 0:
        raise InvalidArgumentError("mu must be positive")
    _, _, g2, _, _, wdet = _quad_data(spaces)
    dot = np.einsum("tqai,tqbi->tqab", g2, g2)
    eye = np.eye(2)
    # eps(N_a e_c) : eps(N_b e_d) = (delta_cd grad_a.grad_b + d_d N_a d_c N_b) / 2
    k = np.einsum("tq,tqab,cd->tacbd", wdet, dot, eye) + np.einsum("tq,tqad,tqbc->tacbd", wdet, g2, g2)
    k = 0.5 * mu * k.reshape(-1, 12, 12)
    cells = spaces.vector_cells
    return _scatter(k, cells, cells, (spaces.n_vector, spaces.n_vector))


def assemble_b(spaces: SpacePair) -> sp.csr_matrix:
    """Matrix with entries -(div phi_j, psi_i): scalar rows, vector columns."""
    _, _, g2, p1, _, wdet = _quad_data(spaces)
    local = -np.einsum("tq,qi,tqac->tiac", wdet, p1, g2).reshape(-1, 3, 12)
    return _scatter(local, spaces.mesh.triangles, spaces.vector_cells, (spaces.n_scalar, spaces.n_vector))


def assemble_c_mass(spaces: SpacePair, coeff: float = 1.0) -> sp.csr_matrix:
    """coeff times the P1 mass matrix."""
    if coeff < 0:
        raise InvalidArgumentError("mass coefficient must be nonnegative")
    _, _, _, p1, _, wdet = _quad_data(spaces)
    local = coeff * np.einsum("tq,qi,qj->tij", wdet, p1, p1)
    tris = spaces.mesh.triangles
    return _scatter(local, tris, tris, (spaces.n_scalar, spaces.n_scalar))


def permeability_tensor(K) -> np.ndarray:
    """Normalize a scalar or 2x2 permeability to a validated SPD tensor."""
    Kt = np.asarray(K, dtype=float)
    if Kt.ndim == 0:
        Kt = float(Kt) * np.eye(2)
    if Kt.shape != (2, 2) or not np.all(np.isfinite(Kt)):
        raise InvalidArgumentError("permeability must be a scalar or a 2x2 tensor")
    if not np.allclose(Kt, Kt.T, rtol=1e-14, atol=0.0) or np.linalg.eigvalsh(Kt).min() <= 0:
        raise InvalidArgumentError("permeability tensor must be symmetric positive definite")
    return Kt


def assemble_diffusion(spaces: SpacePair, K, mu_f: float) -> sp.csr_matrix:
    """(K / mu_f)-weighted P1 stiffness matrix."""
    if mu_f <= 0:
        raise InvalidArgumentError("viscosity must be positive")
    Kt = permeability_tensor(K) / mu_f
    _, _, _, _, g1, wdet = _quad_data(spaces)
    local = np.einsum("tq,tqai,ij,tqbj->tab", wdet, g1, Kt, g1)
    tris = spaces.mesh.triangles
    return _scatter(local, tris, tris, (spaces.n_scalar, spaces.n_scalar))


def assemble_p2_mass(spaces: SpacePair) -> sp.csr_matrix:
    """Vector P2 mass matrix (L2 inner product on X_h)."""
    _, p2, _, _, _, wdet = _quad_data(spaces)
    m = np.einsum("tq,qa,qb->tab", wdet, p2, p2)
    local = np.einsum("tab,cd->tacbd", m, np.eye(2)).reshape(-1, 12, 12)
    cells = spaces.vector_cells
    return _scatter(local, cells, cells, (spaces.n_vector, spaces.n_vector))


def rm_constraints(spaces: SpacePair, p2_mass=None) -> np.ndarray:
    """(3, n_vector) rows implementing (v_h, r) = 0 for the rigid motions."""
    if p2_mass is None:
        p2_mass = assemble_p2_mass(spaces)
    return np.asarray((p2_mass @ rigid_motion_basis(spaces).vectors.T).T)


# ---------------------------------------------------------------------------
# Loads


def _eval_pair(fn, x, y, t):
    fx, fy = fn(x, y, t)
    return np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)


def vector_volume_load(spaces: SpacePair, f, t: float) -> np.ndarray:
    out = np.zeros(spaces.n_vector)
    if f is None:
        return out
    rule, p2, _, _, _, wdet = _quad_data(spaces, LOAD_DEGREE)
    xq = spaces.map_points(rule.points)
    fx, fy = _eval_pair(f, xq[..., 0], xq[..., 1], t)
    cells = spaces.p2_cells
    np.add.at(out, 2 * cells, np.einsum("tq,tq,qa->ta", wdet, fx, p2))
    np.add.at(out, 2 * cells + 1, np.einsum("tq,tq,qa->ta", wdet, fy, p2))
    return out


def scalar_volume_load(spaces: SpacePair, phi, t: float) -> np.ndarray:
    out = np.zeros(spaces.n_scalar)
    if phi is None:
        return out
    rule, _, _, p1, _, wdet = _quad_data(spaces, LOAD_DEGREE)
    xq = spaces.map_points(rule.points)
    vals = np.broadcast_to(phi(xq[..., 0], xq[..., 1], t), wdet.shape)
    np.add.at(out, spaces.mesh.triangles, np.einsum("tq,tq,qi->ti", wdet, vals, p1))
    return out


def _edge_points(spaces: SpacePair, sel):
    s, w = edge_gauss3()
    verts = spaces.mesh.vertices
    e = spaces.mesh.boundary_edges[sel]
    xa, xb = verts[e[:, 0]], verts[e[:, 1]]
    length = np.linalg.norm(xb - xa, axis=1)
    pts = xa[:, None, :] * (1 - s)[None, :, None] + xb[:, None, :] * s[None, :, None]
    return e, s, w, length, pts


def vector_boundary_load(spaces: SpacePair, bc: BoundaryCondition, t: float) -> np.ndarray:
    """<f_1, v> over segments where the component is not Dirichlet."""
    out = np.zeros(spaces.n_vector)
    nv = spaces.mesh.n_vertices
    for tag in SEGMENT_TAGS:
        sel = spaces.mesh.boundary_tags == tag
        e, s, w, length, pts = _edge_points(spaces, sel)
        mids = nv + spaces.boundary_edge_ids[sel]
        shape = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])  # (3, 3)
        nodes = np.column_stack([e[:, 0], e[:, 1], mids])
        for comp, fld in enumerate(("ux", "uy")):
            cond = bc.conditions[(tag, fld)]
            if isinstance(cond, Dirichlet):
                continue
            g = np.broadcast_to(cond.value(pts[..., 0], pts[..., 1], t), pts.shape[:2])
            contrib = np.einsum("e,q,eq,qa->ea", length, w, g, shape)
            np.add.at(out, 2 * nodes + comp, contrib)
    return out


def scalar_boundary_load(spaces: SpacePair, bc: BoundaryCondition, t: float) -> np.ndarray:
    """<phi_1, psi> over segments without pressure Dirichlet data."""
    out = np.zeros(spaces.n_scalar)
    for tag in SEGMENT_TAGS:
        cond = bc.conditions[(tag, "p")]
        if isinstance(cond, Dirichlet):
            continue
        sel = spaces.mesh.boundary_tags == tag
        e, s, w, length, pts = _edge_points(spaces, sel)
        g = np.broadcast_to(cond.value(pts[..., 0], pts[..., 1], t), pts.shape[:2])
        shape = np.column_stack([1 - s, s])
        np.add.at(out, e, np.einsum("e,q,eq,qa->ea", length, w, g, shape))
    return out


def gravity_load(spaces: SpacePair, K, mu_f, rho_f, g) -> np.ndarray:
    """(1/mu_f)(K rho_f g, grad psi)."""
    out = np.zeros(spaces.n_scalar)
    gvec = rho_f * np.asarray(g, dtype=float)
    if not np.any(gvec):
        return out
    flux = permeability_tensor(K) @ gvec / mu_f
    _, _, _, _, g1, wdet = _quad_data(spaces)
    np.add.at(out, spaces.mesh.triangles, np.einsum("tq,tqai,i->ta", wdet, g1, flux))
    return out


def assemble_loads(spaces, f, f1_bc, phi, phi1_bc, g, rho_f, t, K=1.0, mu_f=1.0):
    """Vector-space and scalar-space load vectors at time t.

    ``f1_bc`` and ``phi1_bc`` are the boundary plans whose Neumann entries
    carry the traction and the flux data (usually the same object).
    """
    fv = vector_volume_load(spaces, f, t) + vector_boundary_load(spaces, f1_bc, t)
    fs = scalar_volume_load(spaces, phi, t) + scalar_boundary_load(spaces, phi1_bc, t)
    if rho_f and g is not None:
        fs = fs + gravity_load(spaces, K, mu_f, rho_f, g)
    return fv, fs


# ---------------------------------------------------------------------------
# Dirichlet elimination


def apply_dirichlet(matrix, rhs, dofs, values):
    """Symmetric elimination of prescribed dofs.

    Constrained rows and columns are zeroed with a unit diagonal and the
    known values are moved to the right-hand side.
    """
    elim = DirichletElimination(matrix, dofs)
    return elim.matrix, elim.rhs(rhs, values)


class DirichletElimination:
    """Eliminated matrix for a fixed dof set, reusable for many right-hand sides."""

    def __init__(self, matrix, dofs):
        A = sp.csr_matrix(matrix)
        n = A.shape[0]
        self.dofs = np.asarray(dofs, dtype=np.int64)
        if self.dofs.size and (self.dofs.min() < 0 or self.dofs.max() >= n):
            raise InvalidArgumentError("Dirichlet dof out of range")
        keep = np.ones(n)
        keep[self.dofs] = 0.0
        D = sp.diags(keep)
        self.coupling = A[:, self.dofs].tocsc() if self.dofs.size else None
        fixed = np.zeros(n)
        fixed[self.dofs] = 1.0
        self.matrix = (D @ A @ D + sp.diags(fixed)).tocsr()
        self.matrix.eliminate_zeros()
        self._keep = keep.astype(bool)

    def rhs(self, rhs, values):
        b = np.array(rhs, dtype=float, copy=True)
        if self.dofs.size == 0:
            return b
        values = np.broadcast_to(np.asarray(values, dtype=float), self.dofs.shape)
        b -= self.coupling @ values
        b[self.dofs] = values
        return b
