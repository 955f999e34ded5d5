"""Taylor-Hood spaces: continuous P2 vectors and continuous P1 scalars.

Global numbering is fixed by mesh-entity order: P2 nodes are the mesh
vertices followed by edge midpoints (edges sorted by vertex pair); vector
dofs interleave components, so node ``k`` owns dofs ``2k`` and ``2k + 1``.
Scalar dofs coincide with the vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import Mesh, SEGMENT_TAGS

# local edge e of a triangle is opposite local vertex e
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

# d(lambda_i)/d(x_ref, y_ref) for lambda = (1 - x - y, x, y)
_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def eval_basis(bary):
    """P2 and P1 reference basis at barycentric points.

    Returns ``(p2, dp2, p1, dp1)`` with shapes (npts, 6), (npts, 6, 2),
    (npts, 3), (npts, 3, 2).  Gradients are with respect to the reference
    coordinates.  P2 ordering: three vertex functions, then the edge
    functions for the edges opposite vertices 0, 1, 2.
    """
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    npts = lam.shape[0]

    p1 = lam.copy()
    dp1 = np.broadcast_to(_DLAMBDA, (npts, 3, 2)).copy()

    p2 = np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1]
    )
    # chain rule through the barycentric coordinates
    dl = np.zeros((npts, 6, 3))
    for i, li in enumerate((l0, l1, l2)):
        dl[:, i, i] = 4 * li - 1
    dl[:, 3, 1], dl[:, 3, 2] = 4 * l2, 4 * l1
    dl[:, 4, 2], dl[:, 4, 0] = 4 * l0, 4 * l2
    dl[:, 5, 0], dl[:, 5, 1] = 4 * l1, 4 * l0
    dp2 = dl @ _DLAMBDA
    return p2, dp2, p1, dp1


@dataclass(frozen=True, eq=False)
class SpacePair:
    """Dof maps for X_h (P2 vector) and M_h = W_h (P1 scalar) on one mesh."""

    mesh: Mesh
    edges: np.ndarray  # (ne, 2), sorted vertex pairs
    triangle_edges: np.ndarray  # (nt, 3), edge index for local edges
    p2_cells: np.ndarray  # (nt, 6) node indices
    nodes: np.ndarray  # (n_nodes, 2) P2 node coordinates
    boundary_edge_ids: np.ndarray  # (nb,) edge index of each mesh boundary edge

    @property
    def n_scalar(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_vector(self) -> int:
        return 2 * self.n_nodes

    @property
    def scalar_coords(self) -> np.ndarray:
        return self.mesh.vertices

    @cached_property
    def vector_cells(self) -> np.ndarray:
        """(nt, 12) vector dofs per triangle, local order 2*a + component."""
        cells = np.empty((self.p2_cells.shape[0], 12), dtype=np.int64)
        cells[:, 0::2] = 2 * self.p2_cells
        cells[:, 1::2] = 2 * self.p2_cells + 1
        return cells

    @cached_property
    def geometry(self):
        """Per-triangle (|det J|, inverse-transpose Jacobian (nt, 2, 2), origin)."""
        p = self.mesh.vertices[self.mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv_t = np.empty_like(jac)
        inv_t[:, 0, 0] = jac[:, 1, 1] / det
        inv_t[:, 0, 1] = -jac[:, 1, 0] / det
        inv_t[:, 1, 0] = -jac[:, 0, 1] / det
        inv_t[:, 1, 1] = jac[:, 0, 0] / det
        return np.abs(det), inv_t, p[:, 0]

    def map_points(self, bary) -> np.ndarray:
        """Physical coordinates (nt, npts, 2) of barycentric points on every triangle."""
        p = self.mesh.vertices[self.mesh.triangles]
        return np.einsum("qi,tid->tqd", np.atleast_2d(bary), p)

    def segment_nodes(self, tag: int) -> np.ndarray:
        """P2 nodes lying on a boundary segment."""
        sel = self.mesh.boundary_tags == tag
        verts = self.mesh.boundary_edges[sel].ravel()
        mids = self.mesh.n_vertices + self.boundary_edge_ids[sel]
        return np.unique(np.concatenate([verts, mids]))

    def segment_vertices(self, tag: int) -> np.ndarray:
        sel = self.mesh.boundary_tags == tag
        return np.unique(self.mesh.boundary_edges[sel].ravel())

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(np.concatenate([self.segment_nodes(t) for t in SEGMENT_TAGS]))


def build_spaces(mesh: Mesh) -> SpacePair:
    tris = mesh.triangles
    local = tris[:, LOCAL_EDGES]  # (nt, 3, 2)
    all_edges = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    triangle_edges = inverse.reshape(-1, 3)
    nv = mesh.n_vertices
    p2_cells = np.hstack([tris, nv + triangle_edges])
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    nodes = np.vstack([mesh.vertices, mids])

    # boundary edges -> edge ids via a lookup on sorted pairs
    key = edges[:, 0] * nv + edges[:, 1]
    be = np.sort(mesh.boundary_edges, axis=1)
    bkey = be[:, 0] * nv + be[:, 1]
    boundary_edge_ids = np.searchsorted(key, bkey)
    if not np.array_equal(key[boundary_edge_ids], bkey):
        raise ValueError("boundary edge not found among triangle edges")
    return SpacePair(mesh, edges, triangle_edges, p2_cells, nodes, boundary_edge_ids)


@dataclass(frozen=True, eq=False)
class RigidMotionBasis:
    """Nodal coefficient vectors of (1, 0), (0, 1) and (-y, x) in X_h."""

    vectors: np.ndarray  # (3, n_vector)


def interpolate_vector(spaces: SpacePair, fn, t=0.0) -> np.ndarray:
    """Nodal P2 interpolant of ``fn(x, y, t) -> (fx, fy)``."""
    x, y = spaces.nodes[:, 0], spaces.nodes[:, 1]
    fx, fy = fn(x, y, t)
    out = np.empty(spaces.n_vector)
    out[0::2] = np.broadcast_to(fx, x.shape)
    out[1::2] = np.broadcast_to(fy, x.shape)
    return out


def interpolate_scalar(spaces: SpacePair, fn, t=0.0) -> np.ndarray:
    """Nodal P1 interpolant of ``fn(x, y, t)``."""
    x, y = spaces.scalar_coords[:, 0], spaces.scalar_coords[:, 1]
    return np.broadcast_to(np.asarray(fn(x, y, t), dtype=float), x.shape).copy()


def rigid_motion_basis(spaces: SpacePair) -> RigidMotionBasis:
    x, y = spaces.nodes[:, 0], spaces.nodes[:, 1]
    vecs = np.zeros((3, spaces.n_vector))
    vecs[0, 0::2] = 1.0
    vecs[1, 1::2] = 1.0
    vecs[2, 0::2] = -y
    vecs[2, 1::2] = x
    return RigidMotionBasis(vecs)


def evaluate_vector(spaces: SpacePair, coeffs, points):
    """Values (npts, 2) and gradients (npts, 2, 2) of a P2 field at points.

    ``grad[:, c, d]`` is the derivative of component c along direction d.
    """
    tri, bary = spaces.mesh.locate(points)
    p2, dp2, _, _ = eval_basis(bary)
    _, inv_t, _ = spaces.geometry
    cells = spaces.p2_cells[tri]
    cx = coeffs[2 * cells]
    cy = coeffs[2 * cells + 1]
    vals = np.column_stack([np.sum(p2 * cx, axis=1), np.sum(p2 * cy, axis=1)])
    g = np.einsum("pij,paj->pai", inv_t[tri], dp2)
    grad = np.stack([np.einsum("pa,pad->pd", cx, g), np.einsum("pa,pad->pd", cy, g)], axis=1)
    return vals, grad


def evaluate_scalar(spaces: SpacePair, coeffs, points):
    """Values (npts,) and gradients (npts, 2) of a P1 field at points."""
    tri, bary = spaces.mesh.locate(points)
    _, _, p1, dp1 = eval_basis(bary)
    _, inv_t, _ = spaces.geometry
    c = coeffs[spaces.mesh.triangles[tri]]
    g = np.einsum("pij,paj->pai", inv_t[tri], dp1)
    return np.sum(p1 * c, axis=1), np.einsum("pa,pad->pd", c, g)


def prolong_vector(coarse: SpacePair, coeffs, fine: SpacePair) -> np.ndarray:
    """Exact transfer of a P2 field to a nested refinement."""
    vals, _ = evaluate_vector(coarse, coeffs, fine.nodes)
    out = np.empty(fine.n_vector)
    out[0::2], out[1::2] = vals[:, 0], vals[:, 1]
    return out


def prolong_scalar(coarse: SpacePair, coeffs, fine: SpacePair) -> np.ndarray:
    """Exact transfer of a P1 field to a nested refinement."""
    vals, _ = evaluate_scalar(coarse, coeffs, fine.scalar_coords)
    return vals
