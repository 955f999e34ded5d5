"""Projections used for initial data: strain-elliptic R_h, gradient-elliptic S_h, L2 Q_h."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import (
    DirichletElimination,
    assemble_a,
    assemble_c_mass,
    assemble_diffusion,
    rm_constraints,
)
from .fem import SpacePair, eval_basis
from .linsolve import Factorization
from .mesh import quadrature_rule

RHS_DEGREE = 6


@dataclass(frozen=True)
class ProjectedField:
    coeffs: np.ndarray
    operator: str  # "Rh", "Sh" or "Qh"
    source: str = ""


def _rhs_quadrature(spaces: SpacePair):
    rule = quadrature_rule(RHS_DEGREE)
    p2, dp2, p1, dp1 = eval_basis(rule.points)
    det, inv_t, _ = spaces.geometry
    xq = spaces.map_points(rule.points)
    wdet = det[:, None] * rule.weights[None, :]
    return xq, wdet, p2, np.einsum("tij,qaj->tqai", inv_t, dp2), p1, np.einsum("tij,qaj->tqai", inv_t, dp1)


def _jacobian_at(v_grad, x, y):
    jac = v_grad(x, y)
    return np.array([[np.broadcast_to(jac[c][d], x.shape) for d in range(2)] for c in range(2)])


def project_Rh(spaces: SpacePair, v_grad, source="", dirichlet=None, constraints=None) -> ProjectedField:
    """Elliptic projection (eps(R v - v), eps(w)) = 0 for all w in V_h.

    ``v_grad(x, y)`` returns the Jacobian ``J[c][d] = d v_c / d x_d``.  Without
    ``dirichlet`` the result is L2-orthogonal to the rigid motions; with
    ``dirichlet=(dofs, values)`` those dofs are prescribed instead.
    """
    xq, wdet, _, g2, _, _ = _rhs_quadrature(spaces)
    J = _jacobian_at(v_grad, xq[..., 0], xq[..., 1])  # (2, 2, nt, q)
    eps = 0.5 * (J + J.transpose(1, 0, 2, 3))
    rhs = np.zeros(spaces.n_vector)
    local = np.einsum("tq,cdtq,tqad->tac", wdet, eps, g2)
    np.add.at(rhs, spaces.vector_cells, local.reshape(-1, 12))
    A = assemble_a(spaces, 1.0)
    if dirichlet is not None:
        elim = DirichletElimination(A, dirichlet[0])
        coeffs = Factorization(elim.matrix).solve(elim.rhs(rhs, dirichlet[1]))
        return ProjectedField(coeffs, "Rh", source)
    G = rm_constraints(spaces) if constraints is None else constraints
    K = sp.bmat([[A, sp.csr_matrix(G).T], [sp.csr_matrix(G), None]], format="csc")
    sol = Factorization(K).solve(np.concatenate([rhs, np.zeros(G.shape[0])]))
    return ProjectedField(sol[: spaces.n_vector], "Rh", source)


def project_Sh(spaces: SpacePair, phi, phi_grad, source="") -> ProjectedField:
    """(grad S phi, grad psi) = (grad phi, grad psi) with (S phi, 1) = (phi, 1)."""
    xq, wdet, _, _, p1, g1 = _rhs_quadrature(spaces)
    x, y = xq[..., 0], xq[..., 1]
    gx, gy = (np.broadcast_to(c, x.shape) for c in phi_grad(x, y))
    rhs = np.zeros(spaces.n_scalar)
    np.add.at(rhs, spaces.mesh.triangles, np.einsum("tq,tqa->ta", wdet, gx[..., None] * g1[..., 0] + gy[..., None] * g1[..., 1]))
    mean = float(np.sum(wdet * np.broadcast_to(phi(x, y), x.shape)))
    ones = assemble_c_mass(spaces) @ np.ones(spaces.n_scalar)
    S = assemble_diffusion(spaces, 1.0, 1.0)
    K = sp.bmat([[S, sp.csr_matrix(ones).T], [sp.csr_matrix(ones), None]], format="csc")
    sol = Factorization(K).solve(np.append(rhs, mean))
    return ProjectedField(sol[:-1], "Sh", source)


def project_Qh(spaces: SpacePair, phi, source="") -> ProjectedField:
    """Global L2 projection onto continuous P1."""
    xq, wdet, _, _, p1, _ = _rhs_quadrature(spaces)
    x, y = xq[..., 0], xq[..., 1]
    rhs = np.zeros(spaces.n_scalar)
    np.add.at(rhs, spaces.mesh.triangles, np.einsum("tq,tq,qa->ta", wdet, np.broadcast_to(phi(x, y), x.shape), p1))
    coeffs = Factorization(assemble_c_mass(spaces), tol=1e-12).solve(rhs)
    return ProjectedField(coeffs, "Qh", source)
