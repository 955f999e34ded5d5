"""Direct sparse solves for the diffusion (SPD) and generalized Stokes (saddle) systems."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError


class Factorization:
    """Reusable sparse LU factorization with a residual check on every solve."""

    def __init__(self, matrix, tol=1e-10):
        self.matrix = sp.csc_matrix(matrix)
        self.tol = tol
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                self._lu = spla.splu(self.matrix, permc_spec="COLAMD")
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SingularSystemError(f"factorization failed: {exc}") from exc
        self.norm = float(abs(self.matrix).sum(axis=1).max()) if self.matrix.nnz else 0.0
        # Pivots are not compared against a relative threshold: the saddle
        # blocks legitimately differ by 15 orders of magnitude (large moduli
        # against k3 times a mass matrix). Every solve checks its backward error.
        diag_u = self._lu.U.diagonal()
        if np.any(diag_u == 0.0) or not np.all(np.isfinite(diag_u)):
            raise SingularSystemError("factorization produced a zero pivot")

    def solve(self, rhs, refine=2):
        """Solve with up to ``refine`` steps of iterative refinement.

        The accepted residual is normwise backward error
        |b - Ax| / (|A| |x| + |b|), which is what a direct solver controls.
        """
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        for step in range(refine + 1):
            r = rhs - self.matrix @ x
            rel = self.backward_error(x, rhs, r)
            if not np.isfinite(rel):
                break
            if rel <= 0.01 * self.tol or step == refine:
                break
            x = x + self._lu.solve(r)
        if not np.isfinite(rel) or rel > self.tol:
            raise SingularSystemError(f"solve residual {rel:.3e} exceeds {self.tol:.1e}")
        return x

    def backward_error(self, x, rhs, r=None):
        if r is None:
            r = rhs - self.matrix @ x
        denom = self.norm * np.linalg.norm(x, np.inf) + np.linalg.norm(rhs, np.inf)
        if denom == 0.0:
            return 0.0 if not np.any(r) else np.inf
        return float(np.linalg.norm(r, np.inf) / denom)

def solve_spd(A, b, tol=1e-12):
    """Solve a symmetric positive definite system."""
    return Factorization(A, tol=tol).solve(b)


@dataclass
class SaddleSystem:
    """Blocks of the symmetric saddle system

        [ A   B^T  G^T ] [u]   [F]
        [ B  -C    0   ] [xi] = [H]
        [ G   0    0   ] [l]   [0]

    where ``B`` has entries -(div phi_j, psi_i) and ``G`` holds optional
    constraint rows.  Note the second block row carries -C.
    """

    A: sp.spmatrix
    B: sp.spmatrix
    C: sp.spmatrix
    F: np.ndarray | None = None
    H: np.ndarray | None = None
    G: np.ndarray | None = None

    @property
    def sizes(self):
        nc = 0 if self.G is None else self.G.shape[0]
        return self.A.shape[0], self.C.shape[0], nc

    def matrix(self) -> sp.csc_matrix:
        nu, nx, nc = self.sizes
        blocks = [[self.A, self.B.T, None], [self.B, -self.C, None]]
        if nc:
            G = sp.csr_matrix(self.G)
            blocks[0][2] = G.T
            blocks.append([G, None, sp.csr_matrix((nc, nc))])
        else:
            blocks = [row[:2] for row in blocks]
        return sp.bmat(blocks, format="csc")

    def rhs(self) -> np.ndarray:
        nu, nx, nc = self.sizes
        F = np.zeros(nu) if self.F is None else self.F
        H = np.zeros(nx) if self.H is None else self.H
        return np.concatenate([F, H, np.zeros(nc)])


def solve_saddle(system: SaddleSystem, tol=1e-10):
    """Solve the saddle system; returns (u, xi, multipliers)."""
    nu, nx, nc = system.sizes
    x = Factorization(system.matrix(), tol=tol).solve(system.rhs())
    return x[:nu], x[nu : nu + nx], x[nu + nx :]
