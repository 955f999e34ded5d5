"""Structured triangulations of the unit square and quadrature rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import InvalidArgumentError

# Boundary segment tags.  GAMMA1: y=0, GAMMA2: x=1, GAMMA3: y=1, GAMMA4: x=0.
GAMMA1, GAMMA2, GAMMA3, GAMMA4 = 1, 2, 3, 4
SEGMENT_TAGS = (GAMMA1, GAMMA2, GAMMA3, GAMMA4)
SEGMENT_NORMALS = {
    GAMMA1: (0.0, -1.0),
    GAMMA2: (1.0, 0.0),
    GAMMA3: (0.0, 1.0),
    GAMMA4: (-1.0, 0.0),
}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with tagged boundary edges.

    ``vertices`` is (nv, 2), ``triangles`` is (nt, 3) counterclockwise,
    ``boundary_edges`` is (nb, 2) vertex pairs with ``boundary_tags`` (nb,).
    ``n`` is the number of subdivisions per side of the square.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    n: int
    h: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Return (triangle index, barycentric coordinates) for points in the square.

        Relies on the structured layout produced by ``build_unit_square_mesh``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n
        s = pts[:, 0] * n
        r = pts[:, 1] * n
        i = np.clip(np.floor(s).astype(np.int64), 0, n - 1)
        j = np.clip(np.floor(r).astype(np.int64), 0, n - 1)
        fx = s - i
        fy = r - j
        upper = fy > fx
        tri = 2 * (j * n + i) + upper.astype(np.int64)
        bary = np.empty((pts.shape[0], 3))
        # lower triangle (v00, v10, v11); upper triangle (v00, v11, v01)
        lo = ~upper
        bary[lo, 0] = 1.0 - fx[lo]
        bary[lo, 1] = fx[lo] - fy[lo]
        bary[lo, 2] = fy[lo]
        bary[upper, 0] = 1.0 - fy[upper]
        bary[upper, 1] = fx[upper]
        bary[upper, 2] = fy[upper] - fx[upper]
        return tri, bary


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform n-by-n grid on [0,1]^2, each cell cut along its lower-left to upper-right diagonal."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (jj * (n + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1])
    right = np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + k + 1, n * (n + 1) + k])
    left = np.column_stack([(k + 1) * (n + 1), k * (n + 1)])
    boundary_edges = np.vstack([bottom, right, top, left]).astype(np.int64)
    boundary_tags = np.repeat(np.array(SEGMENT_TAGS), n)

    return Mesh(vertices, triangles, boundary_edges, boundary_tags, n, float(np.sqrt(2.0) / n))


def mesh_size(mesh: Mesh) -> float:
    """Longest edge over all triangles."""
    p = mesh.vertices[mesh.triangles]
    lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
    return float(lengths.max())


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Rule on the reference triangle (0,0),(1,0),(0,1).

    ``points`` holds barycentric coordinates (npts, 3) with the reference
    point (x, y) = (points[:, 1], points[:, 2]); weights sum to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


# Symmetric rules as orbit tables: ("s3",), ("s21", a), ("s111", a, b) with
# weights normalized to unit area.  Values seed a Newton polish below.
_ORBITS = {
    1: [(("s3",), 1.0)],
    2: [(("s21", 1.0 / 6.0), 1.0 / 3.0)],
    3: [(("s3",), -27.0 / 48.0), (("s21", 0.2), 25.0 / 48.0)],
    4: [
        (("s21", 0.445948490915965), 0.223381589678011),
        (("s21", 0.091576213509771), 0.109951743655322),
    ],
    5: [
        (("s3",), 0.225),
        (("s21", 0.470142064105115), 0.132394152788506),
        (("s21", 0.101286507323456), 0.125939180544827),
    ],
    6: [
        (("s21", 0.249286745170910), 0.116786275726379),
        (("s21", 0.063089014491502), 0.050844906370207),
        (("s111", 0.053145049844817, 0.310352451033784), 0.082851075618374),
    ],
}


def _expand(params, layout):
    pts, wts = [], []
    pos = 0
    for kind, nparam in layout:
        coords = params[pos : pos + nparam]
        w = params[pos + nparam]
        pos += nparam + 1
        if kind == "s3":
            orbit = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "s21":
            a = coords[0]
            orbit = [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]
        else:
            a, b = coords
            c = 1 - a - b
            orbit = [(a, b, c), (b, c, a), (c, a, b), (b, a, c), (a, c, b), (c, b, a)]
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    return np.array(pts), np.array(wts)


def _monomials(degree):
    return [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


def _exact_moment(i, j):
    # integral of x^i y^j over the reference triangle, normalized to unit area
    return 2.0 * factorial(i) * factorial(j) / factorial(i + j + 2)


def _moment_residual(params, layout, degree):
    pts, wts = _expand(params, layout)
    x, y = pts[:, 1], pts[:, 2]
    return np.array([wts @ (x**i * y**j) - _exact_moment(i, j) for i, j in _monomials(degree)])


@lru_cache(maxsize=None)
def quadrature_rule(degree: int) -> QuadRule:
    """Symmetric triangle rule exact for polynomials of total degree <= ``degree``."""
    if degree not in _ORBITS:
        raise InvalidArgumentError(f"unsupported quadrature degree {degree!r}; expected 1..6")
    layout, params = [], []
    for (kind, *coords), w in _ORBITS[degree]:
        layout.append((kind, len(coords)))
        params.extend(coords)
        params.append(w)
    params = np.array(params, dtype=float)
    # Gauss-Newton polish of the tabulated 15-digit values to machine precision.
    for _ in range(4):
        r = _moment_residual(params, layout, degree)
        if np.max(np.abs(r)) < 1e-16:
            break
        jac = np.empty((r.size, params.size))
        for k in range(params.size):
            step = np.zeros_like(params)
            step[k] = 1e-7
            jac[:, k] = (
                _moment_residual(params + step, layout, degree)
                - _moment_residual(params - step, layout, degree)
            ) / 2e-7
        params = params - np.linalg.lstsq(jac, r, rcond=None)[0]
    pts, wts = _expand(params, layout)
    pts.setflags(write=False)
    wts = 0.5 * wts
    wts.setflags(write=False)
    return QuadRule(pts, wts, degree)


def edge_gauss3() -> tuple[np.ndarray, np.ndarray]:
    """Three-point Gauss rule on [0, 1]: (points, weights)."""
    r = np.sqrt(15.0) / 10.0
    return np.array([0.5 - r, 0.5, 0.5 + r]), np.array([5.0, 8.0, 5.0]) / 18.0
