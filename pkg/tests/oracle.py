"""Dense brute-force reference assembly, independent of the package's element kernels.

Local bases are built from a monomial Vandermonde matrix in physical
coordinates, integrals use a collapsed (Duffy) Gauss-Legendre rule, and
global numbering is recovered by matching node coordinates. Nothing here
reuses the package's basis functions, quadrature tables or dof maps.
"""

import numpy as np

P2_EXPONENTS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def duffy_rule(verts, order=7):
    """Points and weights on a physical triangle from a tensor Gauss rule on the square."""
    g, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (g + 1.0)
    ws = 0.5 * w
    a, b = np.meshgrid(s, s, indexing="ij")
    wa, wb = np.meshgrid(ws, ws, indexing="ij")
    xi = a.ravel()
    eta = (b * (1.0 - a)).ravel()
    wt = (wa * wb * (1.0 - a)).ravel()
    v0, v1, v2 = (np.asarray(v, dtype=float) for v in verts)
    jac = abs((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1]))
    pts = v0 + np.outer(xi, v1 - v0) + np.outer(eta, v2 - v0)
    return pts, wt * jac


def _monomials(pts, exps):
    x, y = pts[:, 0], pts[:, 1]
    vals = np.stack([x**i * y**j for i, j in exps], axis=1)
    dx = np.stack([i * x ** max(i - 1, 0) * y**j if i else np.zeros_like(x) for i, j in exps], axis=1)
    dy = np.stack([j * x**i * y ** max(j - 1, 0) if j else np.zeros_like(x) for i, j in exps], axis=1)
    return vals, dx, dy


def local_p2(verts):
    """Nodes (6, 2) and a function giving (values, d/dx, d/dy) of the nodal P2 basis."""
    v = np.asarray(verts, dtype=float)
    nodes = np.vstack([v, [(v[1] + v[2]) / 2, (v[2] + v[0]) / 2, (v[0] + v[1]) / 2]])
    V, _, _ = _monomials(nodes, P2_EXPONENTS)
    coef = np.linalg.inv(V)  # column a holds the monomial coefficients of basis a

    def basis(pts):
        vals, dx, dy = _monomials(pts, P2_EXPONENTS)
        return vals @ coef, dx @ coef, dy @ coef

    return nodes, basis


def local_p1(verts):
    v = np.asarray(verts, dtype=float)
    exps = [(0, 0), (1, 0), (0, 1)]
    V, _, _ = _monomials(v, exps)
    coef = np.linalg.inv(V)

    def basis(pts):
        vals, dx, dy = _monomials(pts, exps)
        return vals @ coef, dx @ coef, dy @ coef

    return v, basis


class Numbering:
    """Global index lookup by coordinates."""

    def __init__(self, coords):
        self.index = {self.key(c): i for i, c in enumerate(np.asarray(coords))}

    @staticmethod
    def key(c):
        return (round(float(c[0]), 12), round(float(c[1]), 12))

    def __call__(self, c):
        return self.index[self.key(c)]


def dense_forms(mesh, p2_nodes, mu=1.0, K=np.eye(2), order=7):
    """Dense A (mu eps:eps), B (-(div v, q)), M (P1 mass), D (K grad.grad), P2 vector mass."""
    K = np.asarray(K, dtype=float)
    nv = len(p2_nodes)
    ns = len(mesh.vertices)
    p2num = Numbering(p2_nodes)
    p1num = Numbering(mesh.vertices)
    A = np.zeros((2 * nv, 2 * nv))
    B = np.zeros((ns, 2 * nv))
    M = np.zeros((ns, ns))
    D = np.zeros((ns, ns))
    M2 = np.zeros((2 * nv, 2 * nv))
    for tri in mesh.triangles:
        verts = mesh.vertices[tri]
        pts, w = duffy_rule(verts, order)
        nodes2, b2 = local_p2(verts)
        nodes1, b1 = local_p1(verts)
        N, Nx, Ny = b2(pts)
        L, Lx, Ly = b1(pts)
        g2 = [np.stack([Nx[:, a], Ny[:, a]], axis=1) for a in range(6)]
        idx2 = [p2num(c) for c in nodes2]
        idx1 = [p1num(c) for c in nodes1]
        for a in range(6):
            for c in range(2):
                # strain of N_a e_c as a (q, 2, 2) field
                ea = np.zeros((len(w), 2, 2))
                ea[:, c, :] += 0.5 * g2[a]
                ea[:, :, c] += 0.5 * g2[a]
                row = 2 * idx2[a] + c
                for i in range(3):
                    B[idx1[i], row] -= np.sum(w * g2[a][:, c] * L[:, i])
                for b in range(6):
                    for d in range(2):
                        eb = np.zeros((len(w), 2, 2))
                        eb[:, d, :] += 0.5 * g2[b]
                        eb[:, :, d] += 0.5 * g2[b]
                        col = 2 * idx2[b] + d
                        A[row, col] += mu * np.sum(w * np.einsum("qij,qij->q", ea, eb))
                        if c == d:
                            M2[row, col] += np.sum(w * N[:, a] * N[:, b])
        for i in range(3):
            gi = np.stack([Lx[:, i], Ly[:, i]], axis=1)
            for j in range(3):
                gj = np.stack([Lx[:, j], Ly[:, j]], axis=1)
                M[idx1[i], idx1[j]] += np.sum(w * L[:, i] * L[:, j])
                D[idx1[i], idx1[j]] += np.sum(w * np.einsum("qi,ij,qj->q", gi, K, gj))
    return dict(A=A, B=B, M=M, D=D, M2=M2)


def dense_vector_load(mesh, p2_nodes, f, t=0.0, order=7):
    num = Numbering(p2_nodes)
    out = np.zeros(2 * len(p2_nodes))
    for tri in mesh.triangles:
        verts = mesh.vertices[tri]
        pts, w = duffy_rule(verts, order)
        nodes2, b2 = local_p2(verts)
        N, _, _ = b2(pts)
        fx, fy = f(pts[:, 0], pts[:, 1], t)
        fx = np.broadcast_to(fx, w.shape)
        fy = np.broadcast_to(fy, w.shape)
        for a, c in enumerate(nodes2):
            k = num(c)
            out[2 * k] += np.sum(w * fx * N[:, a])
            out[2 * k + 1] += np.sum(w * fy * N[:, a])
    return out


def dense_scalar_load(mesh, phi, t=0.0, order=7):
    num = Numbering(mesh.vertices)
    out = np.zeros(len(mesh.vertices))
    for tri in mesh.triangles:
        verts = mesh.vertices[tri]
        pts, w = duffy_rule(verts, order)
        _, b1 = local_p1(verts)
        L, _, _ = b1(pts)
        vals = np.broadcast_to(phi(pts[:, 0], pts[:, 1], t), w.shape)
        for i, c in enumerate(verts):
            out[num(c)] += np.sum(w * vals * L[:, i])
    return out
