"""Energy balance, conservation laws, error norms and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fem import SpacePair, eval_basis, interpolate_vector
from .mesh import quadrature_rule

NOT_APPLICABLE = "NA"
UNDEFINED_RATE = "undefined"
NORM_DEGREE = 6


# ---------------------------------------------------------------------------
# Energy


@dataclass(frozen=True)
class EnergyOperators:
    """The assembled matrices an energy evaluation needs."""

    A: object  # mu (eps, eps) on X_h
    B: object  # -(div phi_j, psi_i)
    M: object  # P1 mass
    params: object

    @classmethod
    def from_solver(cls, solver) -> "EnergyOperators":
        return cls(solver.A, solver.B, solver.M, solver.params)


@dataclass
class EnergyReport:
    J: np.ndarray  # J at coarse indices 0..Nc
    S: np.ndarray  # cumulative dissipation/work after windows 0..Nc-1
    residual: np.ndarray  # |J^{l+1} + S^l - J^0| / scale, l = 0..Nc-1
    scale: np.ndarray


def _quad(v, M, w=None):
    return float(v @ (M @ (v if w is None else w)))


def energy_J(ops: EnergyOperators, u, xi, eta, load_dot_u=0.0) -> float:
    """1/2 [mu |eps(u)|^2 + k2 |eta|^2 + k3 |xi|^2] - (f, u) - <f1, u>.

    ``eta`` is the diffusion variable that drove the Stokes solve for this
    displacement (index (n - 1 + theta) m); ``load_dot_u`` the pairing of the
    vector load with ``u``.
    """
    prm = ops.params
    return 0.5 * (_quad(u, ops.A) + prm.k2 * _quad(eta, ops.M) + prm.k3 * _quad(xi, ops.M)) - load_dot_u


def initial_residual(ops: EnergyOperators, traj) -> np.ndarray:
    """How far the projected initial data is from satisfying the xi equation."""
    prm = ops.params
    return -(ops.B @ traj.u[0]) + prm.k3 * (ops.M @ traj.xi[0]) - prm.k1 * (ops.M @ traj.eta_fine[0])


def _fine_terms(ops, traj, window):
    """Dissipation and source work of the m fine steps of one window."""
    m, dt, k2 = traj.grid.m, traj.grid.dt, ops.params.k2
    eta = traj.eta_fine[window * m : (window + 1) * m + 1]
    jumps = np.diff(eta, axis=0)
    jump_energy = sum(_quad(d, ops.M) for d in jumps)
    sl = slice(window * m, (window + 1) * m)
    return 0.5 * k2 * jump_energy + dt * float(np.sum(traj.flux_work[sl] - traj.source_work[sl]))


def energy_S_increment(ops: EnergyOperators, traj, window: int, r0=None):
    """Contribution of coarse window ``window`` to the cumulative S; returns (value, abs size).

    theta = 1 balances each window's fine steps against its own Stokes solve.
    theta = 0 Stokes solves see eta one window late, so the fine work of window
    n - 1 is booked in window n together with a lagged cross term.
    """
    prm = ops.params
    theta, m = traj.grid.theta, traj.grid.m
    n = window
    du = traj.u[n + 1] - traj.u[n]
    dxi = traj.xi[n + 1] - traj.xi[n]
    terms = [
        0.5 * _quad(du, ops.A),
        0.5 * prm.k3 * _quad(dxi, ops.M),
        traj.load_cross[n] - traj.load_work[n],
    ]
    if theta == 1:
        terms.append(_fine_terms(ops, traj, n))
    else:
        if n >= 1:
            terms.append(_fine_terms(ops, traj, n - 1))
        eta_now = traj.eta_fine[n * m]
        eta_before = traj.eta_fine[max(n - 1, 0) * m]
        terms.append(-prm.k1 * _quad(eta_now - eta_before, ops.M, dxi))
    if n == 0:
        if r0 is None:
            r0 = initial_residual(ops, traj)
        terms.append(float(r0 @ traj.xi[1]))
    return float(sum(terms)), float(sum(abs(t) for t in terms))


def _eta_for_coarse(traj, j):
    """The eta paired with the coarse state j in J (index (j - 1 + theta) m)."""
    if j == 0:
        return traj.eta_fine[0]
    return traj.eta_fine[(j - 1 + traj.grid.theta) * traj.grid.m]


def energy_report(ops: EnergyOperators, traj) -> EnergyReport:
    """Discrete energy balance J^{l+1} + S^l = J^0 along a trajectory.

    Holds exactly (up to round-off) for pure-Neumann configurations. For
    theta = 0 the last window's fine work enters S only through the next
    window, so J uses the lagged eta consistently.
    """
    nc = traj.grid.n_coarse
    J = np.array([energy_J(ops, traj.u[j], traj.xi[j], _eta_for_coarse(traj, j), traj.load_work[j]) for j in range(nc + 1)])
    r0 = initial_residual(ops, traj)
    inc = [energy_S_increment(ops, traj, n, r0) for n in range(nc)]
    S = np.cumsum([v for v, _ in inc])
    size = np.cumsum([a for _, a in inc])
    scale = np.maximum.reduce([np.full(nc, abs(J[0])), np.abs(J[1:]), size, np.full(nc, 1e-300)])
    residual = np.abs(J[1:] + S - J[0]) / scale
    return EnergyReport(J, S, residual, scale)


# ---------------------------------------------------------------------------
# Conservation


@dataclass
class ConservationReport:
    eta: np.ndarray  # (eta^{jm}, 1) - C_eta(t_{jm}) at coarse indices
    xi: np.ndarray  # (xi^{jm}, 1) - C_xi, informational (nan at j = 0)
    u: np.ndarray  # <u . n, 1> - C_u, informational (nan at j = 0)
    C_eta: np.ndarray


def conservation_residuals(traj, case, spaces: SpacePair, ops: EnergyOperators, vector_load=None):
    """Residuals of the three mean-value identities at every coarse index.

    Returns ``NOT_APPLICABLE`` when any Dirichlet data is present, since the
    identities rely on testing with constants and with the position field.
    """
    if not case.bc.pure_neumann:
        return NOT_APPLICABLE
    prm = ops.params
    m, nc = traj.grid.m, traj.grid.n_coarse
    ones = np.ones(spaces.n_scalar)
    mass_ones = ops.M @ ones
    flow = np.concatenate([[0.0], np.cumsum(traj.source_total * traj.grid.dt)])
    C_eta_fine = float(mass_ones @ traj.eta_fine[0]) + flow
    C_eta = C_eta_fine[::m]
    res_eta = np.array([mass_ones @ traj.eta_fine[j * m] for j in range(nc + 1)]) - C_eta

    position = interpolate_vector(spaces, lambda x, y, t: (x, y))
    # the load pairs with the position field through the rigid-motion constraint
    # multipliers as well, so the identities are exact only for self-balanced loads
    res_xi = np.full(nc + 1, np.nan)
    res_u = np.full(nc + 1, np.nan)
    divergence = -(ops.B.T @ ones)  # (div v, 1) as a row acting on X_h
    for j in range(1, nc + 1):
        c_eta = C_eta_fine[(j - 1 + traj.grid.theta) * m]
        load_x = 0.0 if vector_load is None else float(vector_load(traj.times[j]) @ position)
        c_xi = (prm.mu * prm.k1 * c_eta - load_x) / (2 + prm.mu * prm.k3)
        c_u = prm.k1 * c_eta - prm.k3 * c_xi
        res_xi[j] = mass_ones @ traj.xi[j] - c_xi
        res_u[j] = divergence @ traj.u[j] - c_u
    return ConservationReport(res_eta, res_xi, res_u, C_eta)


def dt_m_difference(eta_coarse, dt, m):
    """Coarse difference quotients (eta^{nm} - eta^{nm-m}) / (m dt), n = 1..N."""
    eta_coarse = np.asarray(eta_coarse)
    return np.diff(eta_coarse, axis=0) / (m * dt)


# ---------------------------------------------------------------------------
# Error norms


@dataclass(frozen=True)
class _NormQuadrature:
    x: np.ndarray
    y: np.ndarray
    wdet: np.ndarray
    p2: np.ndarray
    g2: np.ndarray
    p1: np.ndarray
    g1: np.ndarray


_NORM_CACHE: dict = {}


def _norm_quadrature(spaces: SpacePair) -> _NormQuadrature:
    key = id(spaces)
    hit = _NORM_CACHE.get(key)
    if hit is not None and hit[0] is spaces:
        return hit[1]
    rule = quadrature_rule(NORM_DEGREE)
    p2, dp2, p1, dp1 = eval_basis(rule.points)
    det, inv_t, _ = spaces.geometry
    xq = spaces.map_points(rule.points)
    data = _NormQuadrature(
        xq[..., 0],
        xq[..., 1],
        det[:, None] * rule.weights[None, :],
        p2,
        np.einsum("tij,qaj->tqai", inv_t, dp2),
        p1,
        np.einsum("tij,qaj->tqai", inv_t, dp1),
    )
    _NORM_CACHE.clear()
    _NORM_CACHE[key] = (spaces, data)
    return data


def vector_error(spaces: SpacePair, coeffs, exact=None, exact_grad=None, t=0.0):
    """(L2 error, H1 seminorm error) of a P2 field against an exact field.

    With ``exact=None`` the norms of the field itself are returned.
    """
    q = _norm_quadrature(spaces)
    cells = spaces.p2_cells
    cx, cy = coeffs[2 * cells], coeffs[2 * cells + 1]
    vals = np.stack([np.einsum("qa,ta->tq", q.p2, cx), np.einsum("qa,ta->tq", q.p2, cy)])
    grads = np.stack([np.einsum("tqad,ta->dtq", q.g2, cx), np.einsum("tqad,ta->dtq", q.g2, cy)])
    if exact is not None:
        ex = exact(q.x, q.y, t)
        vals = vals - np.stack([np.broadcast_to(e, q.x.shape) for e in ex])
    if exact_grad is not None:
        J = exact_grad(q.x, q.y, t)
        grads = grads - np.array([[np.broadcast_to(J[c][d], q.x.shape) for d in range(2)] for c in range(2)])
    l2 = math.sqrt(max(float(np.sum(q.wdet * np.sum(vals**2, axis=0))), 0.0))
    h1 = math.sqrt(max(float(np.sum(q.wdet * np.sum(grads**2, axis=(0, 1)))), 0.0))
    return l2, h1


def scalar_error(spaces: SpacePair, coeffs, exact=None, exact_grad=None, t=0.0, weight=None):
    """(L2 error, gradient error) of a P1 field; ``weight`` is a 2x2 tensor for the gradient."""
    q = _norm_quadrature(spaces)
    c = coeffs[spaces.mesh.triangles]
    vals = np.einsum("qa,ta->tq", q.p1, c)
    grads = np.einsum("tqad,ta->dtq", q.g1, c)
    if exact is not None:
        vals = vals - np.broadcast_to(exact(q.x, q.y, t), q.x.shape)
    if exact_grad is not None:
        gx, gy = exact_grad(q.x, q.y, t)
        grads = grads - np.stack([np.broadcast_to(gx, q.x.shape), np.broadcast_to(gy, q.x.shape)])
    W = np.eye(2) if weight is None else np.asarray(weight, dtype=float)
    l2 = math.sqrt(max(float(np.sum(q.wdet * vals**2)), 0.0))
    g = math.sqrt(max(float(np.sum(q.wdet * np.einsum("itq,ij,jtq->tq", grads, W, grads))), 0.0))
    return l2, g


NORMS = ("Linf_L2", "Linf_H1", "L2_L2", "L2_H1")


def error_norms(traj, spaces: SpacePair, exact, norm: str, field: str = "u", params=None):
    """Space-time error of the displacement or the pressure.

    L-infinity norms sample the coarse indices. For the pressure the
    L2-in-time norms run over every fine index with weight dt and measure
    the gradient in the (K / mu_f) metric when ``params`` is given. For the
    displacement the L2-in-time norms use the coarse indices with weight m dt.
    H1 for the displacement is the full norm (value plus gradient).
    """
    if norm not in NORMS:
        raise InvalidArgumentError(f"unknown norm {norm!r}; choose from {NORMS}")
    grid = traj.grid
    if field == "u":
        errs = [vector_error(spaces, traj.u[j], exact.u, exact.u_grad, t) for j, t in enumerate(traj.times)]
        l2 = np.array([e[0] for e in errs])
        h1 = np.sqrt(l2**2 + np.array([e[1] for e in errs]) ** 2)
        if norm.startswith("Linf"):
            return float((l2 if norm.endswith("L2") else h1).max())
        series, weight = (l2 if norm.endswith("L2") else h1)[1:], grid.m * grid.dt
        return math.sqrt(weight * float(np.sum(series**2)))
    if field != "p":
        raise InvalidArgumentError("field must be 'u' or 'p'")
    W = None if params is None else params.K_tensor / params.mu_f
    if norm.startswith("Linf"):
        errs = [scalar_error(spaces, traj.p[j], exact.p, exact.p_grad, t, W) for j, t in enumerate(traj.times)]
        l2 = np.array([e[0] for e in errs])
        if norm.endswith("L2"):
            return float(l2.max())
        return float(np.sqrt(l2**2 + np.array([e[1] for e in errs]) ** 2).max())
    times = traj.fine_times
    errs = [scalar_error(spaces, traj.p_fine[k], exact.p, exact.p_grad, times[k], W) for k in range(1, grid.n_fine + 1)]
    idx = 0 if norm.endswith("L2") else 1
    return math.sqrt(grid.dt * sum(e[idx] ** 2 for e in errs))


def convergence_rates(errors, hs):
    """Pairwise log(e_i / e_{i+1}) / log(h_i / h_{i+1}); ``UNDEFINED_RATE`` where not defined."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise InvalidArgumentError("need at least two (error, h) pairs of equal length")
    rates = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 <= 0 or e1 <= 0 or h0 <= 0 or h1 <= 0 or h0 == h1 or not all(map(math.isfinite, (e0, e1))):
            rates.append(UNDEFINED_RATE)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def reference_errors(traj, spaces: SpacePair, ref, ref_spaces: SpacePair, params=None) -> dict:
    """Errors against a finer reference run on a nested mesh with the same fine step.

    Coarse-run fields are transferred exactly onto the reference mesh. The
    reference must store every fine index at its coarse level (m = 1), or at
    least every coarse time of ``traj``.
    """
    from .fem import prolong_scalar, prolong_vector

    if not math.isclose(traj.grid.dt, ref.grid.dt, rel_tol=1e-12):
        raise InvalidArgumentError("reference run must use the same fine step")
    stride = traj.grid.m // ref.grid.m if traj.grid.m % ref.grid.m == 0 else None
    if stride is None or ref.grid.n_fine < traj.grid.n_fine:
        raise InvalidArgumentError("reference run does not cover the coarse times of the trajectory")
    W = None if params is None else params.K_tensor / params.mu_f
    u_l2, u_h1, p_l2 = [], [], []
    for j in range(len(traj.times)):
        du = prolong_vector(spaces, traj.u[j], ref_spaces) - ref.u[j * stride]
        a, b = vector_error(ref_spaces, du)
        u_l2.append(a)
        u_h1.append(math.hypot(a, b))
        dp = prolong_scalar(spaces, traj.p[j], ref_spaces) - ref.p[j * stride]
        p_l2.append(scalar_error(ref_spaces, dp)[0])
    grad_sq = 0.0
    fine_per_ref = ref.grid.m
    for k in range(1, traj.grid.n_fine + 1):
        if k % fine_per_ref:
            continue
        dp = prolong_scalar(spaces, traj.p_fine[k], ref_spaces) - ref.p_fine[k]
        grad_sq += scalar_error(ref_spaces, dp, weight=W)[1] ** 2
    return {
        "u_Linf_L2": max(u_l2),
        "u_Linf_H1": max(u_h1),
        "p_Linf_L2": max(p_l2),
        "p_L2_H1": math.sqrt(ref.grid.dt * fine_per_ref * grad_sq),
    }
