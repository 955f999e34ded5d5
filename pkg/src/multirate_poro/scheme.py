"""Multirate time stepping for the reformulated poroelasticity system.

Every coarse window n covers m fine steps of size dt:

1. generalized Stokes solve for (u, xi) at t_{(n+1)m}, driven by
   k1 * eta at index (n+theta)m;
2. m backward-Euler diffusion solves for eta with xi frozen;
3. recovery of the pressure p = k1 xi + k2 eta and of q = k1 eta - k3 xi.

theta = 1 couples steps 1 and 2 implicitly; this is resolved by a
fixed-point loop over the window.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (
    DirichletElimination,
    assemble_a,
    assemble_b,
    assemble_c_mass,
    assemble_diffusion,
    gravity_load,
    rm_constraints,
    scalar_boundary_load,
    scalar_volume_load,
    vector_boundary_load,
    vector_volume_load,
)
from .errors import InvalidArgumentError, IterationFailureError, SingularSystemError, StepError
from .fem import SpacePair, interpolate_vector
from .linsolve import Factorization
from .projections import project_Qh, project_Rh

log = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAXITER = 50
INF_SUP_SURROGATE = 0.1


class StabilityAdvisory(UserWarning):
    """theta = 0 run with a fine step above the h^2-type stability bound."""


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    m: int
    T: float
    theta: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError("m must be a positive integer")
        if self.theta not in (0, 1):
            raise InvalidArgumentError("theta must be 0 or 1")
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")
        ratio = self.T / (self.m * self.dt)
        if abs(ratio - round(ratio)) > 1e-10 * max(1.0, ratio) or round(ratio) < 1:
            raise InvalidArgumentError(f"T / (m dt) = {ratio!r} is not a positive integer")

    @property
    def n_coarse(self) -> int:
        return int(round(self.T / (self.m * self.dt)))

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.m


def stability_bound(params, h: float, m: int, beta=INF_SUP_SURROGATE) -> float:
    """Largest theta = 0 fine step mu_f beta^2 h^2 / (mu k1^2 K m^2)."""
    return params.mu_f * beta**2 * h**2 / (params.mu * params.k1**2 * params.K_max * m**2)


@dataclass
class State:
    """Coarse-level fields after a window plus the window's eta history."""

    n: int
    u: np.ndarray
    xi: np.ndarray
    eta_history: np.ndarray  # (m + 1, n_scalar): eta^{nm}, ..., eta^{(n+1)m}
    p: np.ndarray
    q: np.ndarray
    iterations: int = 0

    @property
    def eta(self) -> np.ndarray:
        return self.eta_history[-1]


@dataclass
class Trajectory:
    grid: TimeGrid
    times: np.ndarray  # coarse times, (Nc + 1,)
    u: np.ndarray  # (Nc + 1, n_vector)
    xi: np.ndarray  # (Nc + 1, n_scalar)
    p: np.ndarray  # coarse pressure (Nc + 1, n_scalar)
    q: np.ndarray
    eta_fine: np.ndarray  # (Nf + 1, n_scalar)
    p_fine: np.ndarray  # (Nf + 1, n_scalar)
    flux_work: np.ndarray  # (Nf,) (K/mu_f)(grad p - rho g, grad p)
    source_work: np.ndarray  # (Nf,) (phi, p) + <phi_1, p>
    source_total: np.ndarray  # (Nf,) (phi, 1) + <phi_1, 1>
    load_work: np.ndarray  # (Nc + 1,) F_n . u_n
    load_cross: np.ndarray  # (Nc,) F_{n+1} . u_n
    iterations: np.ndarray  # fixed-point sweeps per window
    stokes_solves: int = 0
    diffusion_solves: int = 0
    wall_setup: float = 0.0
    wall_loop: float = 0.0
    advisory: bool = False

    @property
    def eta(self) -> np.ndarray:
        return self.eta_fine[:: self.grid.m]

    @property
    def fine_times(self) -> np.ndarray:
        return np.arange(self.grid.n_fine + 1) * self.grid.dt


class MultirateSolver:
    """Holds the time-independent operators and factorizations for one case/mesh/grid.

    Pressure Dirichlet data fixes eta = (p_D - k1 xi) / k2 at boundary vertices.
    With ``implicit_pressure_bc`` (default) the Stokes solve uses that relation
    at the new coarse time for those vertices instead of the lagged eta, which
    removes an explicit boundary feedback loop whose gain is of order
    alpha^2 / (lambda c0) when the normal displacement is prescribed all
    around. ``False`` feeds the lagged eta everywhere.

    ``pressure_update="fine"`` defines the pressure at every fine step as
    k1 xi^{(n+1)m} + k2 eta^{nm+k}; ``"lagged"`` reproduces the coarse update
    k1 xi^{(n+1)m} + k2 eta^{(n+theta)m} for the stored coarse pressure.
    """

    def __init__(self, case, spaces: SpacePair, grid: TimeGrid, pressure_update="fine", implicit_pressure_bc=True):
        if pressure_update not in ("fine", "lagged"):
            raise InvalidArgumentError("pressure_update must be 'fine' or 'lagged'")
        t0 = time.perf_counter()
        self.case = case
        self.params = params = case.params
        self.spaces = spaces
        self.grid = grid
        self.bc = case.bc
        self.pressure_update = pressure_update
        self.stokes_solves = 0
        self.diffusion_solves = 0

        self.A = assemble_a(spaces, params.mu)
        self.B = assemble_b(spaces)
        self.M = assemble_c_mass(spaces, 1.0)
        self.C = params.k3 * self.M
        self.D = assemble_diffusion(spaces, params.K, params.mu_f)
        self.gravity = gravity_load(spaces, params.K, params.mu_f, params.rho_f, params.g)

        nu, nx = spaces.n_vector, spaces.n_scalar
        self.u_dofs, _ = self.bc.vector_dirichlet(spaces, 0.0)
        self.p_dofs, _ = self.bc.scalar_dirichlet(spaces, 0.0)
        self.G = None if self.bc.has_displacement_dirichlet else rm_constraints(spaces)
        nc = 0 if self.G is None else 3
        self.implicit_pressure_bc = bool(implicit_pressure_bc and self.p_dofs.size)
        xi_block = -self.C
        if self.implicit_pressure_bc:
            select = np.zeros(nx)
            select[self.p_dofs] = 1.0
            self._boundary_mass = (self.M @ sp.diags(select)).tocsr()
            xi_block = xi_block - (params.k1**2 / params.k2) * self._boundary_mass
        blocks = [[self.A, self.B.T], [self.B, xi_block]]
        if nc:
            Gs = sp.csr_matrix(self.G)
            blocks[0].append(Gs.T)
            blocks[1].append(None)
            blocks.append([Gs, None, sp.csr_matrix((nc, nc))])
        self._stokes = DirichletElimination(sp.bmat(blocks, format="csr"), self.u_dofs)
        self._sizes = (nu, nx, nc)
        try:
            self._stokes_lu = Factorization(self._stokes.matrix, tol=1e-10)
        except SingularSystemError as exc:
            raise SingularSystemError(f"generalized Stokes system is singular (ill-posed configuration): {exc}") from exc

        self._diff = DirichletElimination(self.M / grid.dt + params.k2 * self.D, self.p_dofs)
        self._diff_lu = Factorization(self._diff.matrix, tol=1e-12)

        self.advisory = False
        if grid.theta == 0:
            bound = stability_bound(params, spaces.mesh.h, grid.m)
            if grid.dt > bound:
                self.advisory = True
                msg = f"theta=0 with dt={grid.dt:g} above stability bound {bound:.3e} (h={spaces.mesh.h:.4g}, m={grid.m})"
                log.warning(msg)
                warnings.warn(msg, StabilityAdvisory, stacklevel=2)
        self.wall_setup = time.perf_counter() - t0

    # -- loads -------------------------------------------------------------

    def vector_load(self, t):
        return vector_volume_load(self.spaces, self.case.f, t) + vector_boundary_load(self.spaces, self.bc, t)

    def scalar_load(self, t):
        """(phi, psi) + <phi_1, psi>, without the gravity term."""
        return scalar_volume_load(self.spaces, self.case.phi, t) + scalar_boundary_load(self.spaces, self.bc, t)

    # -- steps -------------------------------------------------------------

    def init_state(self) -> State:
        case, spaces, prm = self.case, self.spaces, self.params
        if case.u0_grad is None:
            u = np.zeros(spaces.n_vector)
        elif self.bc.has_displacement_dirichlet:
            u0 = interpolate_vector(spaces, lambda x, y, t: case.u0(x, y), 0.0)
            u = project_Rh(spaces, case.u0_grad, "u0", dirichlet=(self.u_dofs, u0[self.u_dofs])).coeffs
        else:
            u = project_Rh(spaces, case.u0_grad, "u0", constraints=self.G).coeffs
        p = np.zeros(spaces.n_scalar) if case.p0 is None else project_Qh(spaces, case.p0, "p0").coeffs
        q = np.zeros(spaces.n_scalar) if case.q0 is None else project_Qh(spaces, case.q0, "q0").coeffs
        xi = prm.alpha * p - prm.lam * q
        eta = prm.c0 * p + prm.alpha * q
        return State(0, u, xi, eta[None, :].copy(), p, q)

    def coarse_step_stokes(self, eta_input, t):
        """Solve for (u, xi) at time t given the eta that drives the xi equation."""
        nu, nx, nc = self._sizes
        prm = self.params
        F = self.vector_load(t)
        if self.implicit_pressure_bc:
            eta_input = eta_input.copy()
            eta_input[self.p_dofs] = 0.0
            p_full = np.zeros(nx)
            p_full[self.p_dofs] = self.bc.scalar_dirichlet(self.spaces, t)[1]
            H = -prm.k1 * (self.M @ eta_input) - (prm.k1 / prm.k2) * (self._boundary_mass @ p_full)
        else:
            H = -prm.k1 * (self.M @ eta_input)
        rhs = np.concatenate([F, H, np.zeros(nc)])
        _, u_vals = self.bc.vector_dirichlet(self.spaces, t)
        sol = self._stokes_lu.solve(self._stokes.rhs(rhs, u_vals))
        self.stokes_solves += 1
        return sol[:nu], sol[nu : nu + nx]

    def fine_step_diffusion(self, eta_prev, xi_new, t, load=None):
        """One backward-Euler step of the eta diffusion with xi frozen."""
        prm = self.params
        if load is None:
            load = self.scalar_load(t) + self.gravity
        rhs = self.M @ eta_prev / self.grid.dt + load - prm.k1 * (self.D @ xi_new)
        _, p_vals = self.bc.scalar_dirichlet(self.spaces, t)
        eta_vals = (p_vals - prm.k1 * xi_new[self.p_dofs]) / prm.k2
        eta = self._diff_lu.solve(self._diff.rhs(rhs, eta_vals))
        self.diffusion_solves += 1
        return eta

    def _fine_sweep(self, eta_start, xi_new, t_start, loads):
        hist = np.empty((self.grid.m + 1, eta_start.size))
        hist[0] = eta_start
        for k in range(1, self.grid.m + 1):
            hist[k] = self.fine_step_diffusion(hist[k - 1], xi_new, t_start + k * self.grid.dt, loads[k - 1] + self.gravity)
        return hist

    def update_pq(self, xi_new, eta_hist, theta):
        """Fine pressures for k = 1..m and the coarse (p, q) at the window end."""
        prm = self.params
        p_fine = prm.k1 * xi_new[None, :] + prm.k2 * eta_hist[1:]
        eta_lag = eta_hist[-1] if theta == 1 else eta_hist[0]
        if self.pressure_update == "fine":
            p = p_fine[-1]
        else:
            p = prm.k1 * xi_new + prm.k2 * eta_lag
        q = prm.k1 * eta_hist[-1] - prm.k3 * xi_new
        return p_fine, p, q

    def advance_coarse(self, state: State):
        """Advance one coarse window; returns (new State, fine pressures, fine loads)."""
        grid = self.grid
        m, dt = grid.m, grid.dt
        t_n = state.n * m * dt
        t_next = (state.n + 1) * m * dt
        eta_n = state.eta
        loads = [self.scalar_load(t_n + k * dt) for k in range(1, m + 1)]
        if grid.theta == 0:
            u, xi = self.coarse_step_stokes(eta_n, t_next)
            hist = self._fine_sweep(eta_n, xi, t_n, loads)
            sweeps = 1
        else:
            guess = eta_n
            history = []
            for sweeps in range(1, FIXED_POINT_MAXITER + 1):
                u, xi = self.coarse_step_stokes(guess, t_next)
                hist = self._fine_sweep(eta_n, xi, t_n, loads)
                change = np.sqrt(max((hist[-1] - guess) @ (self.M @ (hist[-1] - guess)), 0.0))
                size = np.sqrt(max(hist[-1] @ (self.M @ hist[-1]), 0.0))
                history.append(change)
                if change <= FIXED_POINT_TOL * max(1.0, size):
                    break
                guess = hist[-1]
            else:
                raise IterationFailureError(
                    f"fixed point did not converge in {FIXED_POINT_MAXITER} iterations (last change {history[-1]:.3e})",
                    FIXED_POINT_MAXITER,
                    history,
                )
        p_fine, p, q = self.update_pq(xi, hist, grid.theta)
        return State(state.n + 1, u, xi, hist, p, q, sweeps), p_fine, loads

    def run(self, state: State | None = None) -> Trajectory:
        grid = self.grid
        nc, nf, m = grid.n_coarse, grid.n_fine, grid.m
        ns, nv = self.spaces.n_scalar, self.spaces.n_vector
        if state is None:
            state = self.init_state()
        self.stokes_solves = self.diffusion_solves = 0

        U = np.empty((nc + 1, nv))
        X = np.empty((nc + 1, ns))
        P = np.empty((nc + 1, ns))
        Q = np.empty((nc + 1, ns))
        eta_f = np.empty((nf + 1, ns))
        p_f = np.empty((nf + 1, ns))
        flux = np.empty(nf)
        src = np.empty(nf)
        src_total = np.empty(nf)
        load_work = np.empty(nc + 1)
        load_cross = np.empty(nc)
        iters = np.zeros(nc, dtype=int)

        U[0], X[0], P[0], Q[0] = state.u, state.xi, state.p, state.q
        eta_f[0] = state.eta
        p_f[0] = state.p
        F_prev = self.vector_load(0.0)
        load_work[0] = F_prev @ state.u

        t0 = time.perf_counter()
        for n in range(nc):
            try:
                new, p_fine, loads = self.advance_coarse(state)
            except (SingularSystemError, IterationFailureError) as exc:
                raise StepError(n, exc) from exc
            sl = slice(n * m + 1, (n + 1) * m + 1)
            eta_f[sl] = new.eta_history[1:]
            p_f[sl] = p_fine
            for k in range(m):
                pk = p_fine[k]
                flux[n * m + k] = pk @ (self.D @ pk) - self.gravity @ pk
                src[n * m + k] = loads[k] @ pk
                src_total[n * m + k] = loads[k].sum()
            F_next = self.vector_load((n + 1) * m * grid.dt)
            load_cross[n] = F_next @ state.u
            load_work[n + 1] = F_next @ new.u
            U[n + 1], X[n + 1], P[n + 1], Q[n + 1] = new.u, new.xi, new.p, new.q
            iters[n] = new.iterations
            state = new
        wall = time.perf_counter() - t0

        return Trajectory(
            grid=grid,
            times=np.arange(nc + 1) * m * grid.dt,
            u=U,
            xi=X,
            p=P,
            q=Q,
            eta_fine=eta_f,
            p_fine=p_f,
            flux_work=flux,
            source_work=src,
            source_total=src_total,
            load_work=load_work,
            load_cross=load_cross,
            iterations=iters,
            stokes_solves=self.stokes_solves,
            diffusion_solves=self.diffusion_solves,
            wall_setup=self.wall_setup,
            wall_loop=wall,
            advisory=self.advisory,
        )


def run(case, grid: TimeGrid, spaces: SpacePair, params=None, **kw) -> Trajectory:
    """Build a solver for ``case`` and integrate to ``grid.T``."""
    if params is not None and params is not case.params:
        case = case.with_params(params)
    return MultirateSolver(case, spaces, grid, **kw).run()
