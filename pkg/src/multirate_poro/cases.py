"""Benchmark problems: manufactured solution, Barry-Mercer, footing, and a pure-Neumann check."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import BoundaryCondition, Dirichlet, Neumann
from .errors import InvalidArgumentError
from .mesh import GAMMA1, GAMMA2, GAMMA3, GAMMA4, SEGMENT_NORMALS
from .model import PhysicalParams
from .scheme import TimeGrid


@dataclass(frozen=True)
class ExactSolution:
    u: Callable  # (x, y, t) -> (ux, uy)
    u_grad: Callable  # (x, y, t) -> J[c][d] = d u_c / d x_d
    p: Callable  # (x, y, t) -> p
    p_grad: Callable  # (x, y, t) -> (px, py)


@dataclass(frozen=True)
class CaseDefinition:
    name: str
    params: PhysicalParams
    bc: BoundaryCondition
    f: Callable | None = None  # (x, y, t) -> (fx, fy)
    phi: Callable | None = None  # (x, y, t) -> phi
    u0: Callable | None = None  # (x, y) -> (ux, uy); None means zero
    u0_grad: Callable | None = None
    p0: Callable | None = None  # (x, y) -> p
    q0: Callable | None = None  # (x, y) -> div u0
    exact: ExactSolution | None = None
    grid: TimeGrid | None = None  # desk-scale preset
    published_grid: TimeGrid | None = None  # time step used in the published runs
    notes: str = ""
    options: dict = field(default_factory=dict)

    def with_params(self, params: PhysicalParams) -> "CaseDefinition":
        return replace(self, params=params)

    def with_grid(self, grid: TimeGrid) -> "CaseDefinition":
        return replace(self, grid=grid)


def _const(value):
    def fn(x, y, t):
        return np.full(np.shape(x), float(value))

    return fn


def test1_manufactured() -> CaseDefinition:
    """Manufactured solution u = t/2 (x^2, y^2), p = sin(x + y) e^t."""
    prm = PhysicalParams(E=1e-4, nu=0.4, c0=1e-5, alpha=0.83, K=1e-5, mu_f=1.0)
    lam, mu, alpha, c0, kf = prm.lam, prm.mu, prm.alpha, prm.c0, prm.K / prm.mu_f

    def u(x, y, t):
        return 0.5 * t * x**2, 0.5 * t * y**2

    def u_grad(x, y, t):
        z = np.zeros_like(np.asarray(x, dtype=float) + y)
        return [[t * x + z, z], [z, t * y + z]]

    def p(x, y, t):
        return np.sin(x + y) * np.exp(t)

    def p_grad(x, y, t):
        g = np.cos(x + y) * np.exp(t)
        return g, g

    def f(x, y, t):
        val = -(lam + mu) * t + alpha * np.cos(x + y) * np.exp(t)
        return val, val

    def phi(x, y, t):
        return (c0 + 2 * kf) * np.sin(x + y) * np.exp(t) + alpha * (x + y)

    def traction(tag, comp):
        n = SEGMENT_NORMALS[tag]

        def fn(x, y, t):
            coord = x if comp == 0 else y
            return (mu * t * coord + lam * t * (x + y) - alpha * np.sin(x + y) * np.exp(t)) * n[comp]

        return fn

    conds = {}
    for tag in (GAMMA1, GAMMA2, GAMMA3, GAMMA4):
        conds[(tag, "p")] = Dirichlet(p)
    for tag in (GAMMA2, GAMMA4):
        conds[(tag, "ux")] = Dirichlet(lambda x, y, t: 0.5 * t * x**2)
        conds[(tag, "uy")] = Neumann(traction(tag, 1))
    for tag in (GAMMA1, GAMMA3):
        conds[(tag, "uy")] = Dirichlet(lambda x, y, t: 0.5 * t * y**2)
        conds[(tag, "ux")] = Neumann(traction(tag, 0))

    return CaseDefinition(
        name="test1",
        params=prm,
        bc=BoundaryCondition(conds),
        f=f,
        phi=phi,
        p0=lambda x, y: np.sin(x + y),
        q0=lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + y),
        exact=ExactSolution(u, u_grad, p, p_grad),
        grid=TimeGrid(dt=1e-4, m=5, T=0.01),
        published_grid=TimeGrid(dt=1e-6, m=5, T=1.0),
        notes="manufactured solution with mixed displacement data and pressure Dirichlet data",
    )


def barry_mercer_pressure(x, y, t):
    """sin t on 0.2 <= x < 0.8, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.2) & (x < 0.8)
    return np.where(inside, np.sin(t), 0.0) + 0.0 * np.asarray(y, dtype=float)


def test2_barry_mercer() -> CaseDefinition:
    prm = PhysicalParams(E=3.5e-2, nu=0.11, c0=0.9, alpha=0.31, K=3e-6, mu_f=1.0)
    alpha = prm.alpha
    zero = _const(0.0)
    conds = {(GAMMA1, "p"): Dirichlet(barry_mercer_pressure)}
    for tag in (GAMMA2, GAMMA3, GAMMA4):
        conds[(tag, "p")] = Dirichlet(zero)
    boundary_p = {GAMMA1: barry_mercer_pressure, GAMMA2: zero, GAMMA3: zero, GAMMA4: zero}
    for tag in (GAMMA2, GAMMA4):
        conds[(tag, "ux")] = Dirichlet(zero)
        pb = boundary_p[tag]
        conds[(tag, "uy")] = Neumann(lambda x, y, t, pb=pb: alpha * pb(x, y, t))
    for tag in (GAMMA1, GAMMA3):
        conds[(tag, "uy")] = Dirichlet(zero)
        conds[(tag, "ux")] = Neumann(zero)
    return CaseDefinition(
        name="test2",
        params=prm,
        bc=BoundaryCondition(conds),
        grid=TimeGrid(dt=1e-3, m=5, T=0.1),
        published_grid=TimeGrid(dt=1e-5, m=5, T=1.0),
        notes="Barry-Mercer: oscillating pressure on part of the bottom edge",
    )


def test3_footing(clamped: int = GAMMA1) -> CaseDefinition:
    """Footing load: downward unit traction on the top edge, no-flux pressure.

    ``clamped`` selects the segment with u = 0.  The default clamps the bottom
    edge; clamping the loaded top edge gives the identically zero solution.
    """
    if clamped not in (GAMMA1, GAMMA2, GAMMA3, GAMMA4):
        raise InvalidArgumentError(f"unknown clamped segment {clamped!r}")
    prm = PhysicalParams(E=1e5, nu=0.4, c0=0.01, alpha=0.93, K=0.1, mu_f=1.0)
    zero = _const(0.0)
    conds = {}
    for tag in (GAMMA1, GAMMA2, GAMMA3, GAMMA4):
        if tag == clamped:
            conds[(tag, "ux")] = Dirichlet(zero)
            conds[(tag, "uy")] = Dirichlet(zero)
        else:
            conds[(tag, "ux")] = Neumann(zero)
            conds[(tag, "uy")] = Neumann(_const(-1.0) if tag == GAMMA3 else zero)
    return CaseDefinition(
        name="test3",
        params=prm,
        bc=BoundaryCondition(conds),
        grid=TimeGrid(dt=1e-3, m=5, T=0.1),
        published_grid=TimeGrid(dt=1e-5, m=5, T=1.0),
        notes=f"footing, clamped segment {clamped}",
        options={"clamped": clamped},
    )


def verification_neumann(phi=None, dt=1e-3, m=1, windows=20) -> CaseDefinition:
    """Pure traction and pure flux boundaries, unit source, zero initial data.

    ``phi`` overrides the unit source (x, y, t) -> value, e.g. to exercise the
    energy balance with spatially varying pressure.
    """
    prm = PhysicalParams(E=1e-4, nu=0.4, c0=1e-5, alpha=0.83, K=1e-5, mu_f=1.0)
    return CaseDefinition(
        name="verification_neumann",
        params=prm,
        bc=BoundaryCondition({}),
        phi=_const(1.0) if phi is None else phi,
        grid=TimeGrid(dt=dt, m=m, T=windows * m * dt),
        notes="pure-Neumann configuration for the energy and conservation checks",
    )


CASES = {
    "test1": test1_manufactured,
    "test2": test2_barry_mercer,
    "test3": test3_footing,
    "verification_neumann": verification_neumann,
}


def get_case(name: str, **options) -> CaseDefinition:
    try:
        factory = CASES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
    return factory(**options)
