import numpy as np
import pytest

from multirate_poro import cases
from multirate_poro.diagnostics import (
    NOT_APPLICABLE,
    UNDEFINED_RATE,
    EnergyOperators,
    conservation_residuals,
    convergence_rates,
    dt_m_difference,
    energy_report,
    error_norms,
    reference_errors,
    scalar_error,
    vector_error,
)
from multirate_poro.errors import InvalidArgumentError
from multirate_poro.fem import interpolate_vector
from multirate_poro.scheme import MultirateSolver, TimeGrid


def test_rates_examples():
    assert convergence_rates([1e-2, 2.5e-3], [0.2, 0.1]) == pytest.approx([2.0])
    rates = convergence_rates([1.06336e-3, 9.00707e-5, 7.79098e-6, 6.87406e-7], [0.18, 0.09, 0.045, 0.0225])
    assert rates == pytest.approx([3.5614, 3.5312, 3.5026], abs=5e-5)
    assert convergence_rates([0.3, 0.3, 0.3], [0.4, 0.2, 0.1]) == pytest.approx([0.0, 0.0])


def test_rates_undefined_markers():
    assert convergence_rates([1.0, 0.5], [0.1, 0.1]) == [UNDEFINED_RATE]
    assert convergence_rates([0.0, 0.5], [0.2, 0.1]) == [UNDEFINED_RATE]
    with pytest.raises(InvalidArgumentError):
        convergence_rates([1.0], [0.1])


def _solver_run(case, spaces, grid=None):
    solver = MultirateSolver(case, spaces, grid or case.grid)
    return solver, solver.run()


@pytest.mark.parametrize("theta", [0, 1])
def test_energy_balance_with_varying_source(spaces_factory, theta):
    phi = lambda x, y, t: np.cos(3 * x) * (1 + y) + 0.5 * t
    case = cases.verification_neumann(phi=phi, m=3, windows=6)
    grid = TimeGrid(case.grid.dt, 3, case.grid.T, theta)
    solver, traj = _solver_run(case, spaces_factory(4), grid)
    report = energy_report(EnergyOperators.from_solver(solver), traj)
    assert report.residual.max() <= 1e-8
    assert len(report.J) == grid.n_coarse + 1


def test_energy_zero_trajectory(spaces_factory):
    case = cases.verification_neumann(phi=lambda x, y, t: 0 * x, windows=3)
    solver, traj = _solver_run(case, spaces_factory(3))
    report = energy_report(EnergyOperators.from_solver(solver), traj)
    assert not np.any(report.J) and not np.any(report.S)


def test_conservation_identities(spaces_factory):
    case = cases.verification_neumann(m=2, windows=5)
    s = spaces_factory(4)
    solver, traj = _solver_run(case, s)
    rep = conservation_residuals(traj, case, s, EnergyOperators.from_solver(solver), solver.vector_load)
    assert np.abs(rep.eta).max() <= 1e-10
    assert rep.C_eta == pytest.approx(traj.times)
    # the informational identities hold as well for this self-balanced load
    assert np.nanmax(np.abs(rep.xi)) <= 1e-10
    assert np.nanmax(np.abs(rep.u)) <= 1e-10


def test_conservation_not_applicable_with_dirichlet(spaces_factory):
    case = cases.test3_footing()
    s = spaces_factory(2)
    solver, traj = _solver_run(case, s, TimeGrid(1e-3, 1, 2e-3))
    assert conservation_residuals(traj, case, s, EnergyOperators.from_solver(solver)) == NOT_APPLICABLE


def test_dt_m_difference():
    eta = np.array([[0.0], [1.0], [3.0]])
    assert np.allclose(dt_m_difference(eta, 0.5, 2), [[1.0], [2.0]])


def test_quadratic_interpolant_error_vanishes(spaces_factory):
    ex = cases.test1_manufactured().exact
    s = spaces_factory(4)
    c = interpolate_vector(s, ex.u, 0.7)
    l2, h1 = vector_error(s, c, ex.u, ex.u_grad, 0.7)
    assert l2 < 1e-13 and h1 < 1e-12


def test_interpolation_rate_three(spaces_factory):
    u = lambda x, y, t: (np.sin(x) * np.sin(y), 0 * x)
    errs, hs = [], []
    for n in (4, 8, 16):
        s = spaces_factory(n)
        errs.append(vector_error(s, interpolate_vector(s, u), u)[0])
        hs.append(s.mesh.h)
    for r in convergence_rates(errs, hs):
        assert r == pytest.approx(3.0, abs=0.3)


def test_error_norms_on_exact_interpolant(spaces_factory):
    case = cases.test1_manufactured()
    s = spaces_factory(4)
    solver, traj = _solver_run(case, s, TimeGrid(1e-4, 2, 4e-4))
    for norm in ("Linf_L2", "Linf_H1", "L2_L2", "L2_H1"):
        assert error_norms(traj, s, case.exact, norm, "u") >= 0
        assert error_norms(traj, s, case.exact, norm, "p", case.params) >= 0
    # replacing the computed displacement by the interpolant of the exact one zeroes the error
    for j, t in enumerate(traj.times):
        traj.u[j] = interpolate_vector(s, case.exact.u, t)
    assert error_norms(traj, s, case.exact, "Linf_H1", "u") < 1e-12
    with pytest.raises(InvalidArgumentError):
        error_norms(traj, s, case.exact, "L1", "u")
    with pytest.raises(InvalidArgumentError):
        error_norms(traj, s, case.exact, "L2_L2", "w")


def test_scalar_error_weight(spaces_factory):
    s = spaces_factory(3)
    c = s.scalar_coords[:, 0].copy()  # the field x
    assert scalar_error(s, c)[1] == pytest.approx(1.0)
    assert scalar_error(s, c, weight=np.diag([4.0, 1.0]))[1] == pytest.approx(2.0)


def test_reference_errors_against_itself(spaces_factory):
    case = cases.verification_neumann(m=1, windows=4)
    s = spaces_factory(2)
    _, traj = _solver_run(case, s)
    errs = reference_errors(traj, s, traj, s, case.params)
    assert all(v < 1e-14 for v in errs.values())
    _, other = _solver_run(case, s, TimeGrid(2e-3, 1, 8e-3))
    with pytest.raises(InvalidArgumentError):
        reference_errors(traj, s, other, s)
