import numpy as np
import pytest
import sympy as sym

from multirate_poro import cases
from multirate_poro.assembly import Dirichlet, Neumann
from multirate_poro.errors import InvalidArgumentError
from multirate_poro.mesh import GAMMA1, GAMMA2, GAMMA3, GAMMA4, SEGMENT_NORMALS
from multirate_poro.scheme import MultirateSolver, TimeGrid


def test_manufactured_data_satisfy_strong_form():
    case = cases.test1_manufactured()
    prm = case.params
    x, y, t = sym.symbols("x y t")
    u = sym.Matrix([t / 2 * x**2, t / 2 * y**2])
    p = sym.sin(x + y) * sym.exp(t)
    grad_u = u.jacobian([x, y])
    eps = (grad_u + grad_u.T) / 2
    div_u = grad_u.trace()
    total = prm.mu * eps + prm.lam * div_u * sym.eye(2) - prm.alpha * p * sym.eye(2)
    f = -sym.Matrix([sym.diff(total[i, 0], x) + sym.diff(total[i, 1], y) for i in range(2)])
    kf = prm.K / prm.mu_f
    phi = sym.diff(prm.c0 * p + prm.alpha * div_u, t) - kf * (sym.diff(p, x, 2) + sym.diff(p, y, 2))

    rng = np.random.default_rng(4)
    pts = rng.random((10, 3))
    f_num = sym.lambdify((x, y, t), f, "numpy")
    phi_num = sym.lambdify((x, y, t), phi, "numpy")
    total_num = sym.lambdify((x, y, t), total, "numpy")
    for px, py, pt in pts:
        fx, fy = case.f(np.array(px), np.array(py), pt)
        assert np.allclose([fx, fy], np.ravel(f_num(px, py, pt)), rtol=1e-12, atol=1e-16)
        assert case.phi(np.array(px), np.array(py), pt) == pytest.approx(float(phi_num(px, py, pt)), rel=1e-12)
        ex = case.exact
        assert np.allclose(ex.u(px, py, pt), [pt / 2 * px**2, pt / 2 * py**2])
        stress = np.array(total_num(px, py, pt), dtype=float)
        for tag in (GAMMA1, GAMMA2, GAMMA3, GAMMA4):
            n = np.array(SEGMENT_NORMALS[tag], dtype=float)
            for comp, fld in enumerate(("ux", "uy")):
                cond = case.bc.kind(tag, fld)
                if isinstance(cond, Neumann):
                    assert cond.value(np.array(px), np.array(py), pt) == pytest.approx((stress @ n)[comp], abs=1e-15)


def test_manufactured_initial_data():
    case = cases.test1_manufactured()
    assert case.u0_grad is None
    assert case.p0(np.array(0.3), np.array(0.4)) == pytest.approx(np.sin(0.7))


def test_barry_mercer_pressure_window():
    t = np.pi / 2
    vals = cases.barry_mercer_pressure(np.array([0.1, 0.2, 0.5, 0.8, 0.9]), np.zeros(5), t)
    assert np.array_equal(vals, [0.0, 1.0, 1.0, 0.0, 0.0])
    case = cases.test2_barry_mercer()
    assert isinstance(case.bc.kind(GAMMA1, "p"), Dirichlet)
    assert case.exact is None


def test_footing_literal_clamp_gives_zero_solution(spaces_factory):
    case = cases.test3_footing(clamped=GAMMA3)
    traj = MultirateSolver(case, spaces_factory(4), TimeGrid(1e-3, 1, 3e-3)).run()
    assert np.abs(traj.u).max() < 1e-14
    assert np.abs(traj.p).max() < 1e-10


def test_footing_default_deforms(spaces_factory):
    case = cases.test3_footing()
    traj = MultirateSolver(case, spaces_factory(4), TimeGrid(1e-3, 1, 2e-3)).run()
    assert np.abs(traj.u[-1]).max() > 1e-7


def test_registry():
    assert set(cases.CASES) == {"test1", "test2", "test3", "verification_neumann"}
    assert cases.get_case("test3", clamped=GAMMA2).options == {"clamped": GAMMA2}
    with pytest.raises(InvalidArgumentError):
        cases.get_case("test9")
    with pytest.raises(InvalidArgumentError):
        cases.test3_footing(clamped=7)


def test_presets_keep_published_steps():
    assert cases.test1_manufactured().published_grid.dt == 1e-6
    assert cases.test2_barry_mercer().published_grid.dt == 1e-5
    v = cases.verification_neumann(m=5, windows=20)
    assert v.grid.n_coarse == 20 and v.bc.pure_neumann
