import numpy as np
import pytest

from ergohom.convergence import (
    DirichletProblem, convergence_study, default_mesh, f_l2_norm, l2_norm, solve_eps, solve_hom,
)
from ergohom.fields import CoefficientField, EllipticityBounds, GridSpec
from ergohom.measure import Mixture, PeriodicComponent
from ergohom.streams import stream


def two_phase_1d():
    g = GridSpec(1, 2, 0.5)
    return CoefficientField.isotropic(g, [1.0, 4.0], EllipticityBounds(1.0, 4.0))


def test_constant_coefficient_matches_parabola():
    # -a u'' = 1 on (0,1): u = x (1 - x) / (2 a); Q1 is nodally exact in 1D
    p = DirichletProblem()
    mesh = p.mesh(32)
    u = solve_hom(p, 2.0, mesh)
    x = np.linspace(0, 1, 33)
    np.testing.assert_allclose(u, x * (1 - x) / 4, atol=1e-12)


def test_2d_constant_coefficient_is_consistent():
    p = DirichletProblem((1.0, 1.0))
    u1 = solve_hom(p, np.eye(2), p.mesh(16))
    u2 = solve_hom(p, 2 * np.eye(2), p.mesh(16))
    np.testing.assert_allclose(u1, 2 * u2, atol=1e-12)
    # series solution: u(1/2, 1/2) = 0.0736713532...
    assert u1[8, 8] == pytest.approx(0.07367135, abs=2e-3)


def test_under_resolved_mesh_rejected():
    p = DirichletProblem()
    with pytest.raises(ValueError, match="under-resolves"):
        solve_eps(p, two_phase_1d(), 1 / 8, p.mesh(32))


def test_bad_inputs():
    p = DirichletProblem()
    with pytest.raises(ValueError):
        DirichletProblem((0.3,)).mesh(4)
    with pytest.raises(ValueError):
        convergence_study(two_phase_1d(), p, [1 / 8, 1 / 4])
    with pytest.raises(ValueError):
        solve_hom(p, -1.0, p.mesh(8))


def test_default_mesh_alignment():
    p = DirichletProblem()
    mesh = default_mesh(p, [1 / 8, 1 / 16], two_phase_1d())
    assert mesh.cells == (256,)


def test_study_from_realization():
    rep = convergence_study(two_phase_1d(), DirichletProblem(), [1 / 4, 1 / 8, 1 / 16])
    assert rep.homogenized[0, 0] == pytest.approx(1.6, abs=1e-12)
    assert rep.errors[0] > rep.errors[1] > rep.errors[2]
    assert len(rep.rows()) == 3


def test_study_from_measure():
    mix = Mixture(((1.0, PeriodicComponent([1.0, 4.0])),))
    rep = convergence_study(mix, DirichletProblem(), [1 / 4, 1 / 8], rng=stream(1), rve_grid=GridSpec.unit_torus(1, 2))
    assert rep.errors[1] < rep.errors[0]
    with pytest.raises(ValueError):
        convergence_study(mix, DirichletProblem(), [1 / 4])


def test_norms():
    p = DirichletProblem(f=3.0)
    mesh = p.mesh(8)
    assert f_l2_norm(p, mesh) == pytest.approx(3.0)
    x = np.linspace(0, 1, 9)
    # Q1 interpolant of x(1-x) measured exactly by Gauss quadrature
    assert l2_norm(p, mesh, x * (1 - x)) == pytest.approx(np.sqrt(1 / 30), rel=2e-2)


def test_zero_rhs_gives_zero():
    p = DirichletProblem(f=0.0)
    assert np.all(solve_hom(p, 1.0, p.mesh(16)) == 0.0)
    assert np.all(solve_eps(p, two_phase_1d(), 1 / 2, p.mesh(16)) == 0.0)


def test_discrete_flux_balances_load():
    p = DirichletProblem()
    mesh = p.mesh(128)
    u = solve_eps(p, two_phase_1d(), 1 / 8, mesh)
    x = (np.arange(128) + 0.5) * mesh.h
    a = np.where(np.floor(x / (1 / 16)) % 2 == 0, 1.0, 4.0)
    flux = a * np.diff(u) / mesh.h
    np.testing.assert_allclose(flux[:-1] - flux[1:], 1.0 * mesh.h, atol=1e-10)


def test_identity_matches_reference_poisson():
    p = DirichletProblem(f=lambda x: np.sin(np.pi * x[..., 0]))
    mesh = p.mesh(64)
    u = solve_hom(p, np.eye(1), mesh)
    x = np.linspace(0, 1, 65)
    np.testing.assert_allclose(u, np.sin(np.pi * x) / np.pi**2, atol=5e-4)


def test_constant_component_has_no_error():
    f = CoefficientField.isotropic(GridSpec(1, 2, 0.5), [2.0, 2.0], EllipticityBounds(2.0, 2.0))
    rep = convergence_study(f, DirichletProblem(), [1 / 4, 1 / 8, 1 / 16])
    assert max(rep.errors) <= 1e-8


def test_conditioned_study_reproduces_component_study():
    from ergohom.measure import ConstantComponent, condition

    mix = Mixture(((0.5, PeriodicComponent([1.0, 4.0])), (0.5, ConstantComponent(2.0))))
    grid = GridSpec.unit_torus(1, 2)
    a = convergence_study(condition(mix, 0), DirichletProblem(), [1 / 4, 1 / 8], rng=stream(3), rve_grid=grid)
    b = convergence_study(PeriodicComponent([1.0, 4.0]).generate(grid), DirichletProblem(), [1 / 4, 1 / 8])
    assert a.errors == b.errors


def test_energy_bound_and_weak_monotonicity():
    p = DirichletProblem(f=1.0)
    f = two_phase_1d()
    eps = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    rep = convergence_study(f, p, eps)
    bound = f_l2_norm(p, rep.meta["mesh"]) / (np.pi * 1.0)
    assert max(rep.h1_seminorms) <= bound
    assert all(b <= 1.1 * a for a, b in zip(rep.errors, rep.errors[1:]))
