import time

import numpy as np
import pytest
from scipy.special import jv

from annulus_bifurcation.deformed_solver import (
    BoundaryPerturbation,
    PulledBackField,
    SolverGrid,
    apply_pulled_back_operator,
    boundary_curves,
    branch_coefficients,
    dirichlet_singular_values,
    kernel_field,
    linearized_branch,
    map_radius,
    operator_a_derivative,
    overdetermined_residual,
    pulled_back_radial,
    solve_deformed_neumann,
    weighted_inner,
    zero_perturbation,
)
from annulus_bifurcation.errors import ConvergenceError
from annulus_bifurcation.radial_spectrum import (
    AnnulusGeometry,
    dirichlet_eigenvalue,
    eval_eigenfunction,
    eval_second_derivative,
    neumann_eigenvalue,
)


@pytest.fixture(scope="module")
def setup(cert4):
    a = cert4.a_l
    grid = SolverGrid(4)
    geom = AnnulusGeometry(a)
    psi = neumann_eigenvalue(geom, 0, 2)
    return a, grid, psi, PulledBackField.from_radial(grid, pulled_back_radial(grid, psi)), kernel_field(grid, a, 4)


def residual_at(cert, s, flip_beta=False):
    pert = linearized_branch(cert, s)
    if flip_beta:
        pert = BoundaryPerturbation(pert.l, pert.s, pert.b_coeff, -pert.B_coeff)
    mu, field = solve_deformed_neumann(cert.a_l, pert)
    return overdetermined_residual(cert.a_l, pert, field, mu)


def test_zero_amplitude_branch(cert4):
    pert = linearized_branch(cert4, 0.0)
    th = np.linspace(0, 2 * np.pi, 17)
    assert np.all(pert.b(th) == 0) and np.all(pert.B(th) == 0)


def test_branch_coefficients_nonzero_and_chain_rule(cert4):
    a = cert4.a_l
    alpha, beta = branch_coefficients(a, 4)
    assert alpha != 0 and beta != 0
    geom = AnnulusGeometry(a)
    phi, psi = dirichlet_eigenvalue(geom, 4, 0), neumann_eigenvalue(geom, 0, 2)
    # physical-variable form of the same ratio
    assert alpha == pytest.approx(-eval_eigenfunction(phi, a)[1] / eval_second_derivative(psi, a), rel=1e-12)
    assert beta == pytest.approx(-eval_eigenfunction(phi, 1.0)[1] / eval_second_derivative(psi, 1.0), rel=1e-12)


def test_branch_ratio_invariant_under_rescaling(cert4):
    a = cert4.a_l
    geom = AnnulusGeometry(a)
    phi, psi = dirichlet_eigenvalue(geom, 4, 0), neumann_eigenvalue(geom, 0, 2)

    def coeffs(cphi, cpsi):
        return [-(cphi * eval_eigenfunction(phi, r)[1]) / (cpsi * eval_second_derivative(psi, r)) for r in (a, 1.0)]

    r1 = np.divide(*coeffs(1.0, 1.0))
    r2 = np.divide(*coeffs(-3.7, 0.2))
    assert r1 == pytest.approx(r2, rel=1e-14)


def test_second_derivative_identity_at_outer_boundary(cert4):
    a = cert4.a_l
    psi = neumann_eigenvalue(AnnulusGeometry(a), 0, 2)
    psibar_RR = 4 * (1 - a) ** 2 * eval_second_derivative(psi, 1.0)
    assert psibar_RR == pytest.approx(-psi.value * eval_eigenfunction(psi, 1.0)[0] * 4 * (1 - a) ** 2, rel=1e-10)


def test_admissibility(cert4):
    with pytest.raises(ValueError):
        linearized_branch(cert4, 10.0)
    assert not BoundaryPerturbation(4, 1.0, 0.1, 0.1).admissible(0.14)


def test_operator_annihilates_radial_eigenfunction(setup):
    a, _, psi, psibar, _ = setup
    out = apply_pulled_back_operator(a, zero_perturbation(4), psibar, psi.value)
    assert out.sup_norm() <= 1e-7


def test_operator_kernel_element(setup, cert4):
    a, _, _, _, vbar = setup
    lam = dirichlet_eigenvalue(AnnulusGeometry(a), 4, 0).value
    assert apply_pulled_back_operator(a, zero_perturbation(4), vbar, lam).sup_norm() <= 1e-7


def test_operator_on_deformed_map_plane_wave_identity(cert4):
    # J_0(k r) and J_4(k r) cos(4 theta) solve Helmholtz on any domain; pull them back through a deformed map
    a = cert4.a_l
    pert = BoundaryPerturbation(4, 0.02, 0.7, -0.9)
    grid = SolverGrid(4, M=12, N=64)
    k = 6.3
    for order in (0, 4):
        f = PulledBackField.from_function(
            grid, lambda R, T: jv(order, k * map_radius(a, pert, R, T)) * np.cos(order * T))
        out = apply_pulled_back_operator(a, pert, f, k * k)
        assert out.sup_norm() <= 1e-6 * k * k * f.sup_norm()


def test_operator_derivative_in_amplitude(setup, cert4):
    a, _, psi, psibar, _ = setup
    base = apply_pulled_back_operator(a, zero_perturbation(4), psibar, psi.value)
    quotients = []
    for s in (1e-3, 5e-4, 2.5e-4):
        out = apply_pulled_back_operator(a, linearized_branch(cert4, s), psibar, psi.value)
        quotients.append((out - base) * (1 / s))
    limit = quotients[1] * 2 - quotients[0]  # Richardson on {1e-3, 5e-4}
    e1, e2 = (quotients[0] - limit).sup_norm(), (quotients[1] - limit).sup_norm()
    assert e1 / e2 == pytest.approx(2.0, rel=0.05)
    assert (quotients[2] - limit).sup_norm() == pytest.approx(e2 / 2, rel=0.05)


def test_trivial_solve(cert4):
    mu, field = solve_deformed_neumann(cert4.a_l, zero_perturbation(4))
    assert mu == pytest.approx(57.5851, abs=1e-3)
    assert mu == pytest.approx(cert4.shared_value, rel=1e-10)
    assert field.l2_norm() == pytest.approx(1.0, rel=1e-12)
    assert np.sum(field.grid.cc_weights * field.modes[0] * pulled_back_radial(field.grid, neumann_eigenvalue(
        AnnulusGeometry(cert4.a_l), 0, 2))) > 0


def test_eigenvalue_shift_is_quadratic(cert4):
    shifts = [solve_deformed_neumann(cert4.a_l, linearized_branch(cert4, s))[0] - cert4.shared_value
              for s in (1e-3, 5e-4)]
    assert 3.5 <= shifts[0] / shifts[1] <= 4.5
    assert abs(shifts[0]) <= 1e-3 * 1e-3 * cert4.shared_value


def test_mode_truncation(cert4):
    pert = linearized_branch(cert4, 1e-3)
    m1, _ = solve_deformed_neumann(cert4.a_l, pert, M=1, check_convergence=False)
    m3, _ = solve_deformed_neumann(cert4.a_l, pert, M=3, check_convergence=False)
    assert abs(m1 - m3) <= 1e-8 * m3


def test_convergence_failure(cert4):
    with pytest.raises(ConvergenceError):
        solve_deformed_neumann(cert4.a_l, linearized_branch(cert4, 1e-2), M=2, N=8)


def test_field_symmetry(cert4):
    _, field = solve_deformed_neumann(cert4.a_l, linearized_branch(cert4, 1e-2))
    th = np.linspace(0, 2 * np.pi, 13)
    v = field.values(th)
    assert np.allclose(v, field.values(-th), atol=1e-14)
    assert np.allclose(v, field.values(th + 2 * np.pi / 4), atol=1e-13)


def test_trivial_residual(cert4):
    assert residual_at(cert4, 0.0) <= 1e-7


def test_residual_scaling_along_branch(cert4):
    t0 = time.perf_counter()
    true_ratio = residual_at(cert4, 1e-2) / residual_at(cert4, 5e-3)
    wrong_ratio = residual_at(cert4, 1e-2, True) / residual_at(cert4, 5e-3, True)
    assert 3.3 <= true_ratio <= 4.7
    assert 1.7 <= wrong_ratio <= 2.3
    assert time.perf_counter() - t0 < 60


def test_kernel_is_one_dimensional(cert4):
    sv = np.sort(dirichlet_singular_values(cert4.a_l, 4, cert4.shared_value))
    assert sv[1] / sv[0] >= 1e3
    assert sv[0] <= 1e-6 * sv[-1]


def test_range_orthogonal_to_kernel(setup, cert4):
    a, grid, _, _, vbar = setup
    rng = np.random.default_rng(7)
    for _ in range(5):
        C = rng.normal(size=(4, 4))
        v = PulledBackField.from_function(
            grid, lambda R, T: sum((R - 0.5) * (1 - R) * np.polyval(C[m], R) * np.cos(4 * m * T) for m in range(4)))
        Lv = apply_pulled_back_operator(a, zero_perturbation(4), v, cert4.shared_value)
        cosine = weighted_inner(a, Lv, vbar) / np.sqrt(weighted_inner(a, Lv, Lv) * weighted_inner(a, vbar, vbar))
        assert abs(cosine) <= 1e-8


def test_transversality_pairing(setup, cert4):
    a, _, _, _, vbar = setup
    pairing = weighted_inner(a, operator_a_derivative(a, vbar), vbar)
    norm2 = weighted_inner(a, vbar, vbar)
    expected = (cert4.mu_prime - cert4.lambda_prime) * norm2
    assert abs(pairing) > 1.0 * norm2
    assert pairing == pytest.approx(expected, rel=1e-4)


def test_boundary_curves(cert4):
    pert = linearized_branch(cert4, 1e-2)
    th, inner, outer = boundary_curves(cert4.a_l, pert, 64)
    assert th.shape == inner.shape == outer.shape == (64,)
    assert inner[0] == pytest.approx(cert4.a_l + 1e-2 * pert.b_coeff)
    assert np.all(inner < outer)
