import numpy as np
import pytest

from annulus_bifurcation.crossing import AsymptoticFrame, find_crossing
from annulus_bifurcation.errors import NumericalError
from annulus_bifurcation.perturbation_series import (
    RescaledOperatorSpec,
    eigenvalue_bridge,
    fit_expansion,
    lambda20_quadrature,
    nu20_quadrature,
    phi10_coefficients,
    phi10_series,
    phi10_tail_bound,
    psitilde10_coefficients,
    psitilde10_series,
    psitilde10_tail_bound,
    rescaled_eigenvalue,
    series_ode_residual,
)
from annulus_bifurcation.radial_spectrum import DIRICHLET, NEUMANN, AnnulusGeometry, radial_eigenvalues
from oracles import phi10_fd

PI = np.pi


@pytest.fixture(scope="module")
def delta_dirichlet():
    return fit_expansion("T_eta_delta", DIRICHLET, 0)


@pytest.fixture(scope="module")
def delta_neumann():
    return fit_expansion("Ttilde_eta_delta", NEUMANN, 2)


@pytest.fixture(scope="module")
def eps_dirichlet():
    return fit_expansion("T_eta_eps", DIRICHLET, 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        RescaledOperatorSpec("T_eta_eps", 6e-3, 5e-3, DIRICHLET)
    with pytest.raises(ValueError):
        RescaledOperatorSpec("T_other", 0, 0, DIRICHLET)
    with pytest.raises(ValueError):
        RescaledOperatorSpec("T_eta_eps", 0, 0, "robin")
    RescaledOperatorSpec("T_eta_eps", 0.2, 0.1, DIRICHLET, strict=False)


def test_unperturbed_values():
    assert rescaled_eigenvalue(RescaledOperatorSpec("T_eta_eps", 0, 0, DIRICHLET), 0) == pytest.approx(4, abs=1e-9)
    assert rescaled_eigenvalue(RescaledOperatorSpec("Ttilde_eta_eps", 0, 0, NEUMANN), 2) == pytest.approx(4, abs=1e-9)


def test_first_order_in_eta():
    v = rescaled_eigenvalue(RescaledOperatorSpec("T_eta_eps", 1e-3, 0, DIRICHLET), 0)
    assert abs(v - (4 + 3 * PI * 1e-3)) <= 5e-6


@pytest.mark.parametrize("method", ["spectral", "fd"])
def test_error_estimate_reported(method):
    v, err = rescaled_eigenvalue(RescaledOperatorSpec("T_eta_eps", 2e-3, 1e-3, DIRICHLET), 1, method=method,
                                 return_error=True)
    assert err <= 1e-8
    ref = rescaled_eigenvalue(RescaledOperatorSpec("T_eta_eps", 2e-3, 1e-3, DIRICHLET), 1)
    assert v == pytest.approx(ref, abs=1e-8)


def test_fit_eps_frame(eps_dirichlet):
    t = eps_dirichlet
    assert t[(0, 0)] == pytest.approx(4, abs=1e-6)
    assert t[(0, 1)] == pytest.approx(6, abs=1e-4)
    assert t[(1, 0)] == pytest.approx(3 * PI, abs=1e-3)
    assert t.fit_residual <= 1e-6


def test_fit_delta_frame_dirichlet(delta_dirichlet):
    t = delta_dirichlet
    assert t[(1, 0)] == pytest.approx(0, abs=1e-4)
    assert t[(0, 1)] == pytest.approx(0, abs=1e-4)
    assert t[(1, 1)] == pytest.approx(-3 * PI, abs=1e-3)
    assert t[(2, 0)] == pytest.approx(-16, abs=1e-2)
    assert t.fit_residual <= 1e-6


def test_fit_delta_frame_neumann(delta_neumann):
    t = delta_neumann
    assert t[(2, 0)] == pytest.approx(0.75, abs=1e-3)
    for key in ((1, 0), (0, 1), (1, 1)):
        assert t[key] == pytest.approx(0, abs=1e-4)


def test_eps_frame_neumann_second_order_reported():
    t = fit_expansion("Ttilde_eta_eps", NEUMANN, 2)
    assert np.isfinite(t[(2, 0)]) and t.std_errors[(2, 0)] > 0


@pytest.mark.parametrize("family,bc,n", [("T_eta_delta", DIRICHLET, 0), ("Ttilde_eta_delta", NEUMANN, 2),
                                         ("T_eta_eps", DIRICHLET, 0)])
def test_fit_stable_under_radius_halving(family, bc, n):
    full = fit_expansion(family, bc, n)
    half = fit_expansion(family, bc, n, radii=(5e-4, 1e-3, 2e-3))
    for key, value in full.coefficients.items():
        se = np.hypot(full.std_errors[key], half.std_errors[key])
        assert abs(value - half.coefficients[key]) <= 3 * se, key


def test_fit_argument_checks():
    with pytest.raises(ValueError):
        fit_expansion("T_eta_eps", DIRICHLET, 0, orders=(4, 0))


def test_fit_ill_conditioned():
    with pytest.raises(NumericalError):
        fit_expansion("T_eta_eps", DIRICHLET, 0, orders=(1, 1), radii=(1e-3, 1e-3 * (1 + 1e-6), 1e-3 * (1 + 2e-6)))


def test_table_serialization(eps_dirichlet):
    import json

    d = eps_dirichlet.to_dict()
    json.dumps(d)
    assert "0,1" in d["coefficients"] and d["max_total_order"] == 4


def test_phi10_vanishes_at_zero():
    for K in (1, 10, 400):
        assert phi10_series(0.0, K) == 0.0


def test_series_ode_residuals():
    assert series_ode_residual("phi10", 400) <= 1e-4
    assert series_ode_residual("psitilde10", 400) <= 1e-4


@pytest.mark.parametrize("x", [PI / 2, 1.0, 2.5])
def test_phi10_against_boundary_value_solve(x):
    assert abs(phi10_series(x, 400) - phi10_fd(x, N=8000)) <= 1e-6


def test_phi10_orthogonal_to_sine():
    x, w = np.polynomial.legendre.leggauss(2000)
    x = 0.5 * PI * (x + 1)
    assert abs(np.sum(0.5 * PI * w * phi10_series(x, 400) * np.sin(x))) < 1e-12


def test_psitilde10_neumann_at_zero():
    assert abs(psitilde10_series(0.0, 400, derivative=1)) <= psitilde10_tail_bound(400) + 1e-15


def test_tail_bounds_dominate_actual_tails():
    x = np.linspace(0, PI, 257)
    assert np.max(np.abs(phi10_series(x, 4000) - phi10_series(x, 400))) <= phi10_tail_bound(400)
    assert np.max(np.abs(psitilde10_series(x, 4000) - psitilde10_series(x, 400))) <= psitilde10_tail_bound(400)


def test_coefficient_decay():
    k = np.arange(1, 2001)
    assert np.allclose(k[-10:] ** 3 * phi10_coefficients(2000)[-10:], -1 / (2 * PI), rtol=1e-5)
    m = 2 * np.arange(2000) + 1
    assert np.allclose(m[-10:] ** 4 * psitilde10_coefficients(2000)[-10:], -16 / PI, rtol=1e-5)


def test_second_order_coefficients_by_quadrature():
    assert nu20_quadrature() == pytest.approx(0.75, abs=1e-4)
    assert lambda20_quadrature() == pytest.approx(-16, abs=1e-4)


@pytest.mark.parametrize("a,l", [(None, 4), (0.9, 20)])
def test_eigenvalue_bridge(a, l):
    if a is None:
        a = find_crossing(4, check_nr=False).a_l
    rep = eigenvalue_bridge(a, l)
    assert rep.neumann_rel_gap <= 1e-7
    assert rep.dirichlet_rel_gap <= 1e-7


def test_bridge_flat_strip_limit():
    l = 200
    a = 1 - np.sqrt(3) * PI / l
    rep = eigenvalue_bridge(a, l)
    assert rep.neumann_lhs == pytest.approx(4, rel=0.05)
    hl = rep.frame.h * l
    assert rep.dirichlet_lhs == pytest.approx(1 + hl**2, rel=0.05)


@pytest.mark.parametrize("n", [1, 2])
def test_bridge_preserves_ordering(n):
    a, l = 0.9, 20
    f = AsymptoticFrame.from_annulus(a, l)
    lam = radial_eigenvalues(AnnulusGeometry(a), l, n + 1, DIRICHLET)[n]
    spec = RescaledOperatorSpec("T_eta_eps", f.eta, f.epsilon, DIRICHLET, strict=False)
    assert f.h**2 * lam == pytest.approx(rescaled_eigenvalue(spec, n), rel=1e-7)
