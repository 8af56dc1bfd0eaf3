"""Rescaled thin-annulus operators and their eigenvalue expansions.

With r = 1 - h x, h = (1 - a)/pi = eta (1 + eps) and eta = sqrt(3)/l the
radial problems become eigenproblems on (0, pi) for

    T u  = u'' - p(x) u' - q(x) u,   p = g/(1 - g x),  q = 3 (1+eps)^2/(1 - g x)^2

with g = eta (1 + eps).  The tilde operators drop q (angular mode 0).  The
``*_delta`` families use eps = -(pi/2) eta (1 + delta).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._chebyshev import cheb_diff
from .crossing import AsymptoticFrame
from .errors import ConvergenceError, NumericalError
from .radial_spectrum import DIRICHLET, NEUMANN, AnnulusGeometry, radial_eigenvalues

FAMILIES = ("T_eta_eps", "Ttilde_eta_eps", "T_eta_delta", "Ttilde_eta_delta")
SMALLNESS = 1e-2
EIG_TOL = 1e-9
FD_LEVELS = (1000, 2000, 4000)
SPECTRAL_LEVELS = (48, 64)
DEFAULT_RADII = (1e-3, 2e-3, 4e-3)
MAX_CONDITION = 1e10


@dataclass(frozen=True)
class RescaledOperatorSpec:
    """One rescaled operator on (0, pi).

    ``strict`` enforces the smallness |eta| + |second_param| < 1/100 under
    which the expansions are stated; the eigenvalue bridge to actual annuli
    needs parameters outside that range and turns it off.
    """

    family: str
    eta: float
    second_param: float
    bc: str
    strict: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown operator family {self.family!r}")
        if self.bc not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.strict and abs(self.eta) + abs(self.second_param) >= SMALLNESS:
            raise ValueError(
                f"|eta| + |param| = {abs(self.eta) + abs(self.second_param):.3g} is not below {SMALLNESS}"
            )
        if abs(self.slope) * np.pi >= 1.0:
            raise ValueError("parameters make 1 - eta (1 + eps) x vanish on [0, pi]")

    @property
    def epsilon(self):
        if self.family.endswith("delta"):
            return -0.5 * np.pi * self.eta * (1.0 + self.second_param)
        return self.second_param

    @property
    def slope(self):
        return self.eta * (1.0 + self.epsilon)

    @property
    def has_potential(self):
        return not self.family.startswith("Ttilde")

    def weight(self, x):
        return 1.0 - self.slope * x

    def potential(self, x):
        """q(x); the eigenproblem is -(w u')' + q w u = nu w u."""
        if not self.has_potential:
            return np.zeros_like(np.asarray(x, dtype=float))
        return 3.0 * (1.0 + self.epsilon) ** 2 / self.weight(x) ** 2


def _fd_eigenvalue(spec, n, N):
    # flux form -(w u')' + q w u = nu w u with cell-centered fluxes; the
    # Neumann ends use half cells, equivalent to symmetric ghost points
    h = np.pi / N
    x = np.arange(N + 1) * h
    wm = spec.weight(0.5 * (x[:-1] + x[1:]))
    if spec.bc == DIRICHLET:
        xi = x[1:-1]
        mass = spec.weight(xi)
        diag = (wm[:-1] + wm[1:]) / h**2 + spec.potential(xi) * mass
        off = -wm[1:-1] / h**2
    else:
        mass = spec.weight(x)
        mass[0] *= 0.5
        mass[-1] *= 0.5
        diag = np.empty(N + 1)
        diag[1:-1] = (wm[:-1] + wm[1:]) / h**2
        diag[0] = wm[0] / h**2
        diag[-1] = wm[-1] / h**2
        diag += spec.potential(x) * mass
        off = -wm / h**2
    s = 1.0 / np.sqrt(mass)
    vals = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], eigvals_only=True, select="i", select_range=(n, n))
    return float(vals[0])


def _spectral_eigenvalue(spec, n, N):
    D, z = cheb_diff(N)
    x = 0.5 * np.pi * (z + 1.0)
    D = D * (2.0 / np.pi)
    D2 = D @ D
    p = spec.slope / spec.weight(x)
    A = -(D2 - p[:, None] * D) + np.diag(spec.potential(x))
    inner = slice(1, N)
    if spec.bc == DIRICHLET:
        Ai = A[inner, inner]
    else:
        # u'(0) = u'(pi) = 0 eliminates the two boundary values
        ends = [0, N]
        Xb = -np.linalg.solve(D[np.ix_(ends, ends)], D[ends, inner])
        Ai = A[inner, inner] + A[inner][:, ends] @ Xb
    ev = np.linalg.eigvals(Ai)
    if np.max(np.abs(ev.imag[np.argsort(ev.real)[: n + 1]])) > 1e-8:
        raise NumericalError("spectral discretization produced complex low eigenvalues")
    return float(np.sort(ev.real)[n])


def rescaled_eigenvalue(spec: RescaledOperatorSpec, n: int, method: str = "spectral", return_error: bool = False):
    """n-th eigenvalue nu of T u + nu u = 0 on (0, pi).

    ``method="spectral"`` uses Chebyshev collocation at two resolutions and
    takes their difference as the error estimate.  ``method="fd"`` uses the
    second-order flux discretization on three grids with Richardson
    extrapolation; its accuracy is limited to about 1e-9 by roundoff in the
    N = 4000 matrices.
    """
    if int(n) != n or not 0 <= n <= 10:
        raise ValueError(f"index must be an integer in [0, 10], got {n!r}")
    n = int(n)
    if method == "spectral":
        v = [_spectral_eigenvalue(spec, n, N) for N in SPECTRAL_LEVELS]
        value, err = v[-1], abs(v[-1] - v[-2])
    elif method == "fd":
        v = [_fd_eigenvalue(spec, n, N) for N in FD_LEVELS]
        r1 = (4 * v[1] - v[0]) / 3
        r2 = (4 * v[2] - v[1]) / 3
        value, err = r2, abs(r2 - r1) / 15
    else:
        raise ValueError(f"unknown method {method!r}")
    if err > EIG_TOL * max(1.0, abs(value)):
        raise ConvergenceError(f"eigenvalue error estimate {err:.2e} exceeds tolerance")
    return (value, err) if return_error else value


@dataclass(frozen=True)
class ExpansionTable:
    """Fitted coefficients C_jk of sum eta^j p^k C_jk, p the second parameter."""

    family: str
    bc: str
    n: int
    orders: tuple
    coefficients: dict
    std_errors: dict
    fit_residual: float
    condition_number: float
    radii: tuple
    method: str = "spectral"
    tolerances: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.coefficients[key]

    def to_dict(self):
        return {
            "family": self.family,
            "bc": self.bc,
            "n": self.n,
            "orders": list(self.orders),
            "max_total_order": int(sum(self.orders)),
            "coefficients": {f"{j},{k}": v for (j, k), v in self.coefficients.items()},
            "std_errors": {f"{j},{k}": v for (j, k), v in self.std_errors.items()},
            "fit_residual": self.fit_residual,
            "condition_number": self.condition_number,
            "radii": list(self.radii),
            "method": self.method,
            "tolerances": self.tolerances,
        }


def fit_expansion(
    family: str,
    bc: str,
    n: int,
    orders=(2, 2),
    radii=DEFAULT_RADII,
    method: str = "spectral",
    model_degree: int = 6,
) -> ExpansionTable:
    """Least-squares fit of the eigenvalue's double power series.

    The parameters run over the tensor grid {+-r : r in radii}^2 (zero is
    excluded).  The fitted model contains every monomial eta^j p^k with
    j + k <= ``model_degree`` that the grid can resolve (per-axis degree
    below the number of distinct nodes); only those with j <= orders[0] and
    k <= orders[1] are reported.  Fitting beyond the reported orders keeps
    unmodelled quartic terms from biasing the quadratic coefficients.

    Standard errors use the larger of the residual variance and the mean
    squared eigenvalue error estimate.  Columns are scaled by the largest
    radius, so the condition number reflects the grid geometry.
    """
    jmax, kmax = (int(o) for o in orders)
    if not (0 <= jmax <= 3 and 0 <= kmax <= 3):
        raise ValueError("orders must lie in [0, 3] x [0, 3]")
    pts = np.concatenate([-np.asarray(radii, float)[::-1], np.asarray(radii, float)])
    axis_deg = len(pts) - 1
    if max(jmax, kmax) > axis_deg:
        raise ValueError("too few grid radii for the requested orders")
    E, P = np.meshgrid(pts, pts, indexing="ij")
    E, P = E.ravel(), P.ravel()
    evals = [rescaled_eigenvalue(RescaledOperatorSpec(family, e, p, bc), n, method=method, return_error=True)
             for e, p in zip(E, P)]
    vals = np.array([v for v, _ in evals])
    errs = np.array([e for _, e in evals])
    degree = max(model_degree, jmax + kmax)
    keys = [(j, k) for j in range(axis_deg + 1) for k in range(axis_deg + 1) if j + k <= degree]
    while len(keys) >= len(vals):
        degree -= 1
        keys = [key for key in keys if sum(key) <= degree]
    s = max(radii)
    X = np.column_stack([(E / s) ** j * (P / s) ** k for j, k in keys])
    cond = float(np.linalg.cond(X))
    if cond > MAX_CONDITION:
        raise NumericalError(f"fit design matrix is ill-conditioned (cond={cond:.2e})")
    beta, _, _, _ = np.linalg.lstsq(X, vals, rcond=None)
    resid = vals - X @ beta
    sigma2 = max(float(resid @ resid) / (len(vals) - len(keys)), float(np.mean(errs**2)))
    cov = sigma2 * np.linalg.inv(X.T @ X)
    scale = np.array([s ** -(j + k) for j, k in keys])
    coef = beta * scale
    se = np.sqrt(np.diag(cov)) * scale
    c0 = abs(coef[0]) if coef[0] != 0 else 1.0
    report = [i for i, (j, k) in enumerate(keys) if j <= jmax and k <= kmax]
    return ExpansionTable(
        family=family,
        bc=bc,
        n=int(n),
        orders=(jmax, kmax),
        coefficients={keys[i]: float(coef[i]) for i in report},
        std_errors={keys[i]: float(se[i]) for i in report},
        fit_residual=float(np.sqrt(np.mean(resid**2)) / c0),
        condition_number=cond,
        radii=tuple(float(r) for r in radii),
        method=method,
        tolerances={"eigenvalue_tol": EIG_TOL, "max_condition": MAX_CONDITION, "model_degree": degree},
    )


# --- explicit Fourier series --------------------------------------------

def phi10_coefficients(K: int) -> np.ndarray:
    """Coefficients of sin(2kx), k = 1..K, in the first-order Dirichlet corrector."""
    k = np.arange(1, K + 1, dtype=float)
    return (4.0 / np.pi) * 2 * k * (4 * k**2 - 13) / (1 - 4 * k**2) ** 3


def phi10_tail_bound(K: int, terms: int = 10**6) -> float:
    """Bound on |sum_{k>K}| of the series; the summand decays like k^-3."""
    k = np.arange(K + 1, K + 1 + terms, dtype=float)
    head = np.sum(np.abs(2 * k * (4 * k**2 - 13) / (1 - 4 * k**2) ** 3))
    # remainder beyond the explicit sum: |c_k| <= 1/(8 (k^2 - 1)) for k >= 2
    k_end = K + terms
    return float((4.0 / np.pi) * (head + 1.0 / (8.0 * (k_end - 1))))


def phi10_series(x, K: int = 400, derivative: int = 0):
    """Partial sum of the sine series, or its first or second x-derivative."""
    if K < 1:
        raise ValueError("K must be positive")
    x = np.asarray(x, dtype=float)
    c = phi10_coefficients(K)
    m = 2.0 * np.arange(1, K + 1)
    arg = np.multiply.outer(x, m)
    if derivative == 0:
        out = np.sin(arg) @ c
    elif derivative == 1:
        out = np.cos(arg) @ (c * m)
    elif derivative == 2:
        out = -np.sin(arg) @ (c * m**2)
    else:
        raise ValueError("derivative must be 0, 1 or 2")
    return float(out) if out.ndim == 0 else out


def psitilde10_coefficients(K: int) -> np.ndarray:
    """Coefficients of cos((2j+1)x), j = 0..K-1, in the first-order Neumann corrector."""
    m = 2.0 * np.arange(K) + 1.0
    return -(16.0 / np.pi) / (m**2 - 4) ** 2


def psitilde10_tail_bound(K: int) -> float:
    """Bound on |sum_{j>=K}|: integral comparison for the (m^2-4)^-2 decay."""
    m0 = 2.0 * K + 1.0
    # sum over odd m >= m0 of (m^2-4)^-2 <= f(m0) + (1/2) int_{m0}^inf f
    f0 = 1.0 / (m0**2 - 4) ** 2
    integral = 1.0 / (3.0 * (m0 - 2) ** 3)
    return float((16.0 / np.pi) * (f0 + 0.5 * integral))


def psitilde10_series(x, K: int = 400, derivative: int = 0):
    if K < 1:
        raise ValueError("K must be positive")
    x = np.asarray(x, dtype=float)
    c = psitilde10_coefficients(K)
    m = 2.0 * np.arange(K) + 1.0
    arg = np.multiply.outer(x, m)
    if derivative == 0:
        out = np.cos(arg) @ c
    elif derivative == 1:
        out = -np.sin(arg) @ (c * m)
    elif derivative == 2:
        out = -np.cos(arg) @ (c * m**2)
    else:
        raise ValueError("derivative must be 0, 1 or 2")
    return float(out) if out.ndim == 0 else out


def _phi10_forcing(x):
    # L Phi_10 = cos x - 3 (pi - 2x) sin x
    return np.cos(x) - 3.0 * (np.pi - 2 * x) * np.sin(x)


def _psitilde10_forcing(x):
    # L~ psi~_10 = -2 sin 2x
    return -2.0 * np.sin(2 * x)


def series_ode_residual(which: str, K: int = 400, points: int = 1024, quad_nodes: int = 4096) -> float:
    """Sup over a uniform grid of the ODE residual projected on the retained modes.

    L acts on each retained mode exactly (sin 2kx -> (1 - 4k^2) sin 2kx,
    cos mx -> (4 - m^2) cos mx), and the forcing is projected on the same
    modes by Gauss-Legendre quadrature.  The unprojected residual is
    dominated by the Gibbs tail of the forcing's own series, which no
    truncation of the solution can remove.
    """
    xq, wq = np.polynomial.legendre.leggauss(quad_nodes)
    xq = 0.5 * np.pi * (xq + 1.0)
    wq = 0.5 * np.pi * wq
    grid = np.linspace(0.0, np.pi, points)
    if which == "phi10":
        m = 2.0 * np.arange(1, K + 1)
        applied = phi10_coefficients(K) * (1 - m**2)
        basis_q, basis_g = np.sin(np.multiply.outer(xq, m)), np.sin(np.multiply.outer(grid, m))
        forcing = _phi10_forcing(xq)
    elif which == "psitilde10":
        m = 2.0 * np.arange(K) + 1.0
        applied = psitilde10_coefficients(K) * (4 - m**2)
        basis_q, basis_g = np.cos(np.multiply.outer(xq, m)), np.cos(np.multiply.outer(grid, m))
        forcing = _psitilde10_forcing(xq)
    else:
        raise ValueError(f"unknown series {which!r}")
    projected = (2.0 / np.pi) * (wq * forcing) @ basis_q
    return float(np.max(np.abs(basis_g @ (applied - projected))))


def nu20_quadrature(K: int = 400, quad_nodes: int = 4096) -> float:
    """(2/pi) int_0^pi (psi~_10' + (pi - 2x) sin 2x) cos 2x dx with the truncated series."""
    xq, wq = np.polynomial.legendre.leggauss(quad_nodes)
    xq = 0.5 * np.pi * (xq + 1.0)
    wq = 0.5 * np.pi * wq
    f = psitilde10_series(xq, K, derivative=1) + (np.pi - 2 * xq) * np.sin(2 * xq)
    return float((2.0 / np.pi) * np.sum(wq * f * np.cos(2 * xq)))


def lambda20_quadrature(K: int = 400, quad_nodes: int = 4096) -> float:
    """Second-order Dirichlet coefficient from the projection integral with Phi_10."""
    xq, wq = np.polynomial.legendre.leggauss(quad_nodes)
    xq = 0.5 * np.pi * (xq + 1.0)
    wq = 0.5 * np.pi * wq
    phi = phi10_series(xq, K)
    dphi = phi10_series(xq, K, derivative=1)
    f = dphi - (0.5 * np.pi - xq) * np.cos(xq) - 3 * (np.pi - 2 * xq) * phi
    f = f + 0.75 * (np.pi**2 - 12 * np.pi * xq + 12 * xq**2) * np.sin(xq)
    return float((2.0 / np.pi) * np.sum(wq * f * np.sin(xq)))


# --- bridge to the annulus -------------------------------------------------

@dataclass(frozen=True)
class BridgeReport:
    a: float
    l: int
    frame: AsymptoticFrame
    neumann_lhs: float
    neumann_rhs: float
    dirichlet_lhs: float
    dirichlet_rhs: float

    @property
    def neumann_rel_gap(self):
        return abs(self.neumann_lhs - self.neumann_rhs) / abs(self.neumann_lhs)

    @property
    def dirichlet_rel_gap(self):
        return abs(self.dirichlet_lhs - self.dirichlet_rhs) / abs(self.dirichlet_lhs)


def eigenvalue_bridge(a: float, l: int) -> BridgeReport:
    """Compare h^2 mu_{0,2}(a) with nu~_2 and h^2 lambda_{l,0}(a) with Lambda_0.

    The rescaled eigenvalues are evaluated at the (eta, eps) frame of (a, l).
    """
    frame = AsymptoticFrame.from_annulus(a, l)
    geom = AnnulusGeometry(a)
    h2 = frame.h**2
    mu = radial_eigenvalues(geom, 0, 3, NEUMANN)[2]
    lam = radial_eigenvalues(geom, l, 1, DIRICHLET)[0]
    nu = rescaled_eigenvalue(RescaledOperatorSpec("Ttilde_eta_eps", frame.eta, frame.epsilon, NEUMANN, strict=False), 2)
    Lam = rescaled_eigenvalue(RescaledOperatorSpec("T_eta_eps", frame.eta, frame.epsilon, DIRICHLET, strict=False), 0)
    return BridgeReport(float(a), int(l), frame, float(h2 * mu), float(nu), float(h2 * lam), float(Lam))
