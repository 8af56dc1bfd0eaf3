"""Helmholtz operator on a deformed annulus, pulled back to 1/2 < R < 1.

The deformed annulus is a + b(theta) < r < 1 + B(theta) and the
diffeomorphism is

    r(R, theta) = a + (1 - a + B)(2R - 1) + 2 (1 - R) b.

Fields are stored as v(R, theta) = sum_m V[m, i] cos(m l theta): Chebyshev
collocation in R (nodes R_i) and a Galerkin projection onto cos(m l theta),
m = 0..M, in theta.  The theta projections use a trapezoid rule with
enough nodes that products of the coefficient functions with the retained
modes are integrated to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import eigs

from ._chebyshev import cheb_diff, interpolation_matrix
from .crossing import CrossingCertificate
from .errors import ConvergenceError, DegenerateDenominatorError, NumericalError
from .radial_spectrum import (
    AnnulusGeometry,
    dirichlet_eigenvalue,
    eval_eigenfunction,
    eval_second_derivative,
    neumann_eigenvalue,
)

DEFAULT_M = 8
DEFAULT_N = 64
CONVERGENCE_TOL = 1e-8


@dataclass(frozen=True)
class BoundaryPerturbation:
    """b(theta) = s alpha cos(l theta), B(theta) = s beta cos(l theta)."""

    l: int
    s: float
    b_coeff: float
    B_coeff: float

    def b(self, theta, derivative=0):
        return self.s * self.b_coeff * _cos_derivative(self.l, theta, derivative)

    def B(self, theta, derivative=0):
        return self.s * self.B_coeff * _cos_derivative(self.l, theta, derivative)

    @property
    def sup_norm(self):
        return abs(self.s) * (abs(self.b_coeff) + abs(self.B_coeff))

    def admissible(self, a):
        return self.sup_norm < min(a, 0.5 * (1.0 - a))

    def check_admissible(self, a):
        if not self.admissible(a):
            raise ValueError(
                f"perturbation size {self.sup_norm:.3g} exceeds min(a, (1-a)/2) = {min(a, 0.5 * (1 - a)):.3g}"
            )

    def scaled(self, s):
        return BoundaryPerturbation(self.l, float(s), self.b_coeff, self.B_coeff)


def _cos_derivative(l, theta, k):
    theta = np.asarray(theta, dtype=float)
    phase = [np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin][k % 4]
    return l**k * phase(l * theta)


def zero_perturbation(l):
    return BoundaryPerturbation(int(l), 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SolverGrid:
    """Tensor grid: N+1 Chebyshev nodes in R, modes cos(m l theta), m <= M."""

    l: int
    M: int = DEFAULT_M
    N: int = DEFAULT_N
    quad: int | None = None

    @cached_property
    def R(self):
        return self._cheb[1]

    @cached_property
    def _cheb(self):
        D, z = cheb_diff(self.N)
        # z runs from 1 down to -1; R = 3/4 + z/4 puts R = 1 first
        return 4.0 * D, 0.75 + 0.25 * z

    @property
    def D(self):
        return self._cheb[0]

    @cached_property
    def D2(self):
        return self.D @ self.D

    @property
    def Q(self):
        return self.quad if self.quad is not None else 4 * (self.M + 1) + 32

    @cached_property
    def theta(self):
        # one period 2 pi / l
        return 2.0 * np.pi * np.arange(self.Q) / (self.l * self.Q)

    @cached_property
    def modes(self):
        return np.arange(self.M + 1)

    @cached_property
    def basis(self):
        """cos(m l theta_q) and its first two theta-derivatives, shape (Q, M+1)."""
        arg = np.outer(self.theta, self.modes * self.l)
        ml = self.modes * self.l
        return np.cos(arg), -ml * np.sin(arg), -(ml**2) * np.cos(arg)

    @cached_property
    def projector(self):
        """Rows give the cosine coefficients from samples at theta_q."""
        P = (2.0 / self.Q) * np.cos(np.outer(self.modes * self.l, self.theta))
        P[0] *= 0.5
        return P

    @cached_property
    def cc_weights(self):
        """Clenshaw-Curtis weights on [1/2, 1] for the R nodes."""
        return _clenshaw_curtis(self.N) * 0.25

    @property
    def outer_index(self):
        return 0

    @property
    def inner_index(self):
        return self.N


def _clenshaw_curtis(N):
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    interior = theta[1:-1]
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2 * np.cos(2 * k * interior) / (4 * k * k - 1)
        v -= np.cos(N * interior) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * interior) / (4 * k * k - 1)
    w[1:-1] = 2 * v / N
    return w


@dataclass(frozen=True)
class PulledBackField:
    """Cosine-mode coefficients V[m, i] of v(R_i, theta) on a SolverGrid."""

    grid: SolverGrid
    modes: np.ndarray

    @classmethod
    def from_function(cls, grid, f):
        """Project f(R, theta) (vectorized) onto the grid's modes."""
        Rg, Tg = np.meshgrid(grid.R, grid.theta, indexing="ij")
        samples = f(Rg, Tg)
        return cls(grid, grid.projector @ samples.T)

    @classmethod
    def from_radial(cls, grid, values, mode=0):
        V = np.zeros((grid.M + 1, grid.N + 1))
        V[mode] = values
        return cls(grid, V)

    def values(self, theta=None, R=None):
        """Samples on (R, theta); defaults are the grid nodes."""
        th = self.grid.theta if theta is None else np.atleast_1d(np.asarray(theta, float))
        C = np.cos(np.outer(th, self.grid.modes * self.grid.l))
        V = self.modes if R is None else self.modes @ interpolation_matrix(self.grid.R, R).T
        return (C @ V).T

    def derivatives(self, theta=None):
        """(v, v_R, v_theta) on (R nodes, theta)."""
        g = self.grid
        th = g.theta if theta is None else np.atleast_1d(np.asarray(theta, float))
        arg = np.outer(th, g.modes * g.l)
        C = np.cos(arg)
        S = -(g.modes * g.l) * np.sin(arg)
        VR = self.modes @ g.D.T
        return (C @ self.modes).T, (C @ VR).T, (S @ self.modes).T

    def sup_norm(self, theta_points=None):
        th = None if theta_points is None else np.linspace(0, 2 * np.pi / self.grid.l, theta_points, endpoint=False)
        return float(np.max(np.abs(self.values(th))))

    def l2_norm(self):
        w = np.where(self.grid.modes == 0, 1.0, 0.5)
        return float(np.sqrt(np.sum(w[:, None] * self.modes**2 * self.grid.cc_weights[None, :])))

    def __add__(self, other):
        return PulledBackField(self.grid, self.modes + other.modes)

    def __sub__(self, other):
        return PulledBackField(self.grid, self.modes - other.modes)

    def __mul__(self, c):
        return PulledBackField(self.grid, self.modes * c)

    __rmul__ = __mul__


# --- operator -------------------------------------------------------------

def map_radius(a, pert, R, theta):
    """r(R, theta) of the pulled-back coordinates."""
    return a + (1 - a + pert.B(theta)) * (2 * R - 1) + 2 * (1 - R) * pert.b(theta)


def operator_coefficients(a, pert, R, theta):
    """Coefficients of v_RR, v_R, v_thth, v_Rth in the pulled-back Laplacian.

    ``R`` and ``theta`` broadcast against each other.
    """
    b, b1, b2 = pert.b(theta), pert.b(theta, 1), pert.b(theta, 2)
    B, B1, B2 = pert.B(theta), pert.B(theta, 1), pert.B(theta, 2)
    D = 1 - a + B - b
    r = a + (1 - a + B) * (2 * R - 1) + 2 * (1 - R) * b
    E = B1 * (2 * R - 1) + 2 * (1 - R) * b1
    F = B2 * (2 * R - 1) + 2 * (1 - R) * b2
    inv_r2 = 1.0 / r**2
    c_RR = 1.0 / (4 * D**2) + inv_r2 * (E / (2 * D)) ** 2
    c_R = 1.0 / (2 * D * r) + inv_r2 * (
        ((B1 - b1) ** 2 * (2 * R - 1) + b1 * (B1 - b1)) / D**2 - F / (2 * D)
    )
    c_tt = inv_r2 * np.ones_like(c_R)
    c_Rt = -inv_r2 * E / D
    return c_RR, c_R, c_tt, c_Rt


def _galerkin_blocks(grid, a, pert):
    """Operator without the mu term as a (K, N+1, M+1, N+1) array."""
    Rg, Tg = np.meshgrid(grid.R, grid.theta, indexing="ij")
    c_RR, c_R, c_tt, c_Rt = operator_coefficients(a, pert, Rg, Tg)
    C, C1, C2 = grid.basis
    P = grid.projector
    G_RR = np.einsum("kq,iq,qm->kim", P, c_RR, C)
    G_R = np.einsum("kq,iq,qm->kim", P, c_R, C) + np.einsum("kq,iq,qm->kim", P, c_Rt, C1)
    G_tt = np.einsum("kq,iq,qm->kim", P, c_tt, C2)
    A = np.einsum("kim,ij->kimj", G_RR, grid.D2) + np.einsum("kim,ij->kimj", G_R, grid.D)
    idx = np.arange(grid.N + 1)
    A[:, idx, :, idx] += np.transpose(G_tt, (1, 0, 2))
    return A


def _neumann_rows(grid, a, pert):
    """Projected Neumann conditions at R = 1 and R = 1/2, shape (2, K, M+1, N+1).

    On the boundary curve r = g(theta) the normal derivative is proportional
    to u_r - (g'/g^2) u_theta, with u_r = v_R/(2D) and
    u_theta = v_theta - E/(2D) v_R.
    """
    th = grid.theta
    C, C1, _ = grid.basis
    P = grid.projector
    rows = []
    for idx, R in ((grid.outer_index, 1.0), (grid.inner_index, 0.5)):
        if R == 1.0:
            g, g1 = 1 + pert.B(th), pert.B(th, 1)
        else:
            g, g1 = a + pert.b(th), pert.b(th, 1)
        D = 1 - a + pert.B(th) - pert.b(th)
        E = g1  # E reduces to B' at R = 1 and b' at R = 1/2
        cR = 1 / (2 * D) + g1 * E / (2 * D * g**2)
        ct = -g1 / g**2
        GR = np.einsum("kq,q,qm->km", P, cR, C)
        Gt = np.einsum("kq,q,qm->km", P, ct, C1)
        row = np.einsum("km,j->kmj", GR, grid.D[idx])
        row[:, :, idx] += Gt
        rows.append(row)
    return np.stack(rows)


def apply_pulled_back_operator(a: float, pert: BoundaryPerturbation, v: PulledBackField, mu: float) -> PulledBackField:
    """Galerkin projection of the pulled-back (Laplacian + mu) applied to v."""
    grid = v.grid
    A = _galerkin_blocks(grid, a, pert)
    out = np.einsum("kimj,mj->ki", A, v.modes) + mu * v.modes
    return PulledBackField(grid, out)


def _reduced_neumann_matrix(grid, a, pert):
    A = _galerkin_blocks(grid, a, pert)
    K, N1 = grid.M + 1, grid.N + 1
    A = A.reshape(K * N1, K * N1)
    rows = _neumann_rows(grid, a, pert).reshape(2 * K, K * N1)
    flat = np.arange(K * N1).reshape(K, N1)
    bnd = np.concatenate([flat[:, grid.outer_index], flat[:, grid.inner_index]])
    inner = flat[:, 1:-1].ravel()
    X = -np.linalg.solve(rows[:, bnd], rows[:, inner])
    Ared = A[np.ix_(inner, inner)] + A[np.ix_(inner, bnd)] @ X
    return Ared, X, inner, bnd


def _dirichlet_matrix(grid, a, pert):
    A = _galerkin_blocks(grid, a, pert)
    K, N1 = grid.M + 1, grid.N + 1
    A = A.reshape(K * N1, K * N1)
    flat = np.arange(K * N1).reshape(K, N1)
    inner = flat[:, 1:-1].ravel()
    return A[np.ix_(inner, inner)], inner


def _solve_once(grid, a, pert, target, start):
    Ared, X, inner, bnd = _reduced_neumann_matrix(grid, a, pert)
    # eigenpairs of -Ared are (mu, v); shift-invert about the target
    vals, vecs = eigs(-Ared, k=1, sigma=target, v0=start[inner], which="LM")
    mu = float(vals[0].real)
    vi = vecs[:, 0].real
    if abs(vals[0].imag) > 1e-8 * abs(mu):
        raise NumericalError("complex eigenvalue in deformed Neumann solve")
    full = np.zeros((grid.M + 1) * (grid.N + 1))
    full[inner] = vi
    full[bnd] = X @ vi
    return mu, full.reshape(grid.M + 1, grid.N + 1)


def pulled_back_radial(grid, pair):
    """Radial eigenfunction composed with the undeformed map, at the R nodes."""
    r = pair.a + (1 - pair.a) * (2 * grid.R - 1)
    return eval_eigenfunction(pair, r)[0]


def solve_deformed_neumann(a: float, pert: BoundaryPerturbation, M: int = DEFAULT_M, N: int = DEFAULT_N,
                           check_convergence: bool = True, tol: float = CONVERGENCE_TOL):
    """Neumann eigenpair of the deformed annulus nearest mu_{0,2}(a).

    Returns the eigenvalue and a PulledBackField with unit discrete L^2 norm
    whose projection on the pulled-back radial eigenfunction is positive.
    With ``check_convergence`` the solve is repeated on (M + 2, N + 16) and a
    relative change above ``tol`` raises ConvergenceError.
    """
    pert.check_admissible(a)
    pair = neumann_eigenvalue(AnnulusGeometry(a), 0, 2)
    grid = SolverGrid(pert.l, M, N)
    psi = pulled_back_radial(grid, pair)
    start = np.zeros((M + 1, N + 1))
    start[0] = psi
    mu, V = _solve_once(grid, a, pert, pair.value, start.ravel())
    field = PulledBackField(grid, V)
    proj = np.sum(grid.cc_weights * V[0] * psi)
    field = field * (np.sign(proj) / field.l2_norm())
    if check_convergence:
        fine = SolverGrid(pert.l, M + 2, N + 16)
        start_f = np.zeros((M + 3, N + 17))
        start_f[0] = pulled_back_radial(fine, pair)
        mu_f, _ = _solve_once(fine, a, pert, pair.value, start_f.ravel())
        if abs(mu_f - mu) > tol * abs(mu):
            raise ConvergenceError(f"eigenvalue moved by {abs(mu_f - mu):.2e} under refinement")
    return mu, field


def boundary_tangential_gradient(a, pert, field, theta_points=256):
    """Arc-length tangential derivative of u on the outer and inner boundary curves.

    R is constant along each boundary curve, so d/dtheta u(g(theta), theta)
    equals v_theta there.
    """
    g = field.grid
    th = np.linspace(0, 2 * np.pi / g.l, theta_points, endpoint=False)
    _, _, vt = field.derivatives(th)
    out = []
    for idx, gfun in ((g.outer_index, lambda t: (1 + pert.B(t), pert.B(t, 1))),
                      (g.inner_index, lambda t: (a + pert.b(t), pert.b(t, 1)))):
        gg, g1 = gfun(th)
        out.append(vt[idx] / np.hypot(gg, g1))
    return th, out[0], out[1]


def gradient_magnitude(a, pert, field, theta_points=256):
    """|grad u| at (R nodes, theta) in physical coordinates."""
    g = field.grid
    th = np.linspace(0, 2 * np.pi / g.l, theta_points, endpoint=False)
    _, vR, vt = field.derivatives(th)
    Rg, Tg = np.meshgrid(g.R, th, indexing="ij")
    D = 1 - a + pert.B(Tg) - pert.b(Tg)
    E = pert.B(Tg, 1) * (2 * Rg - 1) + 2 * (1 - Rg) * pert.b(Tg, 1)
    r = map_radius(a, pert, Rg, Tg)
    ur = vR / (2 * D)
    ut = vt - E / (2 * D) * vR
    return np.hypot(ur, ut / r)


def overdetermined_residual(a: float, pert: BoundaryPerturbation, field: PulledBackField, eigenvalue=None,
                            theta_points: int = 256) -> float:
    """Sup of |tangential derivative of u| on both boundary curves over sup |grad u|."""
    _, outer, inner = boundary_tangential_gradient(a, pert, field, theta_points)
    scale = np.max(gradient_magnitude(a, pert, field, theta_points))
    return float(max(np.max(np.abs(outer)), np.max(np.abs(inner))) / scale)


# --- first-order branch -----------------------------------------------------

def branch_coefficients(a_l, l):
    """(alpha, beta) of the first-order branch at the crossing radius a_l.

    alpha = -2(1-a) phibar'(1/2)/psibar''(1/2) = -phi'(a)/psi''(a),
    beta  = -2(1-a) phibar'(1)/psibar''(1)     = -phi'(1)/psi''(1),
    with phi the Dirichlet (l, 0) and psi the Neumann (0, 2) eigenfunction.
    """
    geom = AnnulusGeometry(a_l)
    phi = dirichlet_eigenvalue(geom, l, 0)
    psi = neumann_eigenvalue(geom, 0, 2)
    scale = 1 - a_l
    out = []
    for r in (a_l, 1.0):
        dphi_R = 2 * scale * eval_eigenfunction(phi, r)[1]
        d2psi_R = 4 * scale**2 * eval_second_derivative(psi, r)
        if abs(d2psi_R) < 1e-12 * max(1.0, psi.value):
            raise DegenerateDenominatorError(f"psi'' vanishes at r={r}")
        out.append(-2 * scale * dphi_R / d2psi_R)
    return tuple(float(x) for x in out)


def linearized_branch(cert: CrossingCertificate, s: float) -> BoundaryPerturbation:
    """First-order boundary perturbation of the bifurcating branch at amplitude s."""
    alpha, beta = branch_coefficients(cert.a_l, cert.l)
    if alpha == 0 or beta == 0:
        raise DegenerateDenominatorError("branch coefficients vanish")
    pert = BoundaryPerturbation(cert.l, float(s), alpha, beta)
    pert.check_admissible(cert.a_l)
    return pert


def boundary_curves(a, pert, points=256):
    """(theta, inner r, outer r) over a full turn."""
    th = np.linspace(0, 2 * np.pi, points, endpoint=False)
    return th, a + pert.b(th), 1 + pert.B(th)


# --- structure of the linearization at the crossing -------------------------

def weighted_inner(a, f, g):
    """int f g (R - 1/2 + a/(2(1-a))) dR dtheta over one angular period."""
    grid = f.grid
    w = grid.R - 0.5 + a / (2 * (1 - a))
    mw = np.where(grid.modes == 0, 1.0, 0.5) * (2 * np.pi / grid.l)
    return float(np.sum(mw[:, None] * f.modes * g.modes * (w * grid.cc_weights)[None, :]))


def kernel_field(grid, a, l):
    """phibar(R) cos(l theta) for the Dirichlet (l, 0) eigenfunction."""
    phi = dirichlet_eigenvalue(AnnulusGeometry(a), l, 0)
    return PulledBackField.from_radial(grid, pulled_back_radial(grid, phi), mode=1)


def dirichlet_singular_values(a, l, mu, M=DEFAULT_M, N=DEFAULT_N):
    """Singular values of the undeformed operator + mu on fields vanishing at R = 1/2, 1."""
    grid = SolverGrid(l, M, N)
    A, _ = _dirichlet_matrix(grid, a, zero_perturbation(l))
    A = A + mu * np.eye(A.shape[0])
    return np.linalg.svd(A, compute_uv=False)


def operator_a_derivative(a, field, step=1e-5):
    """d/da of the undeformed operator (including mu_{0,2}(a)) applied to ``field``.

    Fourth-order central difference in a.
    """
    l = field.grid.l
    pert = zero_perturbation(l)

    def L(x):
        mu = neumann_eigenvalue(AnnulusGeometry(x), 0, 2).value
        return apply_pulled_back_operator(x, pert, field, mu).modes

    h = step
    d = (8 * (L(a + h) - L(a - h)) - (L(a + 2 * h) - L(a - 2 * h))) / (12 * h)
    return PulledBackField(field.grid, d)
