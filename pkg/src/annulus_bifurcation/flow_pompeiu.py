"""Stationary Euler flow and Pompeiu-type identity built from a Neumann
eigenfunction u that is constant on each boundary component.

Regions: Omega (the annulus, possibly deformed), Omega' (the hole it
encloses) and the unbounded exterior.  c1 = u on the outer boundary,
c2 = u on the inner boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._chebyshev import interpolation_matrix
from .deformed_solver import BoundaryPerturbation, PulledBackField, zero_perturbation
from .errors import NumericalError
from .radial_spectrum import (
    AnnulusGeometry,
    RadialEigenpair,
    eval_eigenfunction,
    eval_second_derivative,
    neumann_eigenvalue,
)

EXTERIOR, DOMAIN, HOLE = 0, 1, 2


class _RadialStream:
    """u(x) = psi(|x|) for a radial eigenpair."""

    def __init__(self, pair):
        self.pair = pair

    def __call__(self, rho, theta):
        u, du = eval_eigenfunction(self.pair, rho)
        return np.asarray(u), np.asarray(du), np.zeros_like(np.asarray(u))

    def second(self, rho):
        return eval_second_derivative(self.pair, rho)


class _FieldStream:
    """u on a deformed annulus from a pulled-back field, via spectral interpolation."""

    def __init__(self, a, pert, field):
        self.a, self.pert, self.field = a, pert, field

    def __call__(self, rho, theta):
        a, pert, g = self.a, self.pert, self.field.grid
        rho = np.atleast_1d(rho).astype(float)
        theta = np.atleast_1d(theta).astype(float)
        D = 1 - a + pert.B(theta) - pert.b(theta)
        R = (rho - a + (1 - a + pert.B(theta)) - 2 * pert.b(theta)) / (2 * D)
        R = np.clip(R, 0.5, 1.0)
        E = pert.B(theta, 1) * (2 * R - 1) + 2 * (1 - R) * pert.b(theta, 1)
        interp = interpolation_matrix(g.R, R)  # (P, N+1)
        arg = np.outer(theta, g.modes * g.l)
        C = np.cos(arg)
        S = -(g.modes * g.l) * np.sin(arg)
        VR = self.field.modes @ g.D.T
        v = np.einsum("pm,mj,pj->p", C, self.field.modes, interp)
        vR = np.einsum("pm,mj,pj->p", C, VR, interp)
        vt = np.einsum("pm,mj,pj->p", S, self.field.modes, interp)
        u_r = vR / (2 * D)
        u_t = vt - E / (2 * D) * vR
        return v, u_r, u_t


@dataclass
class FlowField:
    """Velocity (du/dx2, -du/dx1) on the closed domain, 0 elsewhere, and the
    three-region pressure."""

    a: float
    mu: float
    c1: float
    c2: float
    pert: BoundaryPerturbation
    stream: object

    # geometry -------------------------------------------------------------
    def inner_radius(self, theta):
        return self.a + self.pert.b(theta)

    def outer_radius(self, theta):
        return 1.0 + self.pert.B(theta)

    def region(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        rho, th = np.hypot(x, y), np.arctan2(y, x)
        out = np.full(rho.shape, EXTERIOR)
        out[rho < self.inner_radius(th)] = HOLE
        inside = (rho >= self.inner_radius(th)) & (rho <= self.outer_radius(th))
        out[inside] = DOMAIN
        return out

    # stream function ----------------------------------------------------------
    def _polar(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return x, y, np.hypot(x, y), np.arctan2(y, x)

    def u_and_gradient(self, x, y):
        """u, du/dx1, du/dx2 on the domain (NaN elsewhere)."""
        x, y, rho, th = self._polar(x, y)
        shape = rho.shape
        mask = self.region(x, y) == DOMAIN
        u = np.full(shape, np.nan)
        ux = np.full(shape, np.nan)
        uy = np.full(shape, np.nan)
        if np.any(mask):
            r, t = rho[mask], th[mask]
            val, u_r, u_t = self.stream(r, t)
            c, s = np.cos(t), np.sin(t)
            u[mask] = val
            ux[mask] = u_r * c - u_t * s / r
            uy[mask] = u_r * s + u_t * c / r
        return u, ux, uy

    def velocity(self, x, y):
        _, ux, uy = self.u_and_gradient(x, y)
        return np.nan_to_num(uy), np.nan_to_num(-ux)

    def pressure(self, x, y):
        reg = self.region(x, y)
        u, ux, uy = self.u_and_gradient(x, y)
        p = np.zeros(reg.shape)
        dom = reg == DOMAIN
        p[dom] = -0.5 * (ux[dom] ** 2 + uy[dom] ** 2 + self.mu * u[dom] ** 2 - self.mu * self.c1**2)
        p[reg == HOLE] = -0.5 * self.mu * (self.c2**2 - self.c1**2)
        return p

    def hessian(self, x, y):
        """Second derivatives of u for the radial stream (trivial annulus only)."""
        if not isinstance(self.stream, _RadialStream):
            raise NotImplementedError("analytic Hessian is available for radial streams only")
        x, y, rho, _ = self._polar(x, y)
        _, d1, _ = self.stream(rho, 0 * rho)
        d2 = self.stream.second(rho)
        nx, ny = x / rho, y / rho
        t = d1 / rho
        hxx = d2 * nx * nx + t * (1 - nx * nx)
        hyy = d2 * ny * ny + t * (1 - ny * ny)
        hxy = (d2 - t) * nx * ny
        return hxx, hxy, hxy.copy(), hyy

    def divergence(self, x, y):
        """d1 v1 + d2 v2 = u_21 - u_12 from the Hessian."""
        hxx, hxy, hyx, hyy = self.hessian(x, y)
        return hyx - hxy


def build_flow(pair: RadialEigenpair | None = None, a: float | None = None,
               pert: BoundaryPerturbation | None = None, field: PulledBackField | None = None,
               mu: float | None = None) -> FlowField:
    """Flow from the radial (0, 2) Neumann pair, or from a deformed-domain field.

    For the deformed case ``a``, ``pert``, ``field`` and ``mu`` are required;
    c1 and c2 are the means of u over the outer and inner boundary curves.
    """
    if field is None:
        if pair is None:
            pair = neumann_eigenvalue(AnnulusGeometry(a), 0, 2)
        stream = _RadialStream(pair)
        c1 = eval_eigenfunction(pair, 1.0)[0]
        c2 = eval_eigenfunction(pair, pair.a)[0]
        flow = FlowField(pair.a, pair.value, float(c1), float(c2), zero_perturbation(1), stream)
    else:
        if a is None or pert is None or mu is None:
            raise ValueError("deformed flow needs a, pert, field and mu")
        stream = _FieldStream(a, pert, field)
        th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        c1 = float(np.mean(stream(1 + pert.B(th), th)[0]))
        c2 = float(np.mean(stream(a + pert.b(th), th)[0]))
        flow = FlowField(float(a), float(mu), c1, c2, pert, stream)
    if flow.c1 == 0.0:
        raise NumericalError("outer boundary value c1 vanishes")
    return flow


# --- quadrature over the regions ---------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre points per region radially, trapezoid points in angle."""

    radial: int = 64
    angular: int = 256

    def refined(self):
        return QuadratureSpec(int(1.5 * self.radial), int(1.5 * self.angular))


def polar_nodes(inner, outer, spec: QuadratureSpec):
    """Nodes and weights for {inner(theta) < rho < outer(theta)} (callables)."""
    xg, wg = np.polynomial.legendre.leggauss(spec.radial)
    th = 2 * np.pi * np.arange(spec.angular) / spec.angular
    wt = 2 * np.pi / spec.angular
    lo, hi = inner(th), outer(th)
    rho = lo[None, :] + 0.5 * (hi - lo)[None, :] * (xg[:, None] + 1)
    w = 0.5 * (hi - lo)[None, :] * wg[:, None] * wt * rho
    T = np.broadcast_to(th, rho.shape)
    return rho * np.cos(T), rho * np.sin(T), w


def region_nodes(flow_or_domain, which, spec):
    a, pert = flow_or_domain.a, flow_or_domain.pert
    if which == DOMAIN:
        return polar_nodes(lambda t: a + pert.b(t), lambda t: 1 + pert.B(t), spec)
    if which == HOLE:
        return polar_nodes(lambda t: 0 * t, lambda t: a + pert.b(t), spec)
    raise ValueError("only the domain and the hole are integrated")


# --- test fields ---------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialBump:
    """chi(x) = P(x) * beta((x1-x0)/h) * beta((x2-y0)/h), beta(t) = (1 - t^2)^m on |t| < 1.

    ``coeffs`` is a 2D coefficient array for numpy.polynomial.polynomial.
    """

    center: tuple = (0.0, 0.0)
    half_width: float = 1.5
    power: int = 6
    coeffs: tuple = ((1.0,),)

    def _beta(self, t, k):
        m = self.power
        inside = np.abs(t) < 1
        s = np.where(inside, 1 - t * t, 0.0)
        if k == 0:
            out = s**m
        elif k == 1:
            out = -2 * m * t * s ** (m - 1)
        else:
            out = -2 * m * s ** (m - 1) + 4 * m * (m - 1) * t * t * s ** (m - 2)
        return np.where(inside, out, 0.0)

    def derivatives(self, x, y):
        """chi and its first and second partial derivatives as a dict keyed by (i, j)."""
        from numpy.polynomial import polynomial as P

        c = np.array(self.coeffs, dtype=float)
        h = self.half_width
        tx, ty = (x - self.center[0]) / h, (y - self.center[1]) / h
        bx = [self._beta(tx, k) / h**k for k in range(3)]
        by = [self._beta(ty, k) / h**k for k in range(3)]
        out = {}
        for i in range(3):
            for j in range(3 - i):
                total = 0.0
                # Leibniz rule on P * bx * by
                for pi in range(i + 1):
                    for pj in range(j + 1):
                        cp = c
                        if pi:
                            cp = P.polyder(cp, pi, axis=0)
                        if pj:
                            cp = P.polyder(cp, pj, axis=1)
                        coef = _binom(i, pi) * _binom(j, pj)
                        total = total + coef * P.polyval2d(x, y, cp) * bx[i - pi] * by[j - pj]
                out[(i, j)] = total
        return out


def _binom(n, k):
    from math import comb

    return comb(n, k)


@dataclass(frozen=True)
class VectorTestField:
    """w = (chi_1, chi_2), or the rotated gradient (d2 chi, -d1 chi) when ``divergence_free``."""

    first: PolynomialBump
    second: PolynomialBump | None = None
    divergence_free: bool = False

    def gradient(self, x, y):
        """w and its Jacobian: (w1, w2, d1w1, d2w1, d1w2, d2w2)."""
        if self.divergence_free:
            d = self.first.derivatives(x, y)
            w1, w2 = d[(0, 1)], -d[(1, 0)]
            return w1, w2, d[(1, 1)], d[(0, 2)], -d[(2, 0)], -d[(1, 1)]
        d1 = self.first.derivatives(x, y)
        d2 = (self.second or self.first).derivatives(x, y)
        return d1[(0, 0)], d2[(0, 0)], d1[(1, 0)], d1[(0, 1)], d2[(1, 0)], d2[(0, 1)]


def default_test_field(divergence_free=False):
    bump = PolynomialBump(center=(0.2, -0.1), half_width=1.6, power=6, coeffs=((1.0, 0.5), (0.3, -0.7)))
    other = PolynomialBump(center=(0.2, -0.1), half_width=1.6, power=6, coeffs=((0.4, 0.0, 1.0), (-1.0, 0.2, 0.0)))
    return VectorTestField(bump, other, divergence_free)


@dataclass(frozen=True)
class EulerResidual:
    continuity: float
    momentum: float
    continuity_scale: float
    momentum_scale: float
    continuity_error: float
    momentum_error: float

    @property
    def continuity_normalized(self):
        return self.continuity / self.continuity_scale if self.continuity_scale else 0.0

    @property
    def momentum_normalized(self):
        return self.momentum / self.momentum_scale if self.momentum_scale else 0.0


def _weak_integrals(flow, test, scalar, spec):
    cont = mom = 0.0
    cont_abs = mom_abs = 0.0
    for which in (DOMAIN, HOLE):
        X, Y, W = region_nodes(flow, which, spec)
        v1, v2 = flow.velocity(X, Y)
        p = flow.pressure(X, Y)
        w1, w2, w11, w12, w21, w22 = test.gradient(X, Y)
        m = v1 * v1 * w11 + v1 * v2 * (w12 + w21) + v2 * v2 * w22 + p * (w11 + w22)
        d = scalar.derivatives(X, Y)
        c = v1 * d[(1, 0)] + v2 * d[(0, 1)]
        mom += np.sum(W * m)
        mom_abs += np.sum(W * np.abs(m))
        cont += np.sum(W * c)
        cont_abs += np.sum(W * np.abs(c))
    return cont, mom, cont_abs, mom_abs


def weak_euler_residual(flow: FlowField, test_field: VectorTestField | None = None,
                        scalar_test: PolynomialBump | None = None,
                        spec: QuadratureSpec = QuadratureSpec()) -> EulerResidual:
    """|int v . grad phi| and |int (v_i v_j d_i w_j + p div w)| with quadrature error bars.

    v and p vanish outside the closed domain and its hole, so only those two
    regions are integrated.  Scales are the integrals of the absolute
    integrands; error bars come from one refinement of the quadrature.
    """
    test = test_field or default_test_field()
    scalar = scalar_test or test.first
    c0, m0, ca, ma = _weak_integrals(flow, test, scalar, spec)
    c1, m1, _, _ = _weak_integrals(flow, test, scalar, spec.refined())
    return EulerResidual(abs(c1), abs(m1), ca, ma, abs(c1 - c0), abs(m1 - m0))


def momentum_residual_fd(flow: FlowField, points: int = 40, step: float = 1e-3):
    """sup |v . grad v + grad p| over interior nodes of the domain, by 4th-order differences.

    Returns (residual, scale) with scale = sup |grad p| on the same nodes.
    """
    th = np.linspace(0, 2 * np.pi, points, endpoint=False)
    s = np.linspace(0.1, 0.9, points // 2)
    T, S = np.meshgrid(th, s)
    rho = flow.inner_radius(T) + S * (flow.outer_radius(T) - flow.inner_radius(T))
    X, Y = rho * np.cos(T), rho * np.sin(T)

    def d(f, X, Y, axis):
        e = np.array([step, 0.0]) if axis == 0 else np.array([0.0, step])
        vals = [f(X + k * e[0], Y + k * e[1]) for k in (-2, -1, 1, 2)]
        return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * step)

    v1, v2 = flow.velocity(X, Y)
    f1 = lambda x, y: flow.velocity(x, y)[0]
    f2 = lambda x, y: flow.velocity(x, y)[1]
    px, py = d(flow.pressure, X, Y, 0), d(flow.pressure, X, Y, 1)
    r1 = v1 * d(f1, X, Y, 0) + v2 * d(f1, X, Y, 1) + px
    r2 = v1 * d(f2, X, Y, 0) + v2 * d(f2, X, Y, 1) + py
    return float(np.max(np.hypot(r1, r2))), float(np.max(np.hypot(px, py)))


# --- Pompeiu identity ---------------------------------------------------------

@dataclass(frozen=True)
class RigidMotion:
    """x -> Q(angle) x + translation."""

    angle: float = 0.0
    translation: tuple = (0.0, 0.0)

    def apply(self, x, y):
        c, s = np.cos(self.angle), np.sin(self.angle)
        return c * x - s * y + self.translation[0], s * x + c * y + self.translation[1]

    def inverse(self, x, y):
        c, s = np.cos(self.angle), np.sin(self.angle)
        x0, y0 = x - self.translation[0], y - self.translation[1]
        return c * x0 + s * y0, -s * x0 + c * y0


def random_motions(count: int, seed: int = 0, box: float = 2.0):
    """Rotations uniform on [0, 2 pi), translations uniform on [-box, box]^2."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        angle = rng.uniform(0.0, 2 * np.pi)
        t = rng.uniform(-box, box, size=2)
        out.append(RigidMotion(float(angle), (float(t[0]), float(t[1]))))
    return out


@dataclass
class PompeiuData:
    """Weight c = c2/c1 - 1, test function f(x) = sin(freq * x1) and the potential w."""

    flow: FlowField
    c: float
    frequency: float

    @property
    def a(self):
        return self.flow.a

    @property
    def pert(self):
        return self.flow.pert

    def f(self, x, y):
        return np.sin(self.frequency * x)

    def potential(self, x, y):
        """w: (1 - u/c1)/mu on the closed domain, -c/mu on the hole, 0 outside."""
        flow = self.flow
        reg = flow.region(x, y)
        u, _, _ = flow.u_and_gradient(x, y)
        w = np.zeros(reg.shape)
        dom = reg == DOMAIN
        w[dom] = (1 - u[dom] / flow.c1) / flow.mu
        w[reg == HOLE] = -self.c / flow.mu
        return w

    def potential_gradient(self, x, y):
        flow = self.flow
        reg = flow.region(x, y)
        _, ux, uy = flow.u_and_gradient(x, y)
        gx = np.where(reg == DOMAIN, -np.nan_to_num(ux) / (flow.c1 * flow.mu), 0.0)
        gy = np.where(reg == DOMAIN, -np.nan_to_num(uy) / (flow.c1 * flow.mu), 0.0)
        return gx, gy

    @property
    def scale(self):
        """(area(Omega) + c area(Omega')) * sup |f|."""
        spec = QuadratureSpec(16, 256)
        area = np.sum(region_nodes(self.flow, DOMAIN, spec)[2])
        hole = np.sum(region_nodes(self.flow, HOLE, spec)[2])
        return float(area + self.c * hole)


def pompeiu_data(flow: FlowField, frequency: float | None = None, require_positive: bool = True) -> PompeiuData:
    c = flow.c2 / flow.c1 - 1.0
    if require_positive and not c > 0:
        raise NumericalError(f"weight c = {c:.6g} is not positive")
    return PompeiuData(flow, float(c), float(np.sqrt(flow.mu) if frequency is None else frequency))


def _pompeiu_value(data, motion, spec):
    total = 0.0
    for which, weight in ((DOMAIN, 1.0), (HOLE, -data.c)):
        X, Y, W = region_nodes(data, which, spec)
        Xm, Ym = motion.apply(X, Y)
        total += weight * np.sum(W * data.f(Xm, Ym))
    return total


def pompeiu_integral(data: PompeiuData, motion: RigidMotion = RigidMotion(),
                     spec: QuadratureSpec = QuadratureSpec(), with_error: bool = False):
    """int_{R(Omega)} f - c int_{R(Omega')} f, computed in the body frame."""
    v0 = _pompeiu_value(data, motion, spec)
    v1 = _pompeiu_value(data, motion, spec.refined())
    return (v1, abs(v1 - v0)) if with_error else v1
