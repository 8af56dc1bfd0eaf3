"""Radial Neumann and Dirichlet eigenpairs of the annulus a < r < 1.

For angular mode l the radial problem is

    u'' + u'/r + (value - l**2 / r**2) u = 0  on (a, 1)

with u' = 0 (Neumann) or u = 0 (Dirichlet) at both ends.  Eigenvalues are
the roots in t = sqrt(value) of the cross-product determinant built from
J_l, Y_l (or their derivatives) at t*a and t.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import BracketError, InsufficientEnumerationError, NumericalError
from .special_functions import MAX_ORDER, bessel_zero, jy

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
BCS = (NEUMANN, DIRICHLET)

A_MIN = 1e-4
A_MAX = 1.0 - 1e-4
N_MAX = 50

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)
_SIGN_GRID = 2048


@dataclass(frozen=True)
class AnnulusGeometry:
    """Annulus with inner radius ``a`` and outer radius 1."""

    a: float

    def __post_init__(self):
        a = float(self.a)
        if not A_MIN <= a <= A_MAX:
            raise ValueError(f"inner radius must lie in [{A_MIN}, {A_MAX}], got {a}")
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class EigenIndex:
    l: int
    n: int


@dataclass(frozen=True)
class RadialEigenpair:
    """One radial eigenvalue and its eigenfunction coeff_a*J_l + coeff_b*Y_l.

    The eigenfunction has unit norm in L^2((a, 1), r dr).  Sign convention:
    Dirichlet functions have positive slope at r = a, Neumann functions are
    positive at r = a.
    """

    index: EigenIndex
    bc: str
    value: float
    coeff_a: float
    coeff_b: float
    geometry: AnnulusGeometry

    @property
    def l(self):
        return self.index.l

    @property
    def n(self):
        return self.index.n

    @property
    def a(self):
        return self.geometry.a

    @property
    def k(self):
        """Wavenumber sqrt(value)."""
        return float(np.sqrt(self.value))

    def __call__(self, r):
        return eval_eigenfunction(self, r)[0]


def _check_args(bc, l, n):
    if bc not in BCS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if int(l) != l or not 0 <= l <= MAX_ORDER:
        raise ValueError(f"angular mode must be an integer in [0, {MAX_ORDER}], got {l!r}")
    if int(n) != n or not 0 <= n <= N_MAX:
        raise ValueError(f"radial index must be an integer in [0, {N_MAX}], got {n!r}")


def _inner_coefficients(bc, l, ta):
    """Unit vector (cJ, cY) proportional to (f_J(ta), f_Y(ta)).

    f is the identity (Dirichlet) or the derivative (Neumann).  When f_Y
    overflows the vector degenerates to (0, sign f_Y), the limit in which the
    inner boundary is invisible to the eigenfunction.
    """
    fJ, fY = jy(l, ta, derivative=(bc == NEUMANN))
    fJ = np.asarray(fJ, dtype=float)
    fY = np.asarray(fY, dtype=float)
    # Y_l -> -inf and Y_l' -> +inf as x -> 0+; yvp can return nan there
    limit_sign = 1.0 if bc == NEUMANN else -1.0
    bad = ~np.isfinite(fY) | (np.abs(fY) > 1e300)
    fY = np.where(bad, limit_sign, fY)
    fJ = np.where(bad, 0.0, fJ)
    norm = np.hypot(fJ, fY)
    return fJ / norm, fY / norm


def cross_product(bc: str, l: int, a: float, t):
    """Normalized determinant whose roots in t are sqrt(eigenvalue)."""
    t = np.asarray(t, dtype=float)
    cJ, cY = _inner_coefficients(bc, l, t * a)
    fJ, fY = jy(l, t, derivative=(bc == NEUMANN))
    return cJ * fY - cY * fJ


def _scan_roots(bc, l, a, count):
    """First ``count`` positive roots of the determinant, in increasing order."""
    # eigenvalues of mode l > 0 exceed l**2, so the scan starts at t = l
    t0 = float(l) if l > 0 else 1e-3
    dt = np.pi / (20.0 * (1.0 - a))
    # generous cap: Rayleigh comparison with l^2/a^2 + ((n+1) pi/(1-a))^2
    t_cap = 1.5 * np.sqrt((l / a) ** 2 + ((count + 2) * np.pi / (1.0 - a)) ** 2) + 10.0
    chunk = 256
    roots = []
    f = lambda t: float(cross_product(bc, l, a, t))
    while len(roots) < count:
        if t0 > t_cap:
            raise BracketError(
                f"scan up to t={t_cap:.3g} isolated {len(roots)} of {count} roots "
                f"({bc}, l={l}, a={a})"
            )
        ts = t0 + dt * np.arange(chunk + 1)
        vals = cross_product(bc, l, a, ts)
        if not np.all(np.isfinite(vals)):
            raise NumericalError(f"non-finite determinant in scan ({bc}, l={l}, a={a})")
        s = np.sign(vals)
        for i in np.nonzero(s[:-1] * s[1:] <= 0)[0]:
            lo, hi = ts[i], ts[i + 1]
            if vals[i] == 0.0:
                root = lo
            elif vals[i + 1] == 0.0:
                continue  # picked up as the left end of the next interval
            else:
                root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            if not roots or root > roots[-1]:
                roots.append(root)
            if len(roots) == count:
                break
        t0 = ts[-1]
    return roots


@lru_cache(maxsize=4096)
def _eigenvalues_cached(bc, l, a, count):
    roots = _scan_roots(bc, l, a, count)
    return tuple(t * t for t in roots)


def radial_eigenvalues(geometry: AnnulusGeometry, l: int, count: int, bc: str) -> np.ndarray:
    """The ``count`` smallest radial eigenvalues of mode ``l``.

    For the Neumann problem with l = 0 the first entry is the zero
    eigenvalue of the constant function.
    """
    _check_args(bc, l, max(count - 1, 0))
    if count <= 0:
        return np.empty(0)
    if bc == NEUMANN and l == 0:
        rest = _eigenvalues_cached(bc, 0, geometry.a, count - 1) if count > 1 else ()
        return np.array((0.0,) + rest)
    return np.array(_eigenvalues_cached(bc, int(l), geometry.a, int(count)))


def _build_pair(geometry, l, n, bc, value):
    a = geometry.a
    if value == 0.0:
        c = np.sqrt(2.0 / (1.0 - a * a))
        return RadialEigenpair(EigenIndex(l, n), bc, 0.0, c, 0.0, geometry)
    t = np.sqrt(value)
    cJ, cY = _inner_coefficients(bc, l, t * a)
    pair = RadialEigenpair(EigenIndex(l, n), bc, float(value), float(cY), float(-cJ), geometry)
    r = 0.5 * (1 - a) * _GL_NODES + 0.5 * (1 + a)
    u, _ = eval_eigenfunction(pair, r)
    norm = np.sqrt(0.5 * (1 - a) * np.sum(_GL_WEIGHTS * u * u * r))
    sign = _boundary_sign(pair)
    scale = sign / norm
    pair = RadialEigenpair(
        pair.index, bc, pair.value, float(pair.coeff_a * scale), float(pair.coeff_b * scale), geometry
    )
    _assert_nodal_count(pair)
    return pair


def _boundary_sign(pair):
    u_a, du_a = eval_eigenfunction(pair, pair.a)
    ref = du_a if pair.bc == DIRICHLET else u_a
    if ref != 0.0 and np.isfinite(ref):
        return float(np.sign(ref))
    # value underflows at r=a (large l, tiny a): use the first sample that
    # rises above roundoff, i.e. the sign on a right-neighborhood of a
    u, _ = eval_eigenfunction(pair, np.linspace(pair.a, 1.0, _SIGN_GRID))
    big = np.nonzero(np.abs(u) > 1e-10 * np.max(np.abs(u)))[0]
    if big.size == 0:
        raise NumericalError("eigenfunction sign at r=a is undetermined")
    return float(np.sign(u[big[0]]))


def sign_changes(pair: RadialEigenpair, points: int = _SIGN_GRID) -> int:
    """Number of sign changes of the eigenfunction on (a, 1)."""
    a = pair.a
    r = np.linspace(a, 1.0, points)[1:-1]
    u, _ = eval_eigenfunction(pair, r)
    # ignore values at roundoff level near the boundary layer of large l
    keep = np.abs(u) > 1e-10 * np.max(np.abs(u))
    s = np.sign(u[keep])
    return int(np.count_nonzero(s[:-1] != s[1:]))


def _assert_nodal_count(pair):
    count = sign_changes(pair)
    if count != pair.n:
        raise NumericalError(
            f"{pair.bc} eigenfunction (l={pair.l}, n={pair.n}) has {count} sign changes"
        )


def neumann_eigenvalue(geometry: AnnulusGeometry, l: int, n: int) -> RadialEigenpair:
    """n-th Neumann eigenpair of mode l (n = 0 is the smallest)."""
    _check_args(NEUMANN, l, n)
    values = radial_eigenvalues(geometry, l, n + 1, NEUMANN)
    return _build_pair(geometry, int(l), int(n), NEUMANN, values[n])


def dirichlet_eigenvalue(geometry: AnnulusGeometry, l: int, n: int) -> RadialEigenpair:
    """n-th Dirichlet eigenpair of mode l (n = 0 is the smallest)."""
    _check_args(DIRICHLET, l, n)
    values = radial_eigenvalues(geometry, l, n + 1, DIRICHLET)
    return _build_pair(geometry, int(l), int(n), DIRICHLET, values[n])


def radial_eigenpair(geometry: AnnulusGeometry, l: int, n: int, bc: str) -> RadialEigenpair:
    if bc == NEUMANN:
        return neumann_eigenvalue(geometry, l, n)
    if bc == DIRICHLET:
        return dirichlet_eigenvalue(geometry, l, n)
    raise ValueError(f"unknown boundary condition {bc!r}")


def eval_eigenfunction(pair: RadialEigenpair, r):
    """Eigenfunction and its r-derivative at ``r`` (scalar or array in [a, 1])."""
    r_arr = np.asarray(r, dtype=float)
    a = pair.a
    tol = 1e-12
    if np.any(r_arr < a - tol) or np.any(r_arr > 1.0 + tol):
        raise ValueError(f"r must lie in [{a}, 1]")
    r_arr = np.clip(r_arr, a, 1.0)
    t = pair.k
    l = pair.l
    x = t * r_arr
    u = np.zeros_like(x)
    du = np.zeros_like(x)
    with np.errstate(all="ignore"):
        if pair.coeff_a != 0.0:
            u = u + pair.coeff_a * special.jv(l, x)
            du = du + pair.coeff_a * t * special.jvp(l, x)
        if pair.coeff_b != 0.0:
            u = u + pair.coeff_b * special.yv(l, x)
            du = du + pair.coeff_b * t * special.yvp(l, x)
    if np.ndim(r) == 0:
        return float(u), float(du)
    return u, du


def eval_second_derivative(pair: RadialEigenpair, r):
    """u''(r) from the ODE: u'' = -u'/r + (l^2/r^2 - value) u."""
    u, du = eval_eigenfunction(pair, r)
    r = np.asarray(r, dtype=float)
    out = -du / r + (pair.l**2 / r**2 - pair.value) * u
    return float(out) if np.ndim(out) == 0 else out


def annulus_spectrum_rank(geometry: AnnulusGeometry, target: RadialEigenpair, l_max: int = 60, n_max: int = 20) -> int:
    """Position k of ``target.value`` in the full annulus spectrum, mu_0 = 0 first.

    Counts eigenvalues strictly below the target with multiplicity (modes
    l >= 1 count twice).  Eigenvalues increase in both l and n, so the
    enumeration is complete once a row starts above the target.
    """
    if target.geometry != geometry:
        raise ValueError("target was computed on a different geometry")
    bc = target.bc
    level = target.value
    tie = 1e-9 * max(level, 1.0)
    rank = 0
    for l in range(0, l_max + 1):
        mult = 1 if l == 0 else 2
        below = 0
        terminated = False
        for count in range(1, n_max + 2):
            vals = radial_eigenvalues(geometry, l, count, bc)
            if vals[-1] >= level - tie:
                terminated = True
                break
            below += 1
        if not terminated:
            raise InsufficientEnumerationError(
                f"mode l={l} still below target after n_max={n_max}"
            )
        if below == 0:
            return rank
        rank += mult * below
    raise InsufficientEnumerationError(f"mode l={l_max} still has eigenvalues below target")


def disk_limit_eigenvalue(l: int, k: int) -> float:
    """Dirichlet eigenvalue j_{l,k+1}^2 of the unit disk."""
    if int(k) != k or not 0 <= k <= N_MAX:
        raise ValueError(f"index must be an integer in [0, {N_MAX}], got {k!r}")
    return bessel_zero(l, k + 1) ** 2
