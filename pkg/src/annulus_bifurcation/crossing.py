"""Crossing radii a_l where the second radial Neumann eigenvalue meets the
first Dirichlet eigenvalue of mode l, with their certificates.

The crossing is a root of F(a) = mu_{0,2}(a) - lambda_{l,0}(a).  F < 0 for
small a and F > 0 as a -> 1, and the root is isolated by Brent's method.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import BracketError, DegenerateDenominatorError
from .radial_spectrum import (
    DIRICHLET,
    NEUMANN,
    AnnulusGeometry,
    radial_eigenvalues,
)

NEUMANN_SECOND_RADIAL = "neumann_second_radial"
DIRICHLET_FIRST = "dirichlet_first"

A_TOL = 1e-10
NR_FAIL_MARGIN = 1e-6
DEFAULT_SAFETY_MARGIN = 0.5
_Q_THRESHOLD = 1e-12


@dataclass(frozen=True)
class AsymptoticFrame:
    """Small parameters of the thin-annulus expansion.

    h = (1 - a)/pi, eta = sqrt(3)/l, h = eta (1 + epsilon) and
    epsilon = -(pi/2) eta (1 + delta).
    """

    h: float
    eta: float
    epsilon: float
    delta: float

    @classmethod
    def from_annulus(cls, a, l):
        h = (1.0 - a) / np.pi
        eta = np.sqrt(3.0) / l
        eps = h / eta - 1.0
        delta = -2.0 * eps / (np.pi * eta) - 1.0
        return cls(float(h), float(eta), float(eps), float(delta))

    def inner_radius(self):
        return 1.0 - np.pi * self.h


@dataclass(frozen=True)
class CrossingCertificate:
    """Crossing radius a_l with transversality and non-resonance data.

    ``nr_margin`` is the smallest relative gap between the shared value and
    the other symmetric Dirichlet eigenvalues lambda_{ml,n}, (m, n) != (1, 0).
    """

    l: int
    a_l: float
    shared_value: float
    mu_prime: float
    lambda_prime: float
    transversality_gap: float
    crossing_residual: float
    nr_margin: float | None = None
    enumeration_bound: tuple | None = None
    nearest_resonance: tuple | None = None
    safety_margin: float | None = None
    tolerances: dict = field(default_factory=dict)

    @property
    def passed(self):
        ok = self.transversality_gap > 0 and self.crossing_residual <= 1e-8 * self.shared_value
        if self.nr_margin is not None:
            ok = ok and self.nr_margin >= NR_FAIL_MARGIN
        return bool(ok)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["passed"] = self.passed
        return d


def mu02(a):
    return float(radial_eigenvalues(AnnulusGeometry(a), 0, 3, NEUMANN)[2])


def lambda_l0(a, l):
    return float(radial_eigenvalues(AnnulusGeometry(a), l, 1, DIRICHLET)[0])


def crossing_function(a, l):
    """F(a) = mu_{0,2}(a) - lambda_{l,0}(a)."""
    return mu02(a) - lambda_l0(a, l)


def first_order_crossing(l):
    return 1.0 - np.sqrt(3.0) * np.pi / l


def second_order_crossing(l):
    return 1.0 - np.sqrt(3.0) * np.pi / l + 1.5 * np.pi**2 / l**2


def crossing_bracket(l):
    if l < 8:
        return 0.05, 0.9
    c = second_order_crossing(l)
    return max(0.02, c - 0.3), min(0.98, c + 0.3)


def derivative_closed_form(kind: str, l: int, a: float, value: float) -> float:
    """a-derivative of mu_{0,2} or lambda_{l,0} from implicit differentiation.

    Evaluates P/Q for the boundary function whose zero at r = a defines the
    eigenvalue; ``value`` must be the eigenvalue at ``a``.
    """
    k = np.sqrt(value)
    ka = k * a
    J, Y = special.jv, special.yv
    if kind == NEUMANN_SECOND_RADIAL:
        P = value**1.5 * np.pi * Y(1, k) * (
            Y(1, k) * (J(2, ka) - J(0, ka)) - J(1, k) * (Y(2, ka) - Y(0, ka))
        )
        Q = 2 * Y(1, ka) + np.pi * Y(1, k) * (
            Y(1, k) * (ka * J(0, ka) - J(1, ka)) - J(1, k) * (ka * Y(0, ka) - Y(1, ka))
        )
    elif kind == DIRICHLET_FIRST:
        P = value**1.5 * np.pi * Y(l, k) * (
            Y(l, k) * (J(l + 1, ka) - J(l - 1, ka)) - J(l, k) * (Y(l + 1, ka) - Y(l - 1, ka))
        )
        Q = 2 * Y(l, ka) + np.pi * Y(l, k) * (
            Y(l, k) * (ka * J(l - 1, ka) - l * J(l, ka)) - J(l, k) * (ka * Y(l - 1, ka) - l * Y(l, ka))
        )
    else:
        raise ValueError(f"unknown derivative kind {kind!r}")
    scale = max(abs(P), 1.0)
    if not np.isfinite(Q) or abs(Q) < _Q_THRESHOLD * scale / max(value**1.5, 1.0):
        raise DegenerateDenominatorError(f"denominator Q={Q!r} is degenerate ({kind}, l={l}, a={a})")
    return float(P / Q)


def find_crossing(l: int, check_nr: bool = True, safety_margin: float = DEFAULT_SAFETY_MARGIN,
                  bracket: tuple | None = None) -> CrossingCertificate:
    """Crossing radius a_l for mode l >= 4 and its certificate.

    ``bracket`` overrides the default search interval (must straddle the root).
    """
    if int(l) != l or l < 4:
        raise ValueError(f"crossing requires an integer l >= 4, got {l!r}")
    l = int(l)
    lo, hi = crossing_bracket(l) if bracket is None else bracket
    f_lo, f_hi = crossing_function(lo, l), crossing_function(hi, l)
    if not (f_lo < 0 < f_hi):
        raise BracketError(f"F(a) does not change sign on [{lo}, {hi}] for l={l}: F={f_lo:.3g}, {f_hi:.3g}")
    a_l = brentq(crossing_function, lo, hi, args=(l,), xtol=A_TOL, rtol=4 * np.finfo(float).eps)
    mu = mu02(a_l)
    lam = lambda_l0(a_l, l)
    shared = 0.5 * (mu + lam)
    mu_p = derivative_closed_form(NEUMANN_SECOND_RADIAL, l, a_l, mu)
    lam_p = derivative_closed_form(DIRICHLET_FIRST, l, a_l, lam)
    cert = CrossingCertificate(
        l=l,
        a_l=float(a_l),
        shared_value=float(shared),
        mu_prime=mu_p,
        lambda_prime=lam_p,
        transversality_gap=float(abs(mu_p - lam_p)),
        crossing_residual=float(abs(mu - lam)),
        tolerances={"a_tol": A_TOL, "crossing_rel_tol": 1e-8, "nr_fail_margin": NR_FAIL_MARGIN},
    )
    if check_nr:
        cert = check_nonresonance(cert, safety_margin)
    return cert


def check_nonresonance(cert: CrossingCertificate, safety_margin: float = DEFAULT_SAFETY_MARGIN) -> CrossingCertificate:
    """Enumerate lambda_{ml,n}(a_l) <= shared (1 + margin), (m, n) != (1, 0).

    Eigenvalues increase with the mode and with n, so the m-loop ends at the
    first m whose n = 0 value exceeds the window and each n-loop ends at the
    first value above it.
    """
    geom = AnnulusGeometry(cert.a_l)
    level = cert.shared_value
    window = level * (1.0 + safety_margin)
    margin = np.inf
    nearest = None
    m = 0
    m_max = n_max = 0
    while True:
        mode = m * cert.l
        count = 1
        while True:
            vals = radial_eigenvalues(geom, mode, count, DIRICHLET)
            n = count - 1
            v = vals[-1]
            if (m, n) != (1, 0):
                gap = abs(v - level) / level
                if gap < margin:
                    margin, nearest = gap, (m, n, float(v))
            n_max = max(n_max, n)
            if v > window:
                break
            count += 1
        m_max = m
        if vals[0] > window:
            break
        m += 1
    return dataclasses.replace(
        cert,
        nr_margin=float(margin),
        enumeration_bound=(m_max, n_max),
        nearest_resonance=nearest,
        safety_margin=float(safety_margin),
    )


@dataclass(frozen=True)
class AsymptoticReport:
    l: int
    a_numeric: float
    a_first_order: float
    a_second_order: float
    residual_first_order: float
    residual_second_order: float


def asymptotic_check(l: int) -> AsymptoticReport:
    """Compare a_l with its first- and second-order large-l expansions."""
    cert = find_crossing(l, check_nr=False)
    a1 = first_order_crossing(l)
    a2 = second_order_crossing(l)
    return AsymptoticReport(l, cert.a_l, float(a1), float(a2), float(cert.a_l - a1), float(cert.a_l - a2))


def thin_annulus_slopes(cert: CrossingCertificate) -> tuple[float, float]:
    """h-derivatives of h^2 mu_{0,2} and h^2 lambda_{l,0} at the crossing, a = 1 - pi h.

    d/dh [h^2 E(a)] = 2 h E - pi h^2 E'(a).  For large l the Dirichlet slope
    grows like l while the Neumann one stays bounded.
    """
    h = (1.0 - cert.a_l) / np.pi
    nu_h = 2 * h * cert.shared_value - np.pi * h * h * cert.mu_prime
    lam_h = 2 * h * cert.shared_value - np.pi * h * h * cert.lambda_prime
    return float(nu_h), float(lam_h)
