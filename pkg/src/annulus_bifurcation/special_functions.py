"""Bessel functions of integer order and the positive zeros of J_n.

Values come from ``scipy.special`` (Cephes/AMOS); this module adds the
domain checks, the overflow signal and an in-house zero finder.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import BesselOverflowError

MAX_ORDER = 200

# |Y_n(x)| is reported as overflow once it exceeds this.  For n = 0 that
# never happens for x >= 5e-324; for n = 200 it happens below x ~ 1.6.
OVERFLOW_THRESHOLD = 1e300


@dataclass(frozen=True)
class BesselPair:
    """J_n, Y_n and their derivatives at a single point."""

    order: int
    argument: float
    J: float
    Y: float
    dJ: float
    dY: float


def _check_order(order):
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds supported maximum {MAX_ORDER}")
    return int(order)


def bessel_eval(order: int, x: float) -> BesselPair:
    """Evaluate J_n(x), Y_n(x), J_n'(x), Y_n'(x).

    Raises
    ------
    ValueError
        If ``x <= 0`` or the order is out of range.
    BesselOverflowError
        If Y_n(x) or Y_n'(x) is not finite or exceeds ``OVERFLOW_THRESHOLD``.
    """
    n = _check_order(order)
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"Bessel argument must be positive, got {x}")
    with np.errstate(all="ignore"):
        J = float(special.jv(n, x))
        Y = float(special.yv(n, x))
        dJ = float(special.jvp(n, x))
        dY = float(special.yvp(n, x))
    if not (np.isfinite(Y) and np.isfinite(dY)) or max(abs(Y), abs(dY)) > OVERFLOW_THRESHOLD:
        raise BesselOverflowError(f"Y_{n}({x}) overflows double precision")
    return BesselPair(n, x, J, Y, dJ, dY)


def jy(order, x, derivative=False):
    """Vectorized (J_n(x), Y_n(x)) or their derivatives, no overflow checks.

    Y may be -inf (or +inf for the derivative) at tiny x; callers that
    combine J and Y must handle that themselves.
    """
    with np.errstate(all="ignore"):
        if derivative:
            return special.jvp(order, x), special.yvp(order, x)
        return special.jv(order, x), special.yv(order, x)


def _mcmahon(n, k):
    # large-k expansion of j_{n,k}
    mu = 4.0 * n * n
    beta = (k + 0.5 * n - 0.25) * np.pi
    e = 8.0 * beta
    return beta - (mu - 1) / e - 4 * (mu - 1) * (7 * mu - 31) / (3 * e**3)


def _zero_brackets(n, k):
    """Sign brackets for the first k zeros of J_n.

    Consecutive zeros are more than 3 apart for every n >= 0 and
    j_{n,1} > n, so a unit step starting at x = n never skips a zero.
    """
    x0 = max(float(n), 1e-3)
    brackets = []
    step, chunk = 1.0, 256
    while len(brackets) < k:
        xs = x0 + step * np.arange(chunk + 1)
        f = special.jv(n, xs)
        s = np.sign(f)
        idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
        for i in idx:
            if f[i] == 0.0:
                brackets.append((xs[i], xs[i]))
            elif f[i + 1] != 0.0:
                brackets.append((xs[i], xs[i + 1]))
            if len(brackets) == k:
                break
        x0 = xs[-1]
    return brackets


def bessel_zero(order: int, k: int) -> float:
    """k-th positive zero of J_order.

    A McMahon guess seeds Newton's method on J; if an iterate leaves the
    sign bracket found by a coarse scan the bracket is solved with Brent's
    method instead.
    """
    n = _check_order(order)
    if int(k) != k or k < 1:
        raise ValueError(f"zero index must be a positive integer, got {k!r}")
    k = int(k)
    lo, hi = _zero_brackets(n, k)[-1]
    if lo == hi:
        return float(lo)
    x = _mcmahon(n, k)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(50):
        f = special.jv(n, x)
        df = special.jvp(n, x)
        step = f / df
        x_new = x - step
        if not lo < x_new < hi:
            break
        if abs(step) <= 1e-15 * x_new:
            return float(x_new)
        x = x_new
    return float(brentq(lambda t: special.jv(n, t), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
