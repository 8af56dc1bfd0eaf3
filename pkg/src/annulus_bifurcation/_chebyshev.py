"""Chebyshev collocation helpers (Gauss-Lobatto points)."""
import numpy as np
from scipy.interpolate import BarycentricInterpolator


def cheb_diff(N):
    """Differentiation matrix and nodes x_j = cos(pi j / N), j = 0..N.

    Trefethen's construction with the negative-sum trick on the diagonal.
    """
    if N == 0:
        return np.zeros((1, 1)), np.ones(1)
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** np.arange(N + 1)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


def interpolation_matrix(nodes, targets):
    """Matrix mapping values at ``nodes`` to values at ``targets``."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    eye = np.eye(len(nodes))
    return BarycentricInterpolator(nodes, eye)(targets)
