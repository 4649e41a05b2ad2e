"""Independent reference computations used as test oracles.

Fractional weights come from the binomial series ``c_k = (-1)^k binom(d, k)``
or exact rational products, and grid objectives from dense Toeplitz products,
so none of them share code with the recursions under test.  The
finite-difference checker differentiates ``residuals`` numerically; it tests
the analytic derivatives, not the residuals themselves.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import binom

from cpwald.farima import DomainError, FarimaParams, residuals, score_panel


def binomial_weights(d: np.ndarray, K: int) -> np.ndarray:
    d = np.atleast_1d(np.asarray(d, dtype=float))
    k = np.arange(K + 1)
    return (-1.0) ** k * binom(d[:, None], k[None, :])


def grid_objective(y: np.ndarray, grid: np.ndarray, chunk: int = 400) -> np.ndarray:
    """``sum_t e_t(d)^2`` for every ``d`` in ``grid`` with zero presample."""
    y = np.asarray(y, dtype=float)
    n = y.size
    Y = toeplitz(y, np.zeros(n))  # Y[t, i] = y[t - i]
    out = np.empty(grid.size)
    for s in range(0, grid.size, chunk):
        C = binomial_weights(grid[s : s + chunk], n - 1)
        E = C @ Y.T
        out[s : s + chunk] = np.einsum("gt,gt->g", E, E)
    return out


def grid_argmin(y: np.ndarray, lo: float, hi: float, step: float = 1e-4) -> float:
    grid = np.round(np.arange(lo, hi + step / 2, step), 12)
    grid = grid[(grid >= lo) & (grid <= hi)]
    return float(grid[np.argmin(grid_objective(y, grid))])


def exact_product(d: Fraction, k: int, sign: int) -> Fraction:
    """(sign d)(sign d + 1)...(sign d + k - 1) / k! with sign = -1 for c_k, +1 for m_k."""
    out = Fraction(1)
    for r in range(k):
        out *= sign * d + r
    for r in range(1, k + 1):
        out /= r
    return out


def random_instance(rng):
    p, q = rng.integers(0, 3), rng.integers(0, 3)
    while True:
        try:
            params = FarimaParams(rng.uniform(0.05, 0.45), tuple(rng.uniform(-0.6, 0.6, p)), tuple(rng.uniform(-0.6, 0.6, q)))
            break
        except DomainError:
            continue
    y = rng.standard_normal(int(rng.integers(20, 120)))
    return params, y


def fd_check(rng, instances: int = 100, h: float = 1e-6):
    worst_g = worst_h = 0.0
    for _ in range(instances):
        params, y = random_instance(rng)
        lam, p, q = params.vector, params.p, params.q
        pan = score_panel(params, y)
        t = int(rng.integers(0, y.size))
        for a in range(lam.size):
            e = np.zeros_like(lam)
            e[a] = h
            up, dn = FarimaParams.from_vector(lam + e, p, q), FarimaParams.from_vector(lam - e, p, q)
            g_fd = (residuals(up, y) - residuals(dn, y)) / (2 * h)
            h_fd = (score_panel(up, y).grad - score_panel(dn, y).grad) / (2 * h)
            sg = max(np.abs(g_fd).max(), 1e-300)
            sh = max(np.abs(h_fd).max(), 1e-300)
            worst_g = max(worst_g, abs(pan.grad[t, a] - g_fd[t]) / max(abs(g_fd[t]), 1e-3 * sg))
            worst_h = max(worst_h, np.max(np.abs(pan.hess[t, :, a] - h_fd[t]) / np.maximum(np.abs(h_fd[t]), 1e-3 * sh)))
    return worst_g, worst_h
