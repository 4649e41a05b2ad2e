"""Numba kernels for the FARIMA(0, d, 0) quasi-likelihood scan.

The residual of a segment ``y[start:stop]`` (zero presample) at fractional
order ``d`` is ``e_t = sum_{i<=t} c_i(d) y_{start+t-i}``.  Its first and second
derivatives in ``d`` use the coefficients of ``log^j(1-B) (1-B)^d``, obtained
here from the product form of ``c_i`` by logarithmic differentiation::

    c_i  = prod_{r=1}^{i} (r - 1 - d) / r
    a1_i = c_i * S1_i,          S1_i = sum_{r=1}^{i} 1 / (d + 1 - r)
    a2_i = c_i * (S1_i^2 - S2_i), S2_i = sum_{r=1}^{i} 1 / (d + 1 - r)^2

with the r = 1 term of each sum split off analytically.

Everything a Wald evaluation needs is accumulated in one pass over the
segment: ``A = sum e^2``, ``B = sum e e'``, ``C = sum (e'^2 + e e'')`` and
``E = sum e^2 e'^2``.  With ``l_t = -e_t^2 / 2`` the score sum is ``-B``, the
Hessian-term sum ``C`` and the score outer-product sum ``E``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GRID_POINTS = 25


@njit(cache=True)
def frac_filters(d, length, c, a1, a2):
    # c_i = -d * q_i with q_i = prod_{r=2}^{i} (r - 1 - d) / r; the 1/d pole of
    # S1 cancels against the -d factor, so d = 0 is regular.
    c[0] = 1.0
    a1[0] = 0.0
    a2[0] = 0.0
    if length < 2:
        return
    q = 1.0
    s1 = 0.0
    s2 = 0.0
    c[1] = -d
    a1[1] = -1.0
    a2[1] = 0.0
    for i in range(2, length):
        r = d + 1.0 - i
        q *= (i - 1.0 - d) / i
        c[i] = -d * q
        s1 += 1.0 / r
        s2 += 1.0 / (r * r)
        a1[i] = c[i] * s1 - q
        a2[i] = c[i] * (s1 * s1 - s2) - 2.0 * s1 * q


@njit(cache=True)
def segment_sums(y, start, stop, d, c, a1, a2):
    length = stop - start
    frac_filters(d, length, c, a1, a2)
    A = 0.0
    B = 0.0
    C = 0.0
    E = 0.0
    for t in range(length):
        e0 = 0.0
        e1 = 0.0
        e2 = 0.0
        base = start + t
        for i in range(t + 1):
            v = y[base - i]
            e0 += c[i] * v
            e1 += a1[i] * v
            e2 += a2[i] * v
        A += e0 * e0
        B += e0 * e1
        C += e1 * e1 + e0 * e2
        E += e0 * e0 * e1 * e1
    return A, B, C, E


@njit(cache=True)
def grid_start(y, start, stop, lo, hi, c, a1, a2):
    best_d = lo
    best_a = np.inf
    for g in range(_GRID_POINTS):
        d = lo + (hi - lo) * g / (_GRID_POINTS - 1)
        A, B, C, E = segment_sums(y, start, stop, d, c, a1, a2)
        if A < best_a:
            best_a = A
            best_d = d
    return best_d


NEWTON_ZONE = 1e-4


@njit(cache=True)
def newton_segment(y, start, stop, d0, lo, hi, c, a1, a2, tol, maxit):
    """Projected Newton with backtracking for min_d sum e_t(d)^2 on [lo, hi].

    Returns (d, A, B, C, E, iterations, converged); the sums are evaluated at
    the returned ``d``.
    """
    d = min(max(d0, lo), hi)
    A, B, C, E = segment_sums(y, start, stop, d, c, a1, a2)
    for it in range(1, maxit + 1):
        if C > 0.0:
            step = -B / C
        elif B > 0.0:
            step = -0.05
        else:
            step = 0.05
        dn = min(max(d + step, lo), hi)
        An, Bn, Cn, En = segment_sums(y, start, stop, dn, c, a1, a2)
        if C > 0.0 and abs(dn - d) <= NEWTON_ZONE:
            # Close to the optimum the loss comparison is rounding noise, so
            # take plain Newton steps there.
            moved = abs(dn - d)
            d, A, B, C, E = dn, An, Bn, Cn, En
            if moved <= tol:
                return d, A, B, C, E, it, True
            continue
        halvings = 0
        while An > A and halvings < 60:
            step *= 0.5
            dn = min(max(d + step, lo), hi)
            An, Bn, Cn, En = segment_sums(y, start, stop, dn, c, a1, a2)
            halvings += 1
        moved = abs(dn - d)
        d, A, B, C, E = dn, An, Bn, Cn, En
        if moved <= tol:
            return d, A, B, C, E, it, True
    return d, A, B, C, E, maxit, False


@njit(cache=True)
def farima0_fit(y, start, stop, d0, lo, hi, tol, maxit, cold):
    n = stop - start
    c = np.empty(n)
    a1 = np.empty(n)
    a2 = np.empty(n)
    if cold:
        d0 = grid_start(y, start, stop, lo, hi, c, a1, a2)
    return newton_segment(y, start, stop, d0, lo, hi, c, a1, a2, tol, maxit)


@njit(cache=True)
def farima0_scan(y, trim, lo, hi, tol, maxit):
    """Sub-sample fits for every split k in [trim, n - trim].

    Left fits run with increasing k and right fits with decreasing k, each
    warm-started from its neighbour; the first fit on each side starts from a
    grid search.  Row ``j`` of every output refers to ``k = trim + j``.
    """
    n = y.size
    nk = n - 2 * trim + 1
    c = np.empty(n)
    a1 = np.empty(n)
    a2 = np.empty(n)
    d_left = np.empty(nk)
    d_right = np.empty(nk)
    hess = np.empty((nk, 2))
    outer = np.empty((nk, 2))
    score = np.empty((nk, 2))
    iters = np.empty((nk, 2), dtype=np.int64)
    conv = np.empty((nk, 2), dtype=np.bool_)

    d = grid_start(y, 0, trim, lo, hi, c, a1, a2)
    for j in range(nk):
        k = trim + j
        d, A, B, C, E, it, ok = newton_segment(y, 0, k, d, lo, hi, c, a1, a2, tol, maxit)
        d_left[j] = d
        score[j, 0] = -B
        hess[j, 0] = C
        outer[j, 0] = E
        iters[j, 0] = it
        conv[j, 0] = ok

    d = grid_start(y, n - trim, n, lo, hi, c, a1, a2)
    for j in range(nk - 1, -1, -1):
        k = trim + j
        d, A, B, C, E, it, ok = newton_segment(y, k, n, d, lo, hi, c, a1, a2, tol, maxit)
        d_right[j] = d
        score[j, 1] = -B
        hess[j, 1] = C
        outer[j, 1] = E
        iters[j, 1] = it
        conv[j, 1] = ok
    return d_left, d_right, score, hess, outer, iters, conv
