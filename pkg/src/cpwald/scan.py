"""Wald change-point scan with Darling-Erdos normalization.

For a split ``k`` the left piece is ``y[0:k]`` and the right piece ``y[k:n]``,
each filtered with its own zero presample.  With ``lam_L``, ``lam_R`` the two
sub-sample maximizers::

    Sigma = sum_left P_t(lam_L) + sum_right P_t(lam_R)
    Omega = sum_left D_t D_t'(lam_L) + sum_right D_t D_t'(lam_R)
    W(k)  = k (n - k) / n^2 * delta' Sigma Omega^{-1} Sigma delta,  delta = lam_L - lam_R

and the scan reports ``w_hat = (max_k W(k) - b_n(m)) / a_n(m)`` with
``P[w_hat <= x] -> exp(-2 exp(-x / 2))`` under no change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .farima import SeriesBuffer
from .models import BOUNDARY_TOL, MAX_ITER, XTOL, FitResult, ModelSpec, fit

EIG_FLOOR = 1e-12

# Operations that implement a formula; each needs an equation-map entry.
__operations__ = ("wald_at", "norm_constants", "scan", "p_value", "critical_value")


class DegenerateInformation(ArithmeticError):
    """Score outer-product matrix too ill-conditioned to invert."""


class ScanDegenerate(ArithmeticError):
    """Every candidate split was degenerate."""


@dataclass(frozen=True)
class SandwichEstimates:
    sigma_hat: np.ndarray
    omega_hat: np.ndarray
    k: int


@dataclass(frozen=True)
class NormConstants:
    n: int
    m: int
    a_n: float
    b_n: float
    trim: int


@dataclass(frozen=True)
class WaldValue:
    W: float
    sandwich: SandwichEstimates
    left: FitResult
    right: FitResult


@dataclass(frozen=True)
class ScanResult:
    """Per-split table and the normalized sup-statistic.

    ``W`` is ``nan`` where ``degenerate`` is set; such splits are excluded
    from the maximum.
    """

    k: np.ndarray
    lam_left: np.ndarray
    lam_right: np.ndarray
    W: np.ndarray
    degenerate: np.ndarray
    boundary_left: np.ndarray
    boundary_right: np.ndarray
    converged_left: np.ndarray
    converged_right: np.ndarray
    k_star: int
    w_max: float
    w_hat: float
    p_value: float
    norm: NormConstants
    param_names: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.norm.n

    @property
    def tau(self) -> np.ndarray:
        return self.k / self.norm.n

    def summary(self) -> dict:
        return {
            "n": self.norm.n,
            "m": self.norm.m,
            "trim": self.norm.trim,
            "a_n": self.norm.a_n,
            "b_n": self.norm.b_n,
            "w_max": self.w_max,
            "k_star": self.k_star,
            "tau_star": self.k_star / self.norm.n,
            "w_hat": self.w_hat,
            "p_value": self.p_value,
            "n_degenerate": int(self.degenerate.sum()),
            "n_boundary": int((self.boundary_left | self.boundary_right).sum()),
            "n_nonconverged": int((~self.converged_left | ~self.converged_right).sum()),
        }

    def decision(self, alpha: float) -> bool:
        """True if no change is rejected at level ``alpha``."""
        return bool(self.w_hat > critical_value(alpha))


def norm_constants(n: int, m: int = 1, trim: int | None = None) -> NormConstants:
    """Location ``b_n(m)`` and scale ``a_n(m)`` of the sup-statistic.

    ``b_n = [2 LL + m LLL / 2 - log Gamma(m / 2)]^2 / (2 LL)`` and
    ``a_n = sqrt(b_n / (2 LL))`` with ``LL = log log n``, ``LLL = log log log n``.
    """
    n, m = int(n), int(m)
    if n < 20:
        raise ValueError(f"n must be at least 20, got {n}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    ll = math.log(math.log(n))
    bracket = 2.0 * ll + m * math.log(ll) / 2.0 - float(gammaln(m / 2.0))
    if bracket <= 0.0:
        raise ValueError(f"normalizing bracket is non-positive for n={n}, m={m}")
    b = bracket * bracket / (2.0 * ll)
    a = math.sqrt(b / (2.0 * ll))
    return NormConstants(n, m, a, b, default_trim(n, m) if trim is None else int(trim))


def default_trim(n: int, m: int) -> int:
    """``max(m + 1, ceil(log n))``."""
    return max(m + 1, math.ceil(math.log(n)))


def p_value(w_hat: float) -> float:
    """``1 - exp(-2 exp(-w_hat / 2))``."""
    with np.errstate(over="ignore"):
        v = -np.expm1(-2.0 * np.exp(-0.5 * float(w_hat)))
    return float(min(max(v, 0.0), 1.0))


def critical_value(alpha: float) -> float:
    """Upper ``alpha`` quantile of the limit law, ``-2 log(-log(1 - alpha) / 2)``."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return -2.0 * math.log(-math.log1p(-alpha) / 2.0)


def _values(series) -> np.ndarray:
    if isinstance(series, SeriesBuffer):
        return series.values
    return np.asarray(series, dtype=float).reshape(-1)


def _quadratic(n: int, k: int, delta: np.ndarray, sigma: np.ndarray, omega: np.ndarray) -> float:
    w, V = np.linalg.eigh(0.5 * (omega + omega.T))
    if not (w.max() > 0.0 and w.min() > EIG_FLOOR * w.max()):
        raise DegenerateInformation(f"Omega at k={k} has eigenvalues {w}")
    v = V.T @ (sigma @ delta)
    return k * (n - k) / n**2 * float(np.sum(v * v / w))


def _wald_from_fits(model: ModelSpec, y: np.ndarray, k: int, left: FitResult, right: FitResult) -> WaldValue:
    n = y.size
    pl = model.panel(left.lambda_hat, y, 0, k)
    pr = model.panel(right.lambda_hat, y, k, n)
    sigma = pl.hessian_sum() + pr.hessian_sum()
    sigma = 0.5 * (sigma + sigma.T)
    omega = pl.outer_sum() + pr.outer_sum()
    W = _quadratic(n, k, left.lambda_hat - right.lambda_hat, sigma, omega)
    return WaldValue(W, SandwichEstimates(sigma, omega, k), left, right)


def wald_at(model: ModelSpec, series, k: int, trim: int | None = None, init_left=None, init_right=None) -> WaldValue:
    """Fit both sub-samples at split ``k`` and return ``W(k)`` with its sandwich.

    Raises
    ------
    DegenerateInformation
        If ``Omega`` has condition number above ``1e12``.
    """
    y = _values(series)
    n = y.size
    trim = default_trim(n, model.dim) if trim is None else int(trim)
    if not trim <= k <= n - trim:
        raise ValueError(f"split k={k} outside [{trim}, {n - trim}]")
    left = fit(model, y, 0, k, init=init_left, min_length=trim)
    right = fit(model, y, k, n, init=init_right, min_length=trim)
    return _wald_from_fits(model, y, k, left, right)


def _finish(model, n, trim, ks, lam_l, lam_r, W, degen, bl, br, cl, cr) -> ScanResult:
    norm = norm_constants(n, model.dim, trim)
    if degen.all():
        raise ScanDegenerate("every split has a degenerate information matrix")
    Wm = np.where(degen, -np.inf, W)
    j = int(np.argmax(Wm))
    w_max = float(W[j])
    w_hat = (w_max - norm.b_n) / norm.a_n
    return ScanResult(
        k=ks,
        lam_left=lam_l,
        lam_right=lam_r,
        W=np.where(degen, np.nan, W),
        degenerate=degen,
        boundary_left=bl,
        boundary_right=br,
        converged_left=cl,
        converged_right=cr,
        k_star=int(ks[j]),
        w_max=w_max,
        w_hat=w_hat,
        p_value=p_value(w_hat),
        norm=norm,
        param_names=model.param_names,
    )


def _scan_farima0(model: ModelSpec, y: np.ndarray, trim: int) -> ScanResult:
    lo, hi = model.space.lower[0], model.space.upper[0]
    dl, dr, score, hess, outer, iters, conv = _kernels.farima0_scan(
        np.ascontiguousarray(y, dtype=float), trim, lo, hi, XTOL, MAX_ITER
    )
    n = y.size
    ks = np.arange(trim, n - trim + 1)
    sig = hess.sum(axis=1)
    om = outer.sum(axis=1)
    degen = ~(om > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        W = ks * (n - ks) / n**2 * (dl - dr) ** 2 * sig**2 / om
    W = np.where(degen, 0.0, W)

    def edge(d):
        return (d - lo <= BOUNDARY_TOL) | (hi - d <= BOUNDARY_TOL)

    return _finish(
        model, n, trim, ks, dl[:, None], dr[:, None], W, degen, edge(dl), edge(dr), conv[:, 0], conv[:, 1]
    )


def _scan_generic(model: ModelSpec, y: np.ndarray, trim: int, stride: int) -> ScanResult:
    n = y.size
    full = np.arange(trim, n - trim + 1)
    coarse = full[::stride]
    if coarse[-1] != full[-1]:
        coarse = np.append(coarse, full[-1])
    fits = _fit_chain(model, y, coarse, {}, {}, trim)
    res = _evaluate(model, y, coarse, fits)
    if stride > 1:
        W = np.where(res["degen"], -np.inf, res["W"])
        ks = coarse[int(np.argmax(W))]
        extra = np.array([k for k in range(max(trim, ks - stride + 1), min(n - trim, ks + stride - 1) + 1) if k not in set(coarse)])
        if extra.size:
            fits = _fit_chain(model, y, extra, *fits, trim)
            allk = np.sort(np.concatenate([coarse, extra]))
            res = _evaluate(model, y, allk, fits)
    return _finish(
        model, n, trim, res["k"], res["ll"], res["lr"], res["W"], res["degen"], res["bl"], res["br"], res["cl"], res["cr"]
    )


def _nearest(done: dict, k: int):
    if not done:
        return None
    kk = min(done, key=lambda j: (abs(j - k), j))
    return done[kk].lambda_hat


def _fit_chain(model, y, ks, left: dict, right: dict, trim: int):
    """Warm-started fits: left pieces with increasing k, right with decreasing k."""
    n = y.size
    left, right = dict(left), dict(right)
    for k in ks:
        left[int(k)] = fit(model, y, 0, int(k), init=_nearest(left, int(k)), min_length=trim)
    for k in ks[::-1]:
        right[int(k)] = fit(model, y, int(k), n, init=_nearest(right, int(k)), min_length=trim)
    return left, right


def _evaluate(model, y, ks, fits):
    left, right = fits
    m = model.dim
    nk = len(ks)
    out = {
        "k": np.asarray(ks, dtype=np.int64),
        "ll": np.empty((nk, m)),
        "lr": np.empty((nk, m)),
        "W": np.zeros(nk),
        "degen": np.zeros(nk, dtype=bool),
        "bl": np.zeros(nk, dtype=bool),
        "br": np.zeros(nk, dtype=bool),
        "cl": np.zeros(nk, dtype=bool),
        "cr": np.zeros(nk, dtype=bool),
    }
    for j, k in enumerate(ks):
        fl, fr = left[int(k)], right[int(k)]
        out["ll"][j], out["lr"][j] = fl.lambda_hat, fr.lambda_hat
        out["bl"][j], out["br"][j] = fl.at_boundary, fr.at_boundary
        out["cl"][j], out["cr"][j] = fl.converged, fr.converged
        try:
            out["W"][j] = _wald_from_fits(model, y, int(k), fl, fr).W
        except DegenerateInformation:
            out["degen"][j] = True
    return out


def scan(model: ModelSpec, series, trim: int | None = None, stride: int = 1, fast: bool = True) -> ScanResult:
    """Evaluate ``W(k)`` for every ``k`` in ``[trim, n - trim]`` and normalize the maximum.

    Parameters
    ----------
    model : ModelSpec
    series : SeriesBuffer or array_like
    trim : int, optional
        Minimum sub-sample length; default ``max(m + 1, ceil(log n))``.
    stride : int
        Evaluate every ``stride``-th split, then every split within ``stride``
        of the coarse argmax.  Ignored by the FARIMA(0, d, 0) kernel, which
        always evaluates every split.
    fast : bool
        Use the compiled FARIMA(0, d, 0) kernel when the model allows it.

    Raises
    ------
    ValueError
        If ``n < 4 trim``.
    ScanDegenerate
        If no split has a usable information matrix.
    """
    y = _values(series)
    n = y.size
    m = model.dim
    trim = default_trim(n, m) if trim is None else int(trim)
    if trim < m + 1:
        raise ValueError(f"trim must be at least m + 1 = {m + 1}")
    if n < 4 * trim:
        raise ValueError(f"series length {n} is below 4 * trim = {4 * trim}")
    if stride < 1:
        raise ValueError("stride must be positive")
    if fast and model.is_farima0:
        return _scan_farima0(model, y, trim)
    return _scan_generic(model, y, trim, int(stride))
