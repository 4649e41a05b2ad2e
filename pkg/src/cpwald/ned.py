"""Empirical checks of forward and backward partial-sum behaviour.

Three things are measured on simulated sequences ``X_t``:

* the decay of ``|S_k / k|`` along forward sums ``S_k = X_1 + ... + X_k`` and
  backward sums ``S_k = X_n + ... + X_{n-k+1}``, summarized by a fitted
  exponent ``delta``;
* the distribution of ``max_{log n <= k <= mu n} S_k^2 / (k Omega)`` after the
  ``a_n(m)``, ``b_n(m)`` normalization, compared with ``exp(-exp(-x / 2))``;
* a third-moment diagnostic separating a process from its time reversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal, stats

from .farima import causal_filter
from .rng import draw_innovations, stream
from .scan import norm_constants

GENERATORS = ("iid", "ar1-sq", "ar1-score", "farima-score", "custom")
MARTINGALE_GENERATORS = ("iid", "ar1-score", "farima-score")
GRID_RATIO = 1.25
GRID_FLOOR = 32

# Operations that implement a formula; each needs an equation-map entry.
__operations__ = ("sum_paths", "rate_fit", "gaussian_max_check")


@dataclass(frozen=True)
class NedSequenceSpec:
    """Recipe for a mean-zero sequence ``X_t``.

    ``iid``
        ``X_t = e_t``.
    ``ar1-sq``
        ``X_t = y_{t-1}^2 - E y^2`` for ``y_t = phi y_{t-1} + e_t``.
    ``ar1-score``
        ``X_t = y_{t-1} e_t``, the least-squares score of the AR(1) model.
    ``farima-score``
        ``X_t = e_t sum_{i>=1} e_{t-i} / i``, the ``d``-score of FARIMA(0, d, 0)
        at the true parameter (it does not depend on ``d``).
    ``custom``
        ``func(rng, n)`` returns the sequence.
    """

    generator: str = "iid"
    phi: float = 0.8
    family: str = "normal"
    df: float | None = None
    burn: int = 10_000
    func: Callable[[np.random.Generator, int], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; expected one of {GENERATORS}")
        if self.generator == "custom" and self.func is None:
            raise ValueError("custom generator needs func")
        if not abs(self.phi) < 1.0:
            raise ValueError("phi must satisfy |phi| < 1")

    @property
    def is_martingale_difference(self) -> bool:
        return self.generator in MARTINGALE_GENERATORS


def generate(spec: NedSequenceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """One realization ``X_1..X_n``."""
    g = spec.generator
    if g == "custom":
        x = np.asarray(spec.func(rng, n), dtype=float)
        if x.shape != (n,):
            raise ValueError(f"custom generator returned shape {x.shape}, expected ({n},)")
        return x
    if g == "iid":
        return draw_innovations(rng, n, spec.family, spec.df)
    N = n + spec.burn + 1
    e = draw_innovations(rng, N, spec.family, spec.df)
    if g in ("ar1-sq", "ar1-score"):
        y = signal.lfilter([1.0], [1.0, -spec.phi], e)
        lagged = y[spec.burn : N - 1]
        if g == "ar1-sq":
            return lagged**2 - 1.0 / (1.0 - spec.phi**2)
        return lagged * e[spec.burn + 1 :]
    h = np.zeros(N)
    h[1:] = 1.0 / np.arange(1, N)
    s = causal_filter(h, e)
    return (e * s)[spec.burn + 1 :]


@dataclass(frozen=True)
class PathTable:
    """Normalized partial sums on a geometric grid.

    ``tail_sup[i]`` is ``sup_{k_i <= j <= n} |S_j / j|``, the quantity whose
    decay in ``k`` the rate fit measures.
    """

    direction: str
    n: int
    k: np.ndarray
    mean: np.ndarray
    tail_sup: np.ndarray


def geometric_grid(n: int, start: int | None = None, ratio: float = GRID_RATIO) -> np.ndarray:
    """Strictly increasing integer grid ``start, start*ratio, ...`` up to ``n``."""
    g_n = math.log(math.log(math.log(max(math.e**math.e, n))))
    k0 = max(math.ceil(g_n), GRID_FLOOR) if start is None else int(start)
    out = []
    k = float(k0)
    while k <= n:
        out.append(int(k))
        k *= ratio
    return np.unique(np.array(out, dtype=np.int64))


def paths_from(x: np.ndarray, direction: str = "forward") -> PathTable:
    """Path table of an explicit sequence; backward sums run from the end inward."""
    x = np.asarray(x, dtype=float)
    if direction == "backward":
        x = x[::-1]
    elif direction != "forward":
        raise ValueError("direction must be 'forward' or 'backward'")
    n = x.size
    mean = np.cumsum(x) / np.arange(1, n + 1)
    tail = np.maximum.accumulate(np.abs(mean)[::-1])[::-1]
    k = geometric_grid(n)
    return PathTable(direction, n, k, mean[k - 1], tail[k - 1])


def sum_paths(spec: NedSequenceSpec, n: int, direction: str = "forward", seed: int = 0) -> PathTable:
    """Forward or backward normalized sums of one realization of length ``n``.

    Both directions of the same ``seed`` use the same realization.
    """
    if n < 1000:
        raise ValueError("sum paths need n >= 1000")
    return paths_from(generate(spec, n, stream(seed, 0)), direction)


@dataclass(frozen=True)
class RateFit:
    delta: float
    se: float
    n_points: int
    k_min: int

    @property
    def positive_at_2se(self) -> bool:
        return bool(self.delta - 2.0 * self.se > 0.0)


def rate_fit(paths: PathTable, k_min: int = GRID_FLOOR) -> RateFit:
    """``delta = -slope`` of ``log tail_sup`` on ``log k`` by least squares.

    A path that is identically zero has no decay to measure and returns
    ``delta = +inf``.
    """
    sel = paths.k >= k_min
    if sel.sum() < 20:
        raise ValueError(f"rate fit needs at least 20 grid points >= {k_min}, got {int(sel.sum())}")
    k, s = paths.k[sel], paths.tail_sup[sel]
    if np.all(s == 0.0):
        return RateFit(math.inf, 0.0, int(sel.sum()), k_min)
    if np.any(s == 0.0):
        s = np.where(s == 0.0, np.min(s[s > 0.0]), s)
    res = stats.linregress(np.log(k), np.log(s))
    return RateFit(float(-res.slope), float(res.stderr), int(sel.sum()), k_min)


def limit_cdf_one_sided(x):
    """``exp(-exp(-x / 2))``."""
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(-0.5 * np.asarray(x, dtype=float)))


def max_statistic(x: np.ndarray, mu: float) -> float:
    """Normalized ``max_{log n <= k <= mu n} |Omega^{-1/2} S_k|^2 / k`` of one sequence.

    ``x`` has shape ``(n,)`` or ``(n, m)``; ``Omega`` is the sample second
    moment matrix of the whole sequence.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    lo, hi = math.ceil(math.log(n)), math.floor(mu * n)
    if hi < lo:
        raise ValueError(f"empty range: mu * n = {mu * n:.3g} is below log n = {math.log(n):.3g}")
    omega = x.T @ x / n
    w, V = np.linalg.eigh(omega)
    if not w.min() > 1e-12 * max(w.max(), 0.0):
        raise ArithmeticError("degenerate second-moment matrix")
    z = (x @ V) / np.sqrt(w)
    S = np.cumsum(z, axis=0)[lo - 1 : hi]
    k = np.arange(lo, hi + 1)
    v = np.max(np.sum(S * S, axis=1) / k)
    nc = norm_constants(n, m)
    return float((v - nc.b_n) / nc.a_n)


@dataclass(frozen=True)
class GaussianMaxReport:
    direction: str
    n: int
    reps: int
    mu: float
    sample: np.ndarray
    ks: float
    ks_pvalue: float


def gaussian_max_check(
    spec: NedSequenceSpec,
    n: int,
    reps: int,
    mu: float = 0.9,
    seed: int = 0,
) -> dict[str, GaussianMaxReport]:
    """KS distance of the normalized max to ``exp(-exp(-x / 2))`` in both directions.

    Replication ``r`` uses stream ``(seed, 1, r)``; forward and backward
    statistics come from the same realizations.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    if mu * n < math.log(n):
        raise ValueError(f"empty range: mu * n = {mu * n:.3g} is below log n = {math.log(n):.3g}")
    fwd = np.empty(reps)
    bwd = np.empty(reps)
    for r in range(reps):
        x = generate(spec, n, stream(seed, 1, r))
        fwd[r] = max_statistic(x, mu)
        bwd[r] = max_statistic(x[::-1], mu)
    out = {}
    for name, s in (("forward", fwd), ("backward", bwd)):
        ks = stats.kstest(s, limit_cdf_one_sided)
        out[name] = GaussianMaxReport(name, n, reps, mu, np.sort(s), float(ks.statistic), float(ks.pvalue))
    return out


@dataclass(frozen=True)
class Irreversibility:
    """Third moment of lag-``lag`` increments, forward and reversed."""

    forward: float
    backward: float
    se: float

    @property
    def z(self) -> float:
        return (self.forward - self.backward) / (2.0 * self.se) if self.se > 0 else math.inf


def irreversibility(y: np.ndarray, lag: int = 1, blocks: int = 50) -> Irreversibility:
    """Compare ``E (y_{t+lag} - y_t)^3`` for ``y`` and its reversal.

    Reversal flips the sign of every increment, so the two moments differ
    exactly when the increment law is skewed; a reversible process has both
    equal to zero.  The standard error uses batch means over ``blocks``
    contiguous blocks.
    """
    y = np.asarray(y, dtype=float)
    c = (y[lag:] - y[:-lag]) ** 3
    fwd = float(c.mean())
    rc = (y[::-1][lag:] - y[::-1][:-lag]) ** 3
    bwd = float(rc.mean())
    b = np.array_split(c, blocks)
    se = float(np.std([blk.mean() for blk in b], ddof=1) / math.sqrt(blocks))
    return Irreversibility(fwd, bwd, se)


def ar1_series(phi: float, n: int, rng: np.random.Generator, family: str = "normal", burn: int = 1000) -> np.ndarray:
    """AR(1) path ``y_t = phi y_{t-1} + e_t`` after a burn-in."""
    e = draw_innovations(rng, n + burn, family)
    return signal.lfilter([1.0], [1.0, -phi], e)[burn:]


@dataclass(frozen=True)
class NedReport:
    """Paths, decay exponent and Gaussian-max distance for one direction.

    The exponent is an estimate with a regression standard error; thresholds
    placed on it are calibration choices rather than constants of the theory.
    """

    direction: str
    paths: PathTable
    rate: RateFit
    gaussian_max: GaussianMaxReport | None = None

    def to_dict(self) -> dict:
        out = {
            "direction": self.direction,
            "n": self.paths.n,
            "delta": self.rate.delta,
            "delta_se": self.rate.se,
            "grid_points": self.rate.n_points,
            "delta_positive_at_2se": self.rate.positive_at_2se,
        }
        if self.gaussian_max is not None:
            out.update(
                gm_n=self.gaussian_max.n,
                gm_reps=self.gaussian_max.reps,
                gm_mu=self.gaussian_max.mu,
                gm_ks=self.gaussian_max.ks,
                gm_ks_pvalue=self.gaussian_max.ks_pvalue,
            )
        return out


def ned_report(
    spec: NedSequenceSpec,
    n: int,
    seed: int = 0,
    gm_n: int | None = None,
    gm_reps: int = 0,
    mu: float = 0.9,
) -> dict[str, NedReport]:
    """Forward and backward reports; the Gaussian-max part runs when ``gm_reps > 0``."""
    x = generate(spec, n, stream(seed, 0))
    gm = None
    if gm_reps > 0:
        if not spec.is_martingale_difference:
            raise ValueError(f"Gaussian-max check needs a martingale-difference generator, got {spec.generator!r}")
        gm = gaussian_max_check(spec, gm_n or n, gm_reps, mu, seed)
    out = {}
    for d in ("forward", "backward"):
        p = paths_from(x, d)
        out[d] = NedReport(d, p, rate_fit(p), gm[d] if gm else None)
    return out
