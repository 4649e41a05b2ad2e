"""Fractional differencing filters, FARIMA simulation and residual recursions.

The model is ``phi(B) (1 - B)^d y_t = psi(B) e_t`` with ``d`` in ``(0, 0.5)``.
Residuals and their derivatives are computed from the observed stretch only,
with every presample ``y`` and ``e`` set to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy import signal

from .panel import ScorePanel
from .rng import draw_innovations, stream

ROOT_TOL = 1e-8
COMMON_ROOT_TOL = 1e-6
DIRECT_CONV_MAX = 4096

# Operations that implement a formula; each needs an equation-map entry.
__operations__ = ("frac_diff_coeffs", "inverse_frac_coeffs", "log_deriv_coeffs", "simulate_farima", "residuals", "score_panel")


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


def _check_d(d: float) -> float:
    d = float(d)
    if not (0.0 < d < 0.5):
        raise DomainError(f"fractional order d must lie in (0, 0.5), got {d!r}")
    return d


def _check_order(K: int) -> int:
    if int(K) != K or K < 0:
        raise DomainError(f"truncation K must be a non-negative integer, got {K!r}")
    return int(K)


def poly_roots(coefs: np.ndarray) -> np.ndarray:
    """Roots of ``1 + coefs[0] z + ... + coefs[-1] z^p`` via companion eigenvalues."""
    coefs = np.asarray(coefs, dtype=float)
    p = coefs.size
    if p == 0:
        return np.empty(0, dtype=complex)
    # Reciprocal roots are the eigenvalues of the companion of z^p + coefs[0] z^{p-1} + ...
    comp = np.zeros((p, p))
    comp[0, :] = -coefs
    comp[1:, :-1] = np.eye(p - 1)
    inv_roots = np.linalg.eigvals(comp)
    return 1.0 / inv_roots


def _outside_unit_disk(coefs: np.ndarray) -> bool:
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size == 0:
        return True
    comp = np.zeros((coefs.size, coefs.size))
    comp[0, :] = -coefs
    comp[1:, :-1] = np.eye(coefs.size - 1)
    # |root| > 1  <=>  |reciprocal root| < 1
    return bool(np.all(np.abs(np.linalg.eigvals(comp)) < 1.0 - ROOT_TOL))


@dataclass(frozen=True)
class FarimaParams:
    """Parameter vector ``(d, phi_1..phi_p, psi_1..psi_q)``.

    ``phi`` holds AR coefficients of ``phi(z) = 1 - sum phi_i z^i`` and ``psi``
    MA coefficients of ``psi(z) = 1 + sum psi_j z^j``.
    """

    d: float
    phi: tuple[float, ...] = ()
    psi: tuple[float, ...] = ()
    identifiable: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_d(self.d))
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "psi", tuple(float(v) for v in self.psi))
        vals = np.array(self.phi + self.psi)
        if not np.all(np.isfinite(vals)):
            raise DomainError("coefficients must be finite")
        if self.identifiable and self.p and self.phi[-1] == 0.0:
            raise DomainError("last AR coefficient must be nonzero")
        if self.identifiable and self.q and self.psi[-1] == 0.0:
            raise DomainError("last MA coefficient must be nonzero")
        if not _outside_unit_disk(-np.array(self.phi)):
            raise DomainError("AR polynomial has a root on or inside the unit circle")
        if not _outside_unit_disk(np.array(self.psi)):
            raise DomainError("MA polynomial has a root on or inside the unit circle")
        if self.identifiable and self.p and self.q:
            ra = poly_roots(-np.array(self.phi))
            rm = poly_roots(np.array(self.psi))
            if np.min(np.abs(ra[:, None] - rm[None, :])) < COMMON_ROOT_TOL:
                raise DomainError("AR and MA polynomials share a root")

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.psi)

    @property
    def dim(self) -> int:
        return 1 + self.p + self.q

    @property
    def vector(self) -> np.ndarray:
        return np.array((self.d,) + self.phi + self.psi)

    @classmethod
    def from_vector(cls, lam, p: int, q: int, identifiable: bool = False) -> FarimaParams:
        """Build from a flat vector.

        Search points may have a zero last coefficient or near-common roots,
        so identifiability is only checked when asked for; stationarity and
        invertibility always are.
        """
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (1 + p + q,):
            raise ValueError(f"expected {1 + p + q} parameters, got shape {lam.shape}")
        return cls(lam[0], tuple(lam[1 : 1 + p]), tuple(lam[1 + p :]), identifiable)

    def ar_poly(self) -> np.ndarray:
        return np.concatenate(([1.0], -np.array(self.phi)))

    def ma_poly(self) -> np.ndarray:
        return np.concatenate(([1.0], np.array(self.psi)))


@dataclass(frozen=True)
class ParamSpace:
    """Compact search box ``lower <= lam <= upper``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or not lo:
            raise DomainError("lower and upper bounds must be nonempty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("bounds must be finite")
        if not np.all(np.array(lo) < np.array(hi)):
            raise DomainError("every lower bound must be below its upper bound")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, lam) -> bool:
        lam = np.asarray(lam, dtype=float)
        return bool(np.all(lam >= self.lo) and np.all(lam <= self.hi))

    def clip(self, lam) -> np.ndarray:
        return np.clip(np.asarray(lam, dtype=float), self.lo, self.hi)

    def at_boundary(self, lam, tol: float = 1e-6) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return (lam - self.lo <= tol) | (self.hi - lam <= tol)

    @classmethod
    def farima(
        cls,
        p: int = 0,
        q: int = 0,
        d_bounds: tuple[float, float] = (0.01, 0.49),
        arma_bound: float = 0.95,
    ) -> ParamSpace:
        """Default FARIMA box; ``d_bounds`` must sit strictly inside ``(0, 0.5)``."""
        lo_d, hi_d = float(d_bounds[0]), float(d_bounds[1])
        if not (0.0 < lo_d < hi_d < 0.5):
            raise DomainError(f"d-bounds must satisfy 0 < lower < upper < 0.5, got {d_bounds!r}")
        k = p + q
        return cls((lo_d,) + (-arma_bound,) * k, (hi_d,) + (arma_bound,) * k)


@dataclass(frozen=True)
class SeriesBuffer:
    """Observed or simulated series ``y_1..y_n`` with its generation record."""

    values: np.ndarray
    seed: int | None = None
    provenance: dict[str, Any] = field(default_factory=dict)
    innovations: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size < 1:
            raise ValueError("a series needs at least one observation")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.innovations is not None:
            e = np.array(self.innovations, dtype=float, copy=True).reshape(-1)
            e.setflags(write=False)
            object.__setattr__(self, "innovations", e)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.n

    def scaled(self, c: float) -> SeriesBuffer:
        return SeriesBuffer(c * self.values, self.seed, {**self.provenance, "scaled_by": float(c)})

    def reversed(self) -> SeriesBuffer:
        return SeriesBuffer(self.values[::-1], self.seed, {**self.provenance, "reversed": True})

    def demeaned(self) -> SeriesBuffer:
        return SeriesBuffer(self.values - self.values.mean(), self.seed, {**self.provenance, "demeaned": True})


@dataclass(frozen=True)
class FilterCoeffs:
    """Truncated filter weights ``w_0..w_K``.

    ``kind`` is ``"frac-diff"`` for ``(1-B)^d``, ``"inverse-frac"`` for
    ``(1-B)^{-d}`` and ``"log-deriv"`` for ``log^j(1-B) (1-B)^d``.
    """

    kind: str
    d: float
    weights: np.ndarray
    deriv_order: int = 0

    @property
    def order(self) -> int:
        return self.weights.size - 1


def _frac_weights(d: float, K: int, sign: float) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    return np.concatenate(([1.0], np.cumprod((k - 1.0 + sign * d) / k)))


def frac_diff_coeffs(d: float, K: int) -> FilterCoeffs:
    """Weights ``c_k`` of ``(1-B)^d`` via ``c_k = c_{k-1} (k - 1 - d) / k``."""
    d, K = _check_d(d), _check_order(K)
    w = _frac_weights(d, K, -1.0)
    w.setflags(write=False)
    return FilterCoeffs("frac-diff", d, w)


def inverse_frac_coeffs(d: float, K: int) -> FilterCoeffs:
    """MA weights ``m_k`` of ``(1-B)^{-d}`` via ``m_k = m_{k-1} (k - 1 + d) / k``."""
    d, K = _check_d(d), _check_order(K)
    w = _frac_weights(d, K, 1.0)
    w.setflags(write=False)
    return FilterCoeffs("inverse-frac", d, w)


def causal_filter(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out_t = sum_{i<=t} weights_i x_{t-i}`` with zero presample.

    Direct summation up to length 4096, FFT convolution above.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)[: x.size]
    if x.size <= DIRECT_CONV_MAX:
        return np.convolve(w, x)[: x.size]
    return signal.fftconvolve(w, x)[: x.size]


def log_deriv_coeffs(d: float, j: int, K: int) -> FilterCoeffs:
    """Weights of ``log^j(1-B) (1-B)^d``, with ``log(1-B) = -sum_{i>=1} B^i / i``.

    Built by ``j`` successive convolutions of the harmonic filter with the
    fractional differencing weights.
    """
    d, K = _check_d(d), _check_order(K)
    if j not in (1, 2, 3):
        raise DomainError(f"derivative order j must be 1, 2 or 3, got {j!r}")
    w = _log_deriv_cached(d, j, K)
    return FilterCoeffs("log-deriv", d, w, deriv_order=j)


@lru_cache(maxsize=256)
def _log_deriv_cached(d: float, j: int, K: int) -> np.ndarray:
    h = np.zeros(K + 1)
    h[1:] = -1.0 / np.arange(1, K + 1)
    w = _frac_weights(d, K, -1.0)
    for _ in range(j):
        w = causal_filter(h, w)
    w.setflags(write=False)
    return w


def _validate_params(params) -> FarimaParams:
    if not isinstance(params, FarimaParams):
        raise TypeError(f"expected FarimaParams, got {type(params).__name__}")
    return params


def simulate_farima(
    params: FarimaParams,
    n: int,
    innovations: np.ndarray | None = None,
    *,
    seed: int | None = None,
    stream_key: tuple[int, ...] = (),
    family: str = "normal",
    df: float | None = None,
    cut: int | None = None,
    burn: int | None = None,
) -> SeriesBuffer:
    """Simulate ``n`` observations of a FARIMA process.

    The fractional part is the MA(``cut``) truncation of ``(1-B)^{-d}``
    applied to ``burn + n`` innovations; the ARMA part then runs recursively
    and the first ``burn`` values are discarded.

    Parameters
    ----------
    params : FarimaParams
    n : int
        Number of returned observations.
    innovations : ndarray, optional
        Explicit innovation path of length ``burn + n`` (burn-in first).  When
        given, ``burn`` defaults to ``len(innovations) - n``.
    seed, stream_key
        Select the Philox stream when ``innovations`` is omitted.
    family, df
        Innovation law, see :func:`cpwald.rng.draw_innovations`.
    cut : int, optional
        MA truncation; default ``max(n, 10**4)``.  ``cut=0`` gives ``y = e``
        for FARIMA(0, d, 0).
    burn : int, optional
        Discarded burn-in length; default ``2 * cut``.
    """
    params = _validate_params(params)
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    cut = max(n, 10**4) if cut is None else _check_order(cut)
    if innovations is not None:
        eps = np.asarray(innovations, dtype=float).reshape(-1)
        if burn is None:
            burn = eps.size - n
        if burn < 0 or eps.size != burn + n:
            raise ValueError(f"innovations must have length burn + n = {n + (burn or 0)}, got {eps.size}")
    else:
        if seed is None:
            raise ValueError("either innovations or seed is required")
        burn = 2 * cut if burn is None else _check_order(burn)
        eps = draw_innovations(stream(seed, *stream_key), burn + n, family, df)
    if not np.all(np.isfinite(eps)):
        raise ValueError("innovations must be finite")
    m = inverse_frac_coeffs(params.d, cut).weights
    u = causal_filter(m, eps)
    if params.p or params.q:
        u = signal.lfilter(params.ma_poly(), params.ar_poly(), u)
    prov = {
        "generator": "farima",
        "d": params.d,
        "phi": list(params.phi),
        "psi": list(params.psi),
        "cut": cut,
        "burn": burn,
        "family": family if innovations is None else "supplied",
        "stream": list(stream_key),
    }
    return SeriesBuffer(u[burn:], seed, prov, innovations=eps[burn:])


def _as_values(series) -> np.ndarray:
    if isinstance(series, SeriesBuffer):
        return series.values
    return np.asarray(series, dtype=float).reshape(-1)


def _lag(x: np.ndarray, i: int) -> np.ndarray:
    out = np.zeros_like(x)
    if i < x.size:
        out[i:] = x[: x.size - i]
    return out


def residuals(params: FarimaParams, series, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Truncated residuals of ``y[start:stop]`` with zero presample.

    ``psi(B) e_t = phi(B) (1-B)^d y_t`` where every ``y`` and ``e`` before
    ``start`` is taken as zero.
    """
    params = _validate_params(params)
    y = _as_values(series)[start:stop]
    w = causal_filter(_frac_weights(params.d, y.size - 1, -1.0), y)
    if params.p or params.q:
        w = signal.lfilter(params.ar_poly(), params.ma_poly(), w)
    return w


def score_panel(params: FarimaParams, series, start: int = 0, stop: int | None = None) -> ScorePanel:
    """Residuals with first and second parameter derivatives on ``y[start:stop]``.

    Coordinates are ordered ``(d, phi_1..phi_p, psi_1..psi_q)``.  The ``d``
    derivatives use the log-derivative filters; the ARMA derivatives come from
    lag-shifted, ``psi``-inverse-filtered series, all with zero presample.
    """
    params = _validate_params(params)
    y = _as_values(series)[start:stop]
    L = y.size
    if L < 1:
        raise ValueError("empty range")
    p, q, m = params.p, params.q, params.dim
    K = L - 1
    w0 = causal_filter(_frac_weights(params.d, K, -1.0), y)
    w1 = causal_filter(_log_deriv_cached(params.d, 1, K), y)
    w2 = causal_filter(_log_deriv_cached(params.d, 2, K), y)
    grad = np.empty((L, m))
    hess = np.zeros((L, m, m))
    if p == 0 and q == 0:
        grad[:, 0] = w1
        hess[:, 0, 0] = w2
        return ScorePanel(w0, grad, hess)

    ar, ma = params.ar_poly(), params.ma_poly()

    def psi_inv(x):
        return signal.lfilter([1.0], ma, x)

    def arma(x):
        return signal.lfilter(ar, ma, x)

    eps = arma(w0)
    e_d = arma(w1)
    grad[:, 0] = e_d
    hess[:, 0, 0] = arma(w2)
    e_phi = [-psi_inv(_lag(w0, i)) for i in range(1, p + 1)]
    e_psi = [-psi_inv(_lag(eps, j)) for j in range(1, q + 1)]
    for i in range(p):
        a = 1 + i
        grad[:, a] = e_phi[i]
        hess[:, 0, a] = hess[:, a, 0] = -psi_inv(_lag(w1, i + 1))
    for j in range(q):
        b = 1 + p + j
        grad[:, b] = e_psi[j]
        hess[:, 0, b] = hess[:, b, 0] = -psi_inv(_lag(e_d, j + 1))
        for i in range(p):
            a = 1 + i
            hess[:, a, b] = hess[:, b, a] = -psi_inv(_lag(e_phi[i], j + 1))
        for i in range(j + 1):
            c = 1 + p + i
            v = -psi_inv(_lag(e_psi[i], j + 1) + _lag(e_psi[j], i + 1))
            hess[:, b, c] = hess[:, c, b] = v
    return ScorePanel(eps, grad, hess)
