"""Residual-based models ``l_t = -e_t(lam)^2 / 2`` and their sub-sample fits.

A :class:`ModelSpec` bundles a parameter box with a residual function and a
:class:`~cpwald.panel.ScorePanel` evaluator that work on any index range
``y[start:stop]`` with zero presample at ``start``.  Two instances are
provided: FARIMA(p, d, q) by quasi-likelihood and AR(p) by least squares.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .farima import FarimaParams, ParamSpace, SeriesBuffer, residuals, score_panel
from .panel import ScorePanel

log = logging.getLogger(__name__)

XTOL = 1e-8
FTOL = 1e-12
MAX_ITER = 200
BOUNDARY_TOL = 1e-6
GRID_POINTS = 25
NEWTON_ZONE = 1e-4

# Operations that implement a formula; each needs an equation-map entry.
__operations__ = ("farima_model", "ar_model", "fit")


class NonConvergence(RuntimeWarning):
    """An optimizer hit its iteration cap; the result is flagged, not discarded."""


class RangeTooShort(ValueError):
    """Fit range shorter than ``max(3 m, 8)``."""


@dataclass(frozen=True)
class ModelSpec:
    """A residual-based model on a compact parameter box.

    Attributes
    ----------
    name : str
        ``"farima"`` or ``"ar"``.
    space : ParamSpace
    residual_fn : callable
        ``(lam, y, start, stop) -> e`` with zero presample at ``start``.
    panel_fn : callable
        ``(lam, y, start, stop) -> ScorePanel``.
    orders : tuple
        ``(p, q)`` for FARIMA, ``(p,)`` for AR.
    """

    name: str
    space: ParamSpace
    residual_fn: Callable[[np.ndarray, np.ndarray, int, int], np.ndarray]
    panel_fn: Callable[[np.ndarray, np.ndarray, int, int], ScorePanel]
    orders: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.name == "farima":
            p, q = self.orders
            return ("d",) + tuple(f"phi{i}" for i in range(1, p + 1)) + tuple(f"psi{j}" for j in range(1, q + 1))
        return tuple(f"phi{i}" for i in range(1, self.dim + 1))

    @property
    def is_farima0(self) -> bool:
        return self.name == "farima" and self.orders == (0, 0)

    def objective(self, lam, y, start: int, stop: int) -> float:
        """``sum_t l_t(lam)`` over ``y[start:stop]``."""
        e = self.residual_fn(np.asarray(lam, dtype=float), y, start, stop)
        return float(-0.5 * np.dot(e, e))

    def panel(self, lam, y, start: int, stop: int) -> ScorePanel:
        return self.panel_fn(np.asarray(lam, dtype=float), y, start, stop)

    def objective_terms(self, lam, y, start: int, stop: int) -> np.ndarray:
        e = self.residual_fn(np.asarray(lam, dtype=float), y, start, stop)
        return -0.5 * e**2


def farima_model(space: ParamSpace | None = None, p: int = 0, q: int = 0) -> ModelSpec:
    """FARIMA(p, d, q) quasi-likelihood model.

    ARMA coordinates that leave the causal/invertible region during a search
    are handled by returning an infinite loss (the optimizer backs off).
    """
    if p < 0 or q < 0:
        raise ValueError("orders must be non-negative")
    space = ParamSpace.farima(p, q) if space is None else space
    if space.dim != 1 + p + q:
        raise ValueError(f"parameter box has dimension {space.dim}, expected {1 + p + q}")
    if not (0.0 < space.lower[0] and space.upper[0] < 0.5):
        raise ValueError("d-bounds must sit strictly inside (0, 0.5)")

    def res(lam, y, start, stop):
        return residuals(FarimaParams.from_vector(lam, p, q), y, start, stop)

    def pan(lam, y, start, stop):
        return score_panel(FarimaParams.from_vector(lam, p, q), y, start, stop)

    return ModelSpec("farima", space, res, pan, (p, q))


def _ar_design(phi_dim: int, y: np.ndarray) -> np.ndarray:
    X = np.zeros((y.size, phi_dim))
    for i in range(1, phi_dim + 1):
        X[i:, i - 1] = y[:-i] if i < y.size else []
    return X


def ar_model(p: int = 1, space: ParamSpace | None = None) -> ModelSpec:
    """AR(p) least-squares model ``e_t = y_t - sum phi_i y_{t-i}`` with ``y_0 = ... = 0``."""
    if p < 1:
        raise ValueError("AR order must be at least 1")
    if space is None:
        space = ParamSpace((-0.999,) * p, (0.999,) * p)
    if space.dim != p:
        raise ValueError(f"parameter box has dimension {space.dim}, expected {p}")
    if p == 1 and (space.lower[0] < -0.999 or space.upper[0] > 0.999):
        raise ValueError("AR(1) box must satisfy |phi| <= 1 - 1e-3")

    def res(lam, y, start, stop):
        seg = np.asarray(y, dtype=float)[start:stop]
        return seg - _ar_design(p, seg) @ lam

    def pan(lam, y, start, stop):
        seg = np.asarray(y, dtype=float)[start:stop]
        X = _ar_design(p, seg)
        return ScorePanel(seg - X @ lam, -X, np.zeros((seg.size, p, p)))

    return ModelSpec("ar", space, res, pan, (p,))


@dataclass(frozen=True)
class FitResult:
    """Maximizer of ``sum l_t`` over a sub-range."""

    lambda_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    sub_range: tuple[int, int]
    at_boundary: bool = False


def _values(series) -> np.ndarray:
    if isinstance(series, SeriesBuffer):
        return series.values
    return np.asarray(series, dtype=float).reshape(-1)


def _safe_objective(model: ModelSpec, lam, y, start, stop) -> float:
    try:
        return model.objective(lam, y, start, stop)
    except ValueError:
        return -np.inf


def _newton(model: ModelSpec, y, start, stop, lam0, max_iter: int):
    """Projected Newton ascent with step halving; returns (lam, obj, iters, converged)."""
    space = model.space
    lam = space.clip(lam0)
    obj = _safe_objective(model, lam, y, start, stop)
    for it in range(1, max_iter + 1):
        pan = model.panel(lam, y, start, stop)
        g = pan.score_sum()
        H = pan.hessian_sum()
        # Coordinates pinned at a bound with the gradient pushing outward stay fixed.
        free = ~((lam <= space.lo) & (g < 0) | (lam >= space.hi) & (g > 0))
        step = np.zeros_like(lam)
        ok = False
        if free.any():
            Hf = H[np.ix_(free, free)]
            try:
                w = np.linalg.eigvalsh(Hf)
                ok = w.min() > 1e-12 * max(abs(w.max()), 1.0)
            except np.linalg.LinAlgError:
                ok = False
            if ok:
                step[free] = np.linalg.solve(Hf, g[free])
            else:
                step[free] = 0.05 * np.sign(g[free])
        new = space.clip(lam + step)
        new_obj = _safe_objective(model, new, y, start, stop)
        moved = np.max(np.abs(new - lam))
        if ok and moved <= NEWTON_ZONE and np.isfinite(new_obj):
            # Close to the optimum the objective comparison is rounding noise,
            # so take plain Newton steps there.
            lam, obj = new, new_obj
            if moved <= XTOL:
                return lam, obj, it, True
            continue
        halvings = 0
        while not new_obj >= obj and halvings < 60:
            step *= 0.5
            new = space.clip(lam + step)
            new_obj = _safe_objective(model, new, y, start, stop)
            halvings += 1
        moved = np.max(np.abs(new - lam))
        gain = new_obj - obj
        if not new_obj >= obj:
            return lam, obj, it, True
        lam, obj = new, new_obj
        if moved <= XTOL or (not ok and gain <= FTOL * (1.0 + abs(obj))):
            return lam, obj, it, True
    return lam, obj, max_iter, False


def _scalar_start(model: ModelSpec, y, start, stop) -> tuple[float, int]:
    lo, hi = model.space.lower[0], model.space.upper[0]
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = np.array([_safe_objective(model, [g], y, start, stop) for g in grid])
    j = int(np.argmax(vals))
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, GRID_POINTS - 1)]
    res = optimize.minimize_scalar(
        lambda x: -_safe_objective(model, [x], y, start, stop),
        bounds=(a, b),
        method="bounded",
        options={"xatol": XTOL, "maxiter": MAX_ITER},
    )
    return float(res.x), int(res.nfev)


def _vector_start(model: ModelSpec, y, start, stop, lam0) -> tuple[np.ndarray, int]:
    def fun(lam):
        try:
            pan = model.panel(lam, y, start, stop)
        except ValueError:
            return np.inf, np.zeros_like(lam)
        return -pan.objective(), -pan.score_sum()

    res = optimize.minimize(
        fun,
        model.space.clip(lam0),
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(model.space.lower, model.space.upper)),
        options={"maxiter": MAX_ITER, "ftol": FTOL, "gtol": 1e-10},
    )
    return np.asarray(res.x, dtype=float), int(res.nit)


def fit(
    model: ModelSpec,
    series,
    start: int = 0,
    stop: int | None = None,
    init=None,
    *,
    min_length: int | None = None,
) -> FitResult:
    """Maximize ``sum_{t in [start, stop)} l_t(lam)`` over the model box.

    Without ``init`` a one-dimensional model is bracketed on a 25-point grid
    and refined by bounded Brent search; a vector model starts with L-BFGS-B
    from the box center.  Either way a projected Newton polish follows.  With
    ``init`` only the Newton polish runs.

    ``min_length`` overrides the default minimum range length
    ``max(3 m, 8)``; the scan lowers it to its trim so that short edge pieces
    can still be fitted.

    Raises
    ------
    RangeTooShort
        If the range is shorter than the minimum length.
    """
    y = _values(series)
    stop = y.size if stop is None else int(stop)
    start = int(start)
    if not (0 <= start < stop <= y.size):
        raise ValueError(f"invalid range [{start}, {stop}) for n = {y.size}")
    m = model.dim
    need = max(3 * m, 8) if min_length is None else max(int(min_length), m + 1)
    if stop - start < need:
        raise RangeTooShort(f"range length {stop - start} is below the minimum {need}")
    pre_iter = 0
    if init is not None:
        lam0 = model.space.clip(np.atleast_1d(np.asarray(init, dtype=float)))
    elif m == 1:
        x, pre_iter = _scalar_start(model, y, start, stop)
        lam0 = np.array([x])
    else:
        lam0, pre_iter = _vector_start(model, y, start, stop, model.space.center)
    lam, obj, it, ok = _newton(model, y, start, stop, lam0, MAX_ITER)
    if not ok:
        warnings.warn(f"fit on [{start}, {stop}) hit the iteration cap", NonConvergence, stacklevel=2)
    if not np.isfinite(obj):
        raise ValueError(f"no finite objective found on [{start}, {stop})")
    return FitResult(
        lambda_hat=lam,
        objective=obj,
        iterations=pre_iter + it,
        converged=ok,
        sub_range=(start, stop),
        at_boundary=bool(model.space.at_boundary(lam, BOUNDARY_TOL).any()),
    )
