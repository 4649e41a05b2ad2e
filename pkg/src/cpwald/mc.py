"""Monte Carlo size and power of the normalized Wald scan for FARIMA(0, d, 0).

Replication ``r`` of a design reads the Philox stream
``(seed, *design.cell_key, r, attempt)``; ``attempt`` only moves past 0 when
a replication fails and is redrawn.  Results are therefore identical for any
worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .farima import (
    FarimaParams,
    ParamSpace,
    SeriesBuffer,
    causal_filter,
    inverse_frac_coeffs,
    simulate_farima,
)
from .models import farima_model
from .rng import draw_innovations, stream
from .scan import ScanDegenerate, critical_value, default_trim, scan

log = logging.getLogger(__name__)

LEVELS = (0.10, 0.05, 0.01)
MAX_ATTEMPTS = 10
BREAK_MODES = ("restart", "continue")

# Operations that implement a formula; each needs an equation-map entry.
__operations__ = ("run_size", "run_power", "null_distribution")


def limit_cdf(x):
    """``exp(-2 exp(-x / 2))``."""
    with np.errstate(over="ignore"):
        return np.exp(-2.0 * np.exp(-0.5 * np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class McDesign:
    """One Monte Carlo cell.

    ``alt_d`` and ``break_frac`` turn a size design into a power design with
    the break at ``floor(break_frac * n)``.
    """

    n: int
    reps: int
    null_d: float
    alt_d: float | None = None
    break_frac: float | None = None
    levels: tuple[float, ...] = LEVELS
    seed: int = 0
    trim: int | None = None
    d_bounds: tuple[float, float] = (0.01, 0.49)
    mode: str = "restart"
    family: str = "normal"
    df: float | None = None
    cut: int | None = None
    burn: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))
        object.__setattr__(self, "d_bounds", tuple(float(b) for b in self.d_bounds))
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        for d in (self.null_d, self.alt_d):
            if d is not None and not 0.0 < d < 0.5:
                raise ValueError(f"d values must lie in (0, 0.5), got {d}")
        if (self.alt_d is None) != (self.break_frac is None):
            raise ValueError("alt_d and break_frac must be given together")
        if self.mode not in BREAK_MODES:
            raise ValueError(f"mode must be one of {BREAK_MODES}")
        if self.alt_d is not None:
            k = self.break_index
            t = self.effective_trim
            if not t < k < self.n - t:
                raise ValueError(f"break index {k} not inside ({t}, {self.n - t})")
        for a in self.levels:
            critical_value(a)

    @property
    def is_power(self) -> bool:
        return self.alt_d is not None

    @property
    def break_index(self) -> int:
        return int(np.floor(self.break_frac * self.n))

    @property
    def effective_trim(self) -> int:
        return default_trim(self.n, 1) if self.trim is None else int(self.trim)

    @property
    def cell_key(self) -> tuple[int, ...]:
        """Stream prefix shared by every run of this cell, whatever table it sits in."""
        q = lambda v: int(round(v * 10_000))  # noqa: E731
        if self.is_power:
            return (2, self.n, q(self.null_d), q(self.alt_d), q(self.break_frac))
        return (1, self.n, q(self.null_d))


@dataclass(frozen=True)
class McReport:
    """Rejection rates with ``sqrt(r (1 - r) / reps)`` standard errors."""

    design: McDesign
    rates: tuple[float, ...]
    std_errors: tuple[float, ...]
    w_hat: np.ndarray
    redraws: int
    mean_runtime: float = field(compare=False, default=float("nan"))

    def bracket(self, i: int, width: float = 3.0) -> tuple[float, float]:
        r, s = self.rates[i], self.std_errors[i]
        return r - width * s, r + width * s

    def to_dict(self, include_samples: bool = False, include_timing: bool = False) -> dict:
        """Deterministic content; timing is opt-in since it varies between runs."""
        out = {
            "schema": "cp-wald/1",
            "design": asdict(self.design),
            "levels": list(self.design.levels),
            "critical_values": [critical_value(a) for a in self.design.levels],
            "rates": list(self.rates),
            "std_errors": list(self.std_errors),
            "redraws": self.redraws,
        }
        if include_samples:
            out["w_hat"] = [float(v) for v in self.w_hat]
        if include_timing:
            out["mean_runtime"] = self.mean_runtime
        return out

    def digest(self) -> str:
        """SHA-256 of the canonical JSON including every replication's statistic."""
        blob = json.dumps(self.to_dict(include_samples=True), sort_keys=True, allow_nan=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def simulate_break(
    d0: float,
    d1: float,
    n: int,
    k: int,
    rng: np.random.Generator,
    mode: str = "restart",
    family: str = "normal",
    df: float | None = None,
    cut: int | None = None,
    burn: int | None = None,
) -> SeriesBuffer:
    """FARIMA(0, d0, 0) on ``y[0:k]`` and FARIMA(0, d1, 0) on ``y[k:n]``.

    ``restart`` filters the post-break innovations alone (zero presample at
    the break, no burn-in); ``continue`` runs the whole innovation history,
    burn-in included, through the post-break filter.
    """
    cut = max(n, 10**4) if cut is None else int(cut)
    burn = 2 * cut if burn is None else int(burn)
    eps = draw_innovations(rng, burn + n, family, df)
    m0 = inverse_frac_coeffs(d0, cut).weights
    m1 = inverse_frac_coeffs(d1, cut).weights
    left = causal_filter(m0, eps[: burn + k])[burn:]
    if mode == "restart":
        right = causal_filter(m1, eps[burn + k :])
    elif mode == "continue":
        right = causal_filter(m1, eps)[burn + k :]
    else:
        raise ValueError(f"unknown break mode {mode!r}")
    prov = {"generator": "farima-break", "d0": d0, "d1": d1, "k": k, "mode": mode, "cut": cut, "burn": burn}
    return SeriesBuffer(np.concatenate([left, right]), None, prov, innovations=eps[burn:])


def _simulate(design: McDesign, rng: np.random.Generator) -> SeriesBuffer:
    if design.is_power:
        return simulate_break(
            design.null_d,
            design.alt_d,
            design.n,
            design.break_index,
            rng,
            design.mode,
            design.family,
            design.df,
            design.cut,
            design.burn,
        )
    cut = max(design.n, 10**4) if design.cut is None else design.cut
    burn = 2 * cut if design.burn is None else design.burn
    eps = draw_innovations(rng, burn + design.n, design.family, design.df)
    return simulate_farima(FarimaParams(design.null_d), design.n, eps, cut=cut, burn=burn)


def replicate(design: McDesign, r: int) -> tuple[float, int, float]:
    """Normalized statistic of replication ``r``; returns (w_hat, redraws, seconds)."""
    model = farima_model(ParamSpace.farima(0, 0, design.d_bounds))
    t0 = time.perf_counter()
    for attempt in range(MAX_ATTEMPTS):
        rng = stream(design.seed, *design.cell_key, r, attempt)
        try:
            y = _simulate(design, rng)
            res = scan(model, y, trim=design.trim)
        except (ScanDegenerate, FloatingPointError, ValueError) as exc:
            log.warning("replication %d attempt %d failed: %s", r, attempt, exc)
            continue
        return res.w_hat, attempt, time.perf_counter() - t0
    raise RuntimeError(f"replication {r} failed {MAX_ATTEMPTS} times")


def _replicate_block(design: McDesign, idx: list[int]) -> list[tuple[float, int, float]]:
    return [replicate(design, r) for r in idx]


def worker_count(workers: int | None = None) -> int:
    """``workers`` if given, else ``CP_WALD_THREADS``, else the CPU count."""
    if workers:
        return max(1, int(workers))
    env = os.environ.get("CP_WALD_THREADS")
    return max(1, int(env) if env else (os.cpu_count() or 1))


def _run(design: McDesign, workers: int | None) -> tuple[np.ndarray, int, float]:
    w = worker_count(workers)
    idx = list(range(design.reps))
    if w == 1 or design.reps == 1:
        out = _replicate_block(design, idx)
    else:
        blocks = [idx[i::w] for i in range(w)]
        with ProcessPoolExecutor(max_workers=w) as ex:
            parts = list(ex.map(_replicate_block, [design] * w, blocks))
        out = [None] * design.reps
        for b, part in zip(blocks, parts):
            for r, v in zip(b, part):
                out[r] = v
    w_hat = np.array([o[0] for o in out])
    return w_hat, int(sum(o[1] for o in out)), float(np.mean([o[2] for o in out]))


def _report(design: McDesign, workers: int | None) -> McReport:
    w_hat, redraws, rt = _run(design, workers)
    rates = tuple(float(np.mean(w_hat > critical_value(a))) for a in design.levels)
    ses = tuple(float(np.sqrt(r * (1.0 - r) / design.reps)) for r in rates)
    return McReport(design, rates, ses, w_hat, redraws, rt)


def run_size(design: McDesign, workers: int | None = None) -> McReport:
    """Rejection rates of the no-change hypothesis under FARIMA(0, d0, 0)."""
    if design.is_power:
        raise ValueError("run_size needs a design without alt_d")
    return _report(design, workers)


def run_power(design: McDesign, workers: int | None = None) -> McReport:
    """Rejection rates under a single break from ``d0`` to ``d1`` at ``floor(tau n)``."""
    if not design.is_power:
        raise ValueError("run_power needs alt_d and break_frac")
    return _report(design, workers)


@dataclass(frozen=True)
class NullDistribution:
    """Sorted null sample of the normalized statistic against the limit law."""

    sample: np.ndarray
    ecdf: np.ndarray
    ks: float
    ks_pvalue: float
    levels: tuple[float, ...]
    exceedance: tuple[float, ...]
    median: float
    limit_median: float
    report: McReport

    def to_dict(self) -> dict:
        return {
            "schema": "cp-wald/1",
            "design": asdict(self.report.design),
            "ks": self.ks,
            "ks_pvalue": self.ks_pvalue,
            "levels": list(self.levels),
            "exceedance": list(self.exceedance),
            "median": self.median,
            "limit_median": self.limit_median,
            "sample": [float(v) for v in self.sample],
        }


def null_distribution(design: McDesign, workers: int | None = None) -> NullDistribution:
    """Null sample of the normalized statistic and its KS distance to the limit law."""
    rep = run_size(design, workers)
    s = np.sort(rep.w_hat)
    ks = stats.kstest(s, limit_cdf)
    return NullDistribution(
        sample=s,
        ecdf=np.arange(1, s.size + 1) / s.size,
        ks=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        levels=design.levels,
        exceedance=rep.rates,
        median=float(np.median(s)),
        limit_median=critical_value(0.5),
        report=rep,
    )


TABLE1_COLUMNS = ("block", "n", "d0", "d1", "tau", "reps")


def table1(
    n: int,
    d0=(0.1, 0.2, 0.3, 0.4),
    reps: int = 1000,
    seed: int = 0,
    alt_d=(0.2, 0.3, 0.4),
    taus=(0.5, 0.9),
    power_d0: float = 0.1,
    workers: int | None = None,
    **design_kw,
) -> list[McReport]:
    """Size rows for each ``d0`` followed by power rows for each ``(tau, d1)``."""
    d0s = (d0,) if np.isscalar(d0) else tuple(d0)
    out = [run_size(McDesign(n, reps, d, seed=seed, **design_kw), workers) for d in d0s]
    for tau in taus:
        for d1 in alt_d:
            des = McDesign(n, reps, power_d0, d1, tau, seed=seed, **design_kw)
            out.append(run_power(des, workers))
    return out


def table1_rows(reports: list[McReport]) -> tuple[list[str], list[list]]:
    """Header and rows in the layout of the size/power table, with SE columns."""
    levels = reports[0].design.levels
    tag = [f"{round(100 * a):g}%" for a in levels]
    header = list(TABLE1_COLUMNS) + [f"rate_{t}" for t in tag] + [f"se_{t}" for t in tag]
    rows = []
    for rep in reports:
        d = rep.design
        block = f"power_tau{d.break_frac:g}" if d.is_power else "size"
        rows.append(
            [block, d.n, d.null_d, d.alt_d if d.is_power else "", d.break_frac if d.is_power else "", d.reps]
            + list(rep.rates)
            + list(rep.std_errors)
        )
    return header, rows
