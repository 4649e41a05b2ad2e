"""Deterministic random streams.

Every random draw in the package comes from a Philox (counter-based) bit
generator keyed by ``(seed, *stream_key)``.  Replication ``r`` of a Monte Carlo
design always reads stream ``(seed, r, attempt)``, so results do not depend on
how replications are spread over worker processes.
"""

from __future__ import annotations

import numpy as np

INNOVATION_FAMILIES = ("normal", "student-t", "centered-exp")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` of ``seed``."""
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def draw_innovations(
    rng: np.random.Generator,
    size: int,
    family: str = "normal",
    df: float | None = None,
) -> np.ndarray:
    """Mean-zero, unit-variance i.i.d. innovations.

    ``student-t`` is rescaled by ``sqrt((df - 2) / df)`` and requires
    ``df > 4`` so that the fourth moment the sandwich estimator relies on is
    finite.  ``centered-exp`` is ``Exp(1) - 1``, a skewed law used to build
    time-irreversible processes.
    """
    if family == "normal":
        return rng.standard_normal(size)
    if family == "student-t":
        if df is None or not df > 4:
            raise ValueError("student-t innovations need df > 4")
        return rng.standard_t(df, size) * np.sqrt((df - 2.0) / df)
    if family == "centered-exp":
        return rng.standard_exponential(size) - 1.0
    raise ValueError(f"unknown innovation family {family!r}; expected one of {INNOVATION_FAMILIES}")
