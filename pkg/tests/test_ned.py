from __future__ import annotations

import math

import numpy as np
import pytest

from cpwald.ned import (
    NedSequenceSpec,
    ar1_series,
    gaussian_max_check,
    generate,
    geometric_grid,
    irreversibility,
    max_statistic,
    ned_report,
    paths_from,
    rate_fit,
    sum_paths,
)
from cpwald.rng import stream


# One-sample KS half-width at 5% used as the unit of Monte Carlo noise.
def ks_noise(reps: int) -> float:
    return 1.358 / math.sqrt(reps)


def test_grid_is_geometric_and_floored():
    k = geometric_grid(100_000)
    assert k[0] == 32 and np.all(np.diff(k) > 0) and k[-1] <= 100_000
    assert geometric_grid(1000, start=10)[0] == 10


def test_spec_validation():
    with pytest.raises(ValueError):
        NedSequenceSpec("garch")
    with pytest.raises(ValueError):
        NedSequenceSpec("custom")
    with pytest.raises(ValueError):
        NedSequenceSpec("ar1-sq", phi=1.0)
    with pytest.raises(ValueError):
        sum_paths(NedSequenceSpec(), 999)


def test_iid_path_respects_lil_envelope():
    # Pooled over realizations; a single path exceeds 5% in roughly 13% of seeds.
    frac = []
    for s in range(100):
        p = sum_paths(NedSequenceSpec("iid"), 100_000, seed=s)
        sel = p.k >= 1000
        env = np.sqrt(2 * np.log(np.log(p.k[sel])) / p.k[sel])
        frac.append(np.mean(np.abs(p.mean[sel]) > env))
    assert np.mean(frac) <= 0.05


def test_forward_and_backward_paths_differ():
    spec = NedSequenceSpec("ar1-sq")
    f = sum_paths(spec, 10_000, "forward", seed=1)
    b = sum_paths(spec, 10_000, "backward", seed=1)
    np.testing.assert_array_equal(f.k, b.k)
    assert np.all(f.mean != b.mean)


@pytest.mark.parametrize("gen", ["iid", "ar1-sq", "ar1-score", "farima-score"])
def test_sample_mean_vanishes(gen):
    n = 100_000
    x = generate(NedSequenceSpec(gen), n, stream(2, 0))
    batch = np.array([b.mean() for b in np.array_split(x, 100)])
    lrsd = batch.std(ddof=1) * math.sqrt(n / 100)
    assert abs(x.mean()) <= 3 * lrsd / math.sqrt(n)


def test_iid_rate_near_half():
    d = [rate_fit(sum_paths(NedSequenceSpec("iid"), 100_000, seed=s)).delta for s in range(20)]
    assert abs(np.mean(d) - 0.5) <= 0.1


@pytest.mark.parametrize("seed", range(5))
def test_ar1_squared_rate_exceeds_quarter(seed):
    rep = ned_report(NedSequenceSpec("ar1-sq", phi=0.8), 100_000, seed=seed)
    assert rep["forward"].rate.delta > 0.25
    assert rep["backward"].rate.delta > 0.25


def test_zero_sequence_gives_infinite_rate():
    p = paths_from(np.zeros(5000))
    assert rate_fit(p).delta == math.inf


def test_rate_fit_needs_grid():
    with pytest.raises(ValueError):
        rate_fit(paths_from(np.ones(1000)), k_min=900)


def test_iid_gaussian_max_distance():
    # Calibrated: the exact Gaussian law sits about 0.09 from the limit at
    # n = 5000, mu = 0.9, and 500 replications add about 0.04 of noise.
    rep = gaussian_max_check(NedSequenceSpec("iid"), 5000, 500, seed=3)
    assert rep["forward"].ks <= 0.15


def test_gaussian_max_directions_agree_for_farima_score():
    rep = gaussian_max_check(NedSequenceSpec("farima-score"), 5000, 500, seed=4)
    assert abs(rep["forward"].ks - rep["backward"].ks) <= 2 * ks_noise(500)


def test_gaussian_max_rejects_empty_range():
    with pytest.raises(ValueError):
        gaussian_max_check(NedSequenceSpec("iid"), 5000, 5, mu=1e-4)
    with pytest.raises(ValueError):
        gaussian_max_check(NedSequenceSpec("iid"), 5000, 5, mu=1.0)
    with pytest.raises(ValueError):
        ned_report(NedSequenceSpec("ar1-sq"), 5000, gm_reps=3)


def test_max_statistic_studentized(rng):
    x = rng.standard_normal((3000, 2))
    x[:, 1] += 0.5 * x[:, 0]
    v = max_statistic(x, 0.9)
    for c in (1e-3, -4.0, 250.0):
        assert max_statistic(c * x, 0.9) == pytest.approx(v, rel=1e-9)


def test_irreversible_process_passes_both_directions():
    y = ar1_series(0.5, 100_000, stream(5, 0), family="centered-exp")
    irr = irreversibility(y)
    assert irr.forward == pytest.approx(-irr.backward, rel=1e-9)
    assert abs(irr.z) > 5

    sq = ned_report(NedSequenceSpec("ar1-sq", phi=0.5, family="centered-exp"), 100_000, seed=5)
    assert sq["forward"].rate.positive_at_2se and sq["backward"].rate.positive_at_2se

    gm = gaussian_max_check(NedSequenceSpec("ar1-score", phi=0.5, family="centered-exp"), 5000, 500, seed=5)
    assert gm["forward"].ks <= 0.10
    assert gm["backward"].ks <= 0.10


def test_custom_generator_shape_checked():
    spec = NedSequenceSpec("custom", func=lambda rng, n: rng.standard_normal(n + 1))
    with pytest.raises(ValueError):
        generate(spec, 100, stream(0))


def test_report_dict_fields():
    rep = ned_report(NedSequenceSpec("farima-score"), 20_000, seed=6, gm_n=2000, gm_reps=20)
    d = rep["backward"].to_dict()
    assert d["direction"] == "backward" and d["gm_reps"] == 20 and d["delta_se"] > 0
