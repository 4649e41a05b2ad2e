from __future__ import annotations

import logging

import numpy as np
import pytest

from cpwald import mc
from cpwald.mc import (
    McDesign,
    null_distribution,
    run_power,
    run_size,
    table1,
    table1_rows,
    worker_count,
)
from cpwald.scan import critical_value


def test_design_validation():
    with pytest.raises(ValueError):
        McDesign(250, 0, 0.2)
    with pytest.raises(ValueError):
        McDesign(250, 10, 0.6)
    with pytest.raises(ValueError):
        McDesign(250, 10, 0.1, alt_d=0.3)
    with pytest.raises(ValueError):
        McDesign(250, 10, 0.1, 0.3, 0.99)
    with pytest.raises(ValueError):
        McDesign(250, 10, 0.1, mode="splice")
    assert McDesign(250, 10, 0.1, 0.3, 0.9).break_index == 225


def test_single_replication_is_deterministic():
    d = McDesign(120, 1, 0.2, seed=3)
    a, b = run_size(d, workers=1), run_size(d, workers=1)
    assert all(r in (0.0, 1.0) for r in a.rates)
    assert a.digest() == b.digest()
    assert a.w_hat.tobytes() == b.w_hat.tobytes()


def test_report_rates_nested_and_standard_errors():
    rep = run_size(McDesign(150, 60, 0.3, seed=4), workers=1)
    assert rep.rates[2] <= rep.rates[1] <= rep.rates[0]
    for a, r, s in zip(rep.design.levels, rep.rates, rep.std_errors):
        assert r == np.mean(rep.w_hat > critical_value(a))
        assert s == pytest.approx(np.sqrt(r * (1 - r) / 60))
    lo, hi = rep.bracket(0)
    assert lo <= rep.rates[0] <= hi


def test_worker_count_does_not_change_the_report():
    d = McDesign(150, 9, 0.2, 0.4, 0.5, seed=5)
    a = run_power(d, workers=1)
    b = run_power(d, workers=3)
    assert a.digest() == b.digest()
    assert a.w_hat.tobytes() == b.w_hat.tobytes()


def test_worker_count_resolution(monkeypatch):
    monkeypatch.setenv("CP_WALD_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.delenv("CP_WALD_THREADS")
    assert worker_count() >= 1


def test_digest_ignores_timing():
    d = McDesign(120, 3, 0.2, seed=6)
    a = run_size(d, workers=1)
    b = run_size(d, workers=1)
    assert a.mean_runtime != b.mean_runtime or a.mean_runtime > 0
    assert a.digest() == b.digest()
    assert "mean_runtime" not in a.to_dict() and "mean_runtime" in a.to_dict(include_timing=True)


def test_failed_replication_is_redrawn(monkeypatch, caplog):
    real = mc.scan
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 1:
            raise ValueError("injected")
        return real(*args, **kw)

    monkeypatch.setattr(mc, "scan", flaky)
    with caplog.at_level(logging.WARNING, logger="cpwald.mc"):
        rep = run_size(McDesign(120, 2, 0.2, seed=7), workers=1)
    assert rep.redraws == 1
    assert "injected" in caplog.text


def test_degenerate_alternative_matches_size():
    a = run_size(McDesign(250, 300, 0.2, seed=12), workers=1)
    b = run_power(McDesign(250, 300, 0.2, 0.2, 0.5, seed=12), workers=1)
    for i in range(3):
        se = np.hypot(a.std_errors[i], b.std_errors[i])
        assert abs(a.rates[i] - b.rates[i]) <= 3 * max(se, 1 / 300)


def test_null_distribution_ecdf_properties():
    nd = null_distribution(McDesign(120, 40, 0.2, seed=8), workers=1)
    assert np.all(np.diff(nd.sample) >= 0)
    assert np.all(np.diff(nd.ecdf) >= 0) and nd.ecdf[0] > 0 and nd.ecdf[-1] == 1.0
    assert 0.0 <= nd.ks <= 1.0
    assert nd.limit_median == pytest.approx(critical_value(0.5))
    assert nd.exceedance == nd.report.rates


def test_table1_layout():
    reps = table1(120, d0=(0.2,), reps=2, seed=9, alt_d=(0.3,), taus=(0.5,), workers=1)
    header, rows = table1_rows(reps)
    assert header[:6] == ["block", "n", "d0", "d1", "tau", "reps"]
    assert len(header) == 12
    assert [r[0] for r in rows] == ["size", "power_tau0.5"]


def test_short_break_power_example():
    # Reference rates (0.135, 0.089, 0.022) at n = 250, d0 = 0.1, d1 = 0.2, tau = 0.9.
    rep = run_power(McDesign(250, 1000, 0.1, 0.2, 0.9, seed=13))
    for got, want in zip(rep.rates, (0.135, 0.089, 0.022)):
        assert abs(got - want) <= 0.08
