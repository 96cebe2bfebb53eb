from __future__ import annotations

import numpy as np
import pytest
from conftest import make_series, step_series

from bmdlcp.model import Hyperparams
from bmdlcp.monitor import MonitorConfig, MonitorOutcome, horizon_seed, monitor_series
from bmdlcp.search import SearchConfig

FAST = MonitorConfig(start_time=60, search=SearchConfig(iterations=1000, seed=3))


def test_run_length_examples():
    assert MonitorOutcome.detection(60, (60,), 60).run_length == 0
    assert MonitorOutcome.detection(61, (60,), 60).run_length == 1
    assert MonitorOutcome.detection(61, (60,), None).run_length is None


def test_config_checks():
    with pytest.raises(ValueError):
        MonitorConfig(start_time=6).check(Hyperparams())
    MonitorConfig(start_time=7).check(Hyperparams())


def test_iteration_budget_scales_and_caps():
    cfg = MonitorConfig(start_time=60, search=SearchConfig(iterations=10_000), max_iterations=15_000)
    assert cfg.iterations_at(60) == 10_000
    assert cfg.iterations_at(78) == 13_000
    assert cfg.iterations_at(500) == 15_000
    flat = MonitorConfig(start_time=60, search=SearchConfig(iterations=500), scale_with_length=False)
    assert flat.iterations_at(400) == 500


def test_horizon_seed():
    assert horizon_seed(5, 60) == 5 ^ 60


def test_strong_step_detected_immediately():
    out = monitor_series(step_series(0, n=100), Hyperparams(), FAST, reference_time=60)
    assert out.detected and out.detection_time == 60 and out.run_length == 0
    assert 60 in out.detected_changepoints


def test_short_series_rejected():
    with pytest.raises(ValueError):
        monitor_series(step_series(0, n=50), Hyperparams(), FAST)


def test_prefix_discipline_and_stopping():
    ts = step_series(1, n=100, tau=70)
    seen = []

    def observer(h, prefix, result):
        assert prefix.n == h
        assert np.array_equal(prefix.values, ts.values[:h])
        assert result.best.model.n == h
        seen.append(h)

    out = monitor_series(ts, Hyperparams(), FAST, reference_time=70, observer=observer)
    assert seen == list(range(60, out.detection_time + 1))
    assert out.detection_time >= 70 - 2


def test_determinism():
    ts = make_series(np.random.default_rng(2).standard_normal(90))
    a = monitor_series(ts, Hyperparams(), FAST)
    b = monitor_series(ts, Hyperparams(), FAST)
    assert a == b


def test_resume_from_state_matches_full_run():
    ts = make_series(np.random.default_rng(3).standard_normal(95))
    full = monitor_series(ts, Hyperparams(), FAST)
    part = monitor_series(ts.prefix(75), Hyperparams(), FAST)
    if part.detected:
        assert full == part
    else:
        resumed = monitor_series(ts, Hyperparams(), FAST, state=part.state)
        assert resumed.detected == full.detected
        assert resumed.detection_time == full.detection_time
        assert resumed.detected_changepoints == full.detected_changepoints


def test_recency_window():
    ts = step_series(0, n=100, tau=30)
    cfg = MonitorConfig(start_time=60, search=SearchConfig(iterations=1000), recency_window=5)
    out = monitor_series(ts, Hyperparams(), cfg)
    # the old change at 30 is never recent enough
    assert not out.detected or all(t > out.detection_time - 5 for t in out.detected_changepoints)


@pytest.mark.slow
def test_null_series_mostly_not_detected():
    detected = 0
    cfg = MonitorConfig(start_time=60)
    for seed in range(3):
        rng = np.random.default_rng(500 + seed)
        ts = make_series(rng.standard_normal(200))
        detected += monitor_series(ts, Hyperparams(), cfg).detected
    assert detected <= 1
