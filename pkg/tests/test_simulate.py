from __future__ import annotations

import math

import numpy as np
import pytest

from bmdlcp.monitor import MonitorConfig
from bmdlcp.search import SearchConfig
from bmdlcp.simulate import ScenarioSpec, cell_seed, generate_scenario, standard_grid, run_study

FAST = MonitorConfig(search=SearchConfig(iterations=300))


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(n=50, cp_time=60)
    with pytest.raises(ValueError):
        ScenarioSpec(phi=1.0)
    with pytest.raises(ValueError):
        ScenarioSpec(seasonal_range=-1)


def test_pure_white_noise():
    spec = ScenarioSpec(phi=0.0, seasonal_range=0.0, seed=1)
    x = generate_scenario(spec).values
    z = np.random.default_rng(1).standard_normal(500)
    assert np.allclose(x, z)


def test_jump_in_mean():
    spec = ScenarioSpec(jump=10.0)
    mu = spec.mean()
    season = 3 * np.sin(2 * math.pi * np.array([59, 60]) / 12)
    assert mu[59] - mu[58] == pytest.approx(10 + season[1] - season[0], abs=1e-12)


def test_continuous_kink():
    spec = ScenarioSpec(slope_before=0.2, slope_after=-0.2, seasonal_range=0.0)
    mu = spec.mean()
    assert mu[59] == pytest.approx(0.2 * 60)
    assert mu[60] - mu[59] == pytest.approx(-0.2)
    assert mu[58] == pytest.approx(0.2 * 59)


def test_seasonal_range_and_period():
    spec = ScenarioSpec(seasonal_range=6.0)
    season = spec.mean()
    assert season.max() - season.min() == pytest.approx(6.0, abs=1e-12)
    assert np.allclose(season[:-12], season[12:], atol=1e-12)


def test_ar_component_autocorrelation():
    # sampling sd of the lag-1 autocorrelation is about 0.04 at n=500
    acfs = []
    for seed in range(20):
        spec = ScenarioSpec(seasonal_range=0.0, phi=0.5, seed=seed)
        eps = generate_scenario(spec).values - spec.mean()
        e = eps - eps.mean()
        acfs.append(float(e[1:] @ e[:-1] / (e @ e)))
    assert abs(np.mean(acfs) - 0.5) < 0.03
    assert max(abs(a - 0.5) for a in acfs) < 0.15
    assert np.mean([abs(a - 0.5) < 0.1 for a in acfs]) >= 0.9


def test_standard_grid_counts():
    grid = standard_grid()
    assert len(grid) == 108
    assert sum(not s.has_change for s in grid) == 4
    assert all(s.n == 500 and s.cp_time == 60 and s.phi == 0.3 for s in grid)
    assert len({s.name for s in grid}) == 108


def test_cell_seed_independent_of_reps():
    a = cell_seed(1, 3, 4).generate_state(2)
    b = cell_seed(1, 3, 4).generate_state(2)
    c = cell_seed(1, 3, 5).generate_state(2)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_single_rep_single_scenario():
    spec = ScenarioSpec(n=100, phi=0.0, seasonal_range=0.0, name="wn")
    res = run_study([spec], 1, seed=0, monitor=FAST)
    assert len(res.summaries) == 2
    for s in res.summaries:
        assert s.rate in (0.0, 1.0) and s.reps == 1


def test_study_deterministic_and_prefix_stable():
    grid = [ScenarioSpec(n=90, jump=5.0, name="j5"), ScenarioSpec(n=90, name="flat")]
    a = run_study(grid, 2, seed=4, monitor=FAST)
    b = run_study(grid, 2, seed=4, monitor=FAST)
    assert a == b
    more = run_study(grid, 3, seed=4, monitor=FAST)
    assert [c for c in more.cells if c.rep < 2] == list(a.cells)


def test_workers_do_not_change_results():
    grid = [ScenarioSpec(n=80, jump=4.0, name="j4")]
    assert run_study(grid, 2, seed=1, monitor=FAST) == run_study(grid, 2, seed=1, monitor=FAST, workers=2)


def test_summary_invariants():
    grid = [ScenarioSpec(n=90, jump=6.0, name="j6"), ScenarioSpec(n=90, name="flat")]
    res = run_study(grid, 3, seed=2, monitor=FAST)
    for s in res.summaries:
        assert 0.0 <= s.rate <= 1.0
        if s.detections == 0:
            assert s.median_run_length is None
    for rates in res.pooled.values():
        assert all(0.0 <= v <= 1.0 for v in rates.values())
    assert set(res.pooled["bmdl"]) == {"false_positive_rate", "true_positive_rate"}


def test_run_study_errors():
    with pytest.raises(ValueError):
        run_study([], 1)
    with pytest.raises(ValueError):
        run_study([ScenarioSpec()], 0)
    with pytest.raises(ValueError):
        run_study([ScenarioSpec(n=80)], 1, methods=("cusum",), monitor=FAST)
