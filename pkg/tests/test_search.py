from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import make_series, seasonal_series, step_series
from oracle import brute_force_best

from bmdlcp.model import ChangepointModel, Hyperparams, validate_model
from bmdlcp.scoring import Scorer, score_model
from bmdlcp.search import (
    Chain,
    SearchConfig,
    acceptance_probability,
    count_models,
    exhaustive_search,
    mh_search,
    mh_step,
)


def small_instance(seed: int, n: int = 30) -> tuple:
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1)
    x = rng.standard_normal(n) + 3.0 * (t >= 15) + 1.5 * np.sin(2 * np.pi * t / 6)
    return make_series(x, period=6), Hyperparams(p_max=2, k_max=1)


def test_acceptance_probability_examples():
    assert acceptance_probability(10.0, 10.0) == 1.0
    assert acceptance_probability(10.0, 9.0) == 1.0
    assert acceptance_probability(10.0, 10.0 + math.log(4)) == pytest.approx(0.25, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(iterations=0)
    with pytest.raises(ValueError):
        SearchConfig(proposal_weights=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        SearchConfig(proposal_weights=(1.2, -0.1, -0.1))
    with pytest.raises(ValueError):
        SearchConfig(seed=-1)


def test_flip_support_excludes_early_times():
    ts = step_series(0, n=60)
    chain = Chain(Scorer(ts, Hyperparams()), SearchConfig())
    proposed = set()
    for u in np.linspace(0, 1, 2001, endpoint=False):
        kind, prop = chain.propose(0.0, u)
        assert kind == "eta"
        if prop is None:
            # t = p_max + 1 would leave regime 1 empty
            assert 6 + int(u * 55) == 6
        else:
            proposed |= set(prop[0])
    assert proposed == set(range(7, 61))


def test_k_and_p_redraws_are_uniform_and_exclude_current():
    ts = seasonal_series(0, n=80)
    chain = Chain(Scorer(ts, Hyperparams()), SearchConfig(), start=ChangepointModel(80, (), 2, 3))
    ks = [chain.propose(0.85, u)[1][1] for u in (np.arange(500) + 0.5) / 500]
    ps = [chain.propose(0.95, u)[1][2] for u in (np.arange(500) + 0.5) / 500]
    assert sorted(set(ks)) == [0, 1, 3, 4, 5] and 2 not in ks
    assert sorted(set(ps)) == [0, 1, 2, 4, 5] and 3 not in ps
    counts = np.bincount(ks, minlength=6)
    assert counts.max() - counts[counts > 0].min() <= 1


def test_too_short_regime_is_auto_rejected():
    ts = step_series(0, n=60)
    hyper = Hyperparams(min_regime_length=3)
    chain = Chain(Scorer(ts, hyper), SearchConfig(), start=ChangepointModel(60, (30,)))
    # t = 31 would leave a one-point regime
    u = (31 - 6 + 0.5) / 55
    assert chain.propose(0.0, u)[1] is None
    assert chain.step(0.0, u, 0.0) is False


def test_mh_step_returns_valid_state():
    ts = step_series(1, n=80)
    hyper = Hyperparams()
    current = score_model(ts, ChangepointModel(80), hyper)
    rng = np.random.default_rng(0)
    for _ in range(50):
        current, moved = mh_step(current, ts, hyper, rng)
        assert isinstance(moved, bool)
        assert validate_model(current.model, hyper.resolve(80, 12), 80, 12) is None
        assert current.bmdl == score_model(ts, current.model, hyper).bmdl


def test_search_is_deterministic():
    ts = seasonal_series(2)
    cfg = SearchConfig(iterations=3000, seed=7, record_trace=True)
    a = mh_search(ts, Hyperparams(), cfg)
    b = mh_search(ts, Hyperparams(), cfg)
    assert a.best.model == b.best.model and a.best.bmdl == b.best.bmdl
    assert a.acceptance_rate == b.acceptance_rate and a.visited_count == b.visited_count
    assert np.array_equal(a.eta_marginals, b.eta_marginals)
    assert a.trace == b.trace


def test_best_bounds_trace_and_is_valid():
    ts = step_series(3, n=120)
    hyper = Hyperparams()
    res = mh_search(ts, hyper, SearchConfig(iterations=4000, seed=1, record_trace=True))
    assert all(res.best.bmdl <= row.bmdl for row in res.trace)
    assert validate_model(res.best.model, hyper.resolve(120, 12), 120, 12) is None
    assert len(res.trace) == 4000
    assert np.all((res.eta_marginals >= 0) & (res.eta_marginals <= 1))
    assert np.all(res.eta_marginals[:5] == 0)


def test_incumbent_never_worsens_with_more_iterations():
    ts = seasonal_series(4)
    values = [mh_search(ts, Hyperparams(), SearchConfig(iterations=it, seed=3)).best.bmdl for it in (50, 500, 5000)]
    assert values[0] >= values[1] >= values[2]


@pytest.mark.parametrize("seed", range(5))
def test_acceptance_rate_in_unit_interval(seed):
    res = mh_search(seasonal_series(seed), Hyperparams(), SearchConfig(iterations=20_000, seed=seed))
    assert 0.0 < res.acceptance_rate < 0.9


def test_white_noise_mostly_null():
    hits = 0
    for seed in range(20):
        ts = make_series(np.random.default_rng(100 + seed).standard_normal(150))
        res = mh_search(ts, Hyperparams(), SearchConfig(iterations=20_000, seed=seed))
        hits += res.best.model.m == 0
    assert hits >= 16


def test_step_located():
    hits = 0
    for seed in range(20):
        res = mh_search(step_series(200 + seed), Hyperparams(), SearchConfig(iterations=20_000, seed=seed))
        hits += any(58 <= t <= 62 for t in res.best.model.taus)
    assert hits >= 19


def test_warm_start_is_used():
    ts = step_series(5, n=100)
    start = ChangepointModel(100, (60,), 0, 0)
    res = mh_search(ts, Hyperparams(), SearchConfig(iterations=1, seed=0, proposal_weights=(0.0, 0.0, 1.0)), start=start)
    assert 60 in res.best.model.taus


def test_invalid_warm_start_falls_back_to_null():
    ts = step_series(5, n=100)
    chain = Chain(Scorer(ts, Hyperparams()), SearchConfig(), start=ChangepointModel(100, (3,)))
    assert chain.current == ChangepointModel(100)


def test_restricted_space_respected():
    ts, hyper = small_instance(0)
    cfg = SearchConfig(iterations=5000, seed=0, max_m=1, max_k=0, max_p=0, record_trace=True)
    res = mh_search(ts, hyper, cfg)
    assert all(r.m <= 1 and r.k == 0 and r.p == 0 for r in res.trace)


def test_count_models():
    assert count_models(15, 1, 1, 1) == 16
    assert count_models(10, 2, 2, 3) == (1 + 10 + 45) * 6


def test_exhaustive_small_count_and_min():
    x = np.random.default_rng(0).standard_normal(20)
    ts = make_series(x)
    hyper = Hyperparams()
    best = exhaustive_search(ts, hyper, max_m=1, k_values=[0], p_values=[0])
    scores = [score_model(ts, ChangepointModel(20, taus, 0, 0), hyper).bmdl for taus in [()] + [(t,) for t in range(7, 21)]]
    assert best.bmdl == min(scores)


def test_exhaustive_tie_break_prefers_fewer_changepoints():
    ts = step_series(0, n=40)
    hyper = Hyperparams(a=1e-300)
    best = exhaustive_search(ts, hyper, max_m=1, k_values=[0], p_values=[0])
    assert best.model.m == 0


def test_exhaustive_locates_step():
    for seed in range(5):
        ts = step_series(seed, n=80, tau=40, size=6.0)
        best = exhaustive_search(ts, Hyperparams(), max_m=1, k_values=[0], p_values=[0])
        assert best.model.taus and abs(best.model.taus[0] - 40) <= 1


def test_exhaustive_cap():
    ts = step_series(0, n=100)
    with pytest.raises(ValueError, match="cap"):
        exhaustive_search(ts, Hyperparams(), max_m=3)


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_matches_dense_brute_force(seed):
    ts, hyper = small_instance(seed, n=22)
    ours = exhaustive_search(ts, hyper, max_m=2, k_values=[0, 1], p_values=[0, 1])
    key, taus, k, p = brute_force_best(ts.values, max_m=2, k_values=[0, 1], p_values=[0, 1], period=6, p_max=2)
    assert ours.model.key == (taus, k, p)
    assert ours.bmdl == pytest.approx(key[0], rel=1e-9)


def test_mh_matches_exhaustive_on_small_instance():
    ts, hyper = small_instance(1)
    exact = exhaustive_search(ts, hyper, max_m=2, k_values=[0, 1], p_values=[0, 1])
    res = mh_search(ts, hyper, SearchConfig(iterations=50_000, seed=1, max_m=2, max_k=1, max_p=1))
    assert res.best.model == exact.model
    assert res.best.bmdl == exact.bmdl
