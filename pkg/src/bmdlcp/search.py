"""Metropolis-Hastings search over ``(eta, k, p)`` and an exhaustive oracle.

The chain takes turns among three symmetric proposals: flip one indicator
``eta_t`` for ``t`` in ``p_max+1..n``, redraw the harmonic order, or redraw
the AR order (both uniformly over the other admissible values).  A proposal
is accepted with probability ``min(1, exp(score(current) - score(proposal)))``.
The reported answer is the best-scoring model ever scored, not a posterior
summary.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ChangepointModel, Hyperparams, TimeSeries
from .scoring import ScoredModel, Scorer, ScoringError

__all__ = [
    "SearchConfig",
    "SearchResult",
    "TraceRow",
    "Chain",
    "mh_step",
    "mh_search",
    "exhaustive_search",
    "acceptance_probability",
    "count_models",
]

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 1_000_000


@dataclass(frozen=True)
class SearchConfig:
    """Settings for one Metropolis-Hastings run.

    ``max_m``, ``max_k`` and ``max_p`` optionally restrict the model space
    below the limits in :class:`~bmdlcp.model.Hyperparams`.
    """

    iterations: int = 100_000
    seed: int = 0
    proposal_weights: tuple[float, float, float] = (0.8, 0.1, 0.1)
    record_trace: bool = False
    max_m: int | None = None
    max_k: int | None = None
    max_p: int | None = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        w = self.proposal_weights
        if len(w) != 3 or any(x < 0 for x in w) or not math.isclose(sum(w), 1.0, abs_tol=1e-9):
            raise ValueError("proposal_weights must be three nonnegative numbers summing to 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    bmdl: float
    m: int
    k: int
    p: int


@dataclass(frozen=True)
class SearchResult:
    best: ScoredModel
    visited_count: int
    acceptance_rate: float
    eta_marginals: np.ndarray
    trace: tuple[TraceRow, ...] | None = None
    iterations: int = 0


def acceptance_probability(current: float, proposal: float) -> float:
    """``min(1, exp(current - proposal))`` for symmetric proposals."""
    diff = current - proposal
    return 1.0 if diff >= 0 else math.exp(diff)


class Chain:
    """Mutable chain state plus a per-search score cache.

    Randomness enters only through :meth:`step`'s three uniforms, so a
    fixed stream of uniforms fixes the whole trajectory.
    """

    def __init__(
        self,
        scorer: Scorer,
        config: SearchConfig,
        start: ChangepointModel | None = None,
    ) -> None:
        self.scorer = scorer
        hyper = scorer.hyper
        self.n = scorer.ts.n
        self.p_max = hyper.p_max
        self.min_len = hyper.min_regime_length
        self.max_m = config.max_m
        self.k_hi = hyper.k_max if config.max_k is None else min(hyper.k_max, config.max_k)
        self.p_hi = hyper.p_max if config.max_p is None else min(hyper.p_max, config.max_p)
        self.n_positions = self.n - self.p_max
        self.cache: dict[tuple, float | None] = {}
        self.best_key: tuple = (math.inf, 0, 0, 0)
        self.best_state: tuple = ((), 0, 0)

        weights = list(config.proposal_weights)
        if self.k_hi < 1:
            weights[1] = 0.0
        if self.p_hi < 1:
            weights[2] = 0.0
        if self.n_positions < 1 or self.max_m == 0:
            weights[0] = 0.0
        total = sum(weights)
        self.cum_weights = (
            (weights[0] / total, (weights[0] + weights[1]) / total) if total > 0 else None
        )

        if start is None or not self._admissible(start):
            start = ChangepointModel(self.n)
        self.taus: tuple[int, ...] = start.taus
        self.k = start.k
        self.p = start.p
        score = self._score(self.taus, self.k, self.p)
        if score is None and start.n_mu + start.p:
            self.taus, self.k, self.p = (), 0, 0
            score = self._score((), 0, 0)
        if score is None:
            raise ScoringError("the null model cannot be scored on this series")
        self.score = score
        self.accepted = 0
        self.steps = 0

    def _admissible(self, model: ChangepointModel) -> bool:
        if model.n != self.n or self.scorer.validate(model) is not None:
            return False
        if model.k > self.k_hi or model.p > self.p_hi:
            return False
        return self.max_m is None or model.m <= self.max_m

    def _score(self, taus: tuple[int, ...], k: int, p: int) -> float | None:
        key = (taus, k, p)
        try:
            return self.cache[key]
        except KeyError:
            pass
        try:
            value = self.scorer.fast_score(taus, k, p)
        except ScoringError as exc:
            log.debug("proposal %s rejected: %s", key, exc)
            value = None
        self.cache[key] = value
        if value is not None:
            cand = (value, len(taus), k, p)
            if cand < self.best_key:
                self.best_key = cand
                self.best_state = key
        return value

    def _flip(self, t: int) -> tuple[int, ...] | None:
        taus = self.taus
        i = bisect.bisect_left(taus, t)
        if i < len(taus) and taus[i] == t:
            return taus[:i] + taus[i + 1 :]
        if self.max_m is not None and len(taus) >= self.max_m:
            return None
        left = taus[i - 1] if i > 0 else self.p_max + 1
        right = taus[i] if i < len(taus) else self.n + 1
        if t - left < self.min_len or right - t < self.min_len:
            return None
        return taus[:i] + (t,) + taus[i:]

    @staticmethod
    def _redraw(current: int, hi: int, u: float) -> int:
        # uniform over {0..hi} without the current value
        j = int(u * hi)
        return j + 1 if j >= current else j

    def propose(self, u_move: float, u_value: float) -> tuple[str, tuple[tuple[int, ...], int, int] | None]:
        """Map two uniforms to a proposal; ``None`` marks an inadmissible one."""
        if self.cum_weights is None:
            return "eta", None
        w_eta, w_k = self.cum_weights
        if u_move < w_eta:
            t = self.p_max + 1 + int(u_value * self.n_positions)
            taus = self._flip(t)
            return "eta", None if taus is None else (taus, self.k, self.p)
        if u_move < w_k:
            return "k", (self.taus, self._redraw(self.k, self.k_hi, u_value), self.p)
        return "p", (self.taus, self.k, self._redraw(self.p, self.p_hi, u_value))

    def step(self, u_move: float, u_value: float, u_accept: float) -> bool:
        """One Metropolis-Hastings update; returns whether the proposal was accepted."""
        self.steps += 1
        _, prop = self.propose(u_move, u_value)
        if prop is None:
            return False
        value = self._score(*prop)
        if value is None:
            return False
        diff = self.score - value
        if diff >= 0 or u_accept < math.exp(diff):
            self.taus, self.k, self.p = prop
            self.score = value
            self.accepted += 1
            return True
        return False

    @property
    def current(self) -> ChangepointModel:
        return ChangepointModel(self.n, self.taus, self.k, self.p)

    def best_model(self) -> ChangepointModel:
        taus, k, p = self.best_state
        return ChangepointModel(self.n, taus, k, p)


def mh_step(
    current: ScoredModel,
    ts: TimeSeries,
    hyper: Hyperparams,
    rng: np.random.Generator,
    config: SearchConfig | None = None,
) -> tuple[ScoredModel, bool]:
    """Advance one step from ``current``; returns the next state and whether it moved."""
    chain = Chain(Scorer(ts, hyper), config or SearchConfig(), start=current.model)
    accepted = chain.step(*rng.random(3))
    if not accepted:
        return current, False
    return chain.scorer.score(chain.current), True


def mh_search(
    ts: TimeSeries,
    hyper: Hyperparams,
    config: SearchConfig,
    start: ChangepointModel | None = None,
) -> SearchResult:
    """Run the chain for ``config.iterations`` steps and return the best model seen.

    The chain starts from ``start`` when it is admissible, else from the null
    model.  All randomness is drawn up front from ``config.seed``, so equal
    inputs give bit-identical results.
    """
    scorer = Scorer(ts, hyper)
    chain = Chain(scorer, config, start=start)
    draws = np.random.default_rng(config.seed).random((config.iterations, 3))

    n = ts.n
    occupancy = np.zeros(n)
    since = {t: 0 for t in chain.taus}
    trace: list[TraceRow] | None = [] if config.record_trace else None

    for it in range(config.iterations):
        before = chain.taus
        if chain.step(draws[it, 0], draws[it, 1], draws[it, 2]) and chain.taus != before:
            for t in set(before) - set(chain.taus):
                occupancy[t - 1] += it + 1 - since.pop(t)
            for t in set(chain.taus) - set(before):
                since[t] = it + 1
        if trace is not None:
            trace.append(TraceRow(it + 1, chain.score, len(chain.taus), chain.k, chain.p))
    for t, start_it in since.items():
        occupancy[t - 1] += config.iterations + 1 - start_it
    # the start state counts as the zeroth sample
    occupancy /= config.iterations + 1

    best = scorer.score(chain.best_model(), check=False)
    visited = sum(1 for v in chain.cache.values() if v is not None)
    return SearchResult(
        best=best,
        visited_count=visited,
        acceptance_rate=chain.accepted / config.iterations,
        eta_marginals=occupancy,
        trace=tuple(trace) if trace is not None else None,
        iterations=config.iterations,
    )


def count_models(n_positions: int, max_m: int, n_k: int, n_p: int) -> int:
    """Upper bound on the enumerated model count (before regime-length filtering)."""
    return sum(math.comb(n_positions, j) for j in range(max_m + 1)) * n_k * n_p


def exhaustive_search(
    ts: TimeSeries,
    hyper: Hyperparams,
    max_m: int,
    k_values: range | list[int] | None = None,
    p_values: range | list[int] | None = None,
    cap: int = EXHAUSTIVE_CAP,
) -> ScoredModel:
    """Score every valid model in bounds and return the strict argmin.

    Ties are broken toward fewer changepoints, then lower ``k``, then lower ``p``.

    Raises
    ------
    ValueError
        If the bounded model count exceeds ``cap``.
    """
    scorer = Scorer(ts, hyper)
    h = scorer.hyper
    k_values = list(range(h.k_max + 1) if k_values is None else k_values)
    p_values = list(range(h.p_max + 1) if p_values is None else p_values)
    positions = range(h.p_max + 1, ts.n + 1)
    total = count_models(len(positions), max_m, len(k_values), len(p_values))
    if total > cap:
        raise ValueError(f"{total} candidate models exceed the enumeration cap of {cap}")

    best_key = None
    best_state = None
    for m in range(max_m + 1):
        for taus in itertools.combinations(positions, m):
            probe = ChangepointModel(ts.n, taus, 0, 0)
            if scorer.validate(probe) is not None:
                continue
            for k in k_values:
                for p in p_values:
                    if k > h.k_max or p > h.p_max:
                        continue
                    try:
                        value = scorer.fast_score(taus, k, p)
                    except ScoringError:
                        continue
                    key = (value, m, k, p)
                    if best_key is None or key < best_key:
                        best_key, best_state = key, (taus, k, p)
    if best_state is None:
        raise ScoringError("no model in bounds could be scored")
    taus, k, p = best_state
    return scorer.score(ChangepointModel(ts.n, taus, k, p), check=False)
