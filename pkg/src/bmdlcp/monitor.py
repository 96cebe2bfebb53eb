"""Online monitoring: rerun the search each time one more observation arrives.

At horizon ``h`` the search sees exactly ``X_1..X_h``.  Monitoring stops at
the first horizon whose best model contains a changepoint; the run length
is that horizon minus the reference (true change) time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from .model import ChangepointModel, Hyperparams, TimeSeries
from .search import SearchConfig, SearchResult, mh_search

__all__ = ["MonitorConfig", "MonitorState", "MonitorOutcome", "monitor_series", "horizon_seed"]


@dataclass(frozen=True)
class MonitorConfig:
    """Online monitoring settings.

    ``search.iterations`` is the budget at ``start_time``; with
    ``scale_with_length`` it grows in proportion to the prefix length, capped
    at ``max_iterations``.  ``recency_window=w`` only counts changepoints in
    the last ``w`` observations as a detection; ``None`` counts any.
    """

    start_time: int = 60
    search: SearchConfig = field(default_factory=lambda: SearchConfig(iterations=10_000))
    scale_with_length: bool = True
    max_iterations: int = 100_000
    recency_window: int | None = None
    warm_start: bool = True

    def iterations_at(self, h: int) -> int:
        base = self.search.iterations
        if not self.scale_with_length:
            return base
        return max(1, min(self.max_iterations, math.ceil(base * h / self.start_time)))

    def check(self, hyper: Hyperparams) -> None:
        if self.start_time <= hyper.p_max + hyper.min_regime_length:
            raise ValueError(
                f"start_time {self.start_time} must exceed p_max + min_regime_length "
                f"= {hyper.p_max + hyper.min_regime_length}"
            )


@dataclass(frozen=True)
class MonitorState:
    """Where a monitoring run stopped: the next horizon and the chain's warm start."""

    next_horizon: int
    warm: tuple[tuple[int, ...], int, int] | None = None


@dataclass(frozen=True)
class MonitorOutcome:
    detected: bool
    detection_time: int | None = None
    detected_changepoints: tuple[int, ...] = ()
    run_length: int | None = None
    rule: int | None = None
    last_horizon: int | None = None
    state: MonitorState | None = None

    @classmethod
    def detection(
        cls,
        h: int,
        changepoints: tuple[int, ...],
        reference_time: int | None,
        *,
        rule: int | None = None,
        last_horizon: int | None = None,
    ) -> "MonitorOutcome":
        run_length = None
        if reference_time is not None and reference_time <= h:
            run_length = h - reference_time
        return cls(
            detected=True,
            detection_time=h,
            detected_changepoints=tuple(changepoints),
            run_length=run_length,
            rule=rule,
            last_horizon=h if last_horizon is None else last_horizon,
        )

    @classmethod
    def none(cls, *, last_horizon: int | None = None, state: MonitorState | None = None) -> "MonitorOutcome":
        return cls(detected=False, last_horizon=last_horizon, state=state)


def horizon_seed(seed: int, h: int) -> int:
    return seed ^ h


def _is_detection(result: SearchResult, h: int, window: int | None) -> bool:
    taus = result.best.model.taus
    if window is None:
        return bool(taus)
    return any(t > h - window for t in taus)


def monitor_series(
    ts: TimeSeries,
    hyper: Hyperparams,
    config: MonitorConfig,
    reference_time: int | None = None,
    *,
    state: MonitorState | None = None,
    observer: Callable[[int, TimeSeries, SearchResult], None] | None = None,
) -> MonitorOutcome:
    """Monitor ``ts`` from ``config.start_time`` (or a saved ``state``) to its end.

    Each horizon ``h`` runs :func:`~bmdlcp.search.mh_search` on the prefix
    ``1..h`` with seed ``search.seed XOR h``, warm-started from the previous
    horizon's best model.  ``observer(h, prefix, result)`` is called after
    every search.
    """
    config.check(hyper)
    n = ts.n
    first = config.start_time if state is None else state.next_horizon
    if n < config.start_time:
        raise ValueError(f"series length {n} is shorter than start_time {config.start_time}")
    warm = None if state is None else state.warm
    for h in range(first, n + 1):
        prefix = ts.prefix(h)
        start = None
        if config.warm_start and warm is not None:
            start = ChangepointModel(h, *warm)
        search_cfg = replace(
            config.search, iterations=config.iterations_at(h), seed=horizon_seed(config.search.seed, h)
        )
        result = mh_search(prefix, hyper, search_cfg, start=start)
        if observer is not None:
            observer(h, prefix, result)
        if _is_detection(result, h, config.recency_window):
            return MonitorOutcome.detection(h, result.best.model.taus, reference_time)
        warm = result.best.model.key
    return MonitorOutcome.none(last_horizon=n, state=MonitorState(next_horizon=n + 1, warm=warm))
