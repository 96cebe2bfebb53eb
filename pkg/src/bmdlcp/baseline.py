"""Shewhart control-chart rules used as the comparison method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TimeSeries
from .monitor import MonitorOutcome

__all__ = ["BenchmarkStats", "benchmark_stats", "shewhart_alert", "shewhart_monitor"]


@dataclass(frozen=True)
class BenchmarkStats:
    """Centerline and sigma from a benchmark window (1-based, inclusive)."""

    center: float
    sigma: float
    window: tuple[int, int]


def benchmark_stats(ts: TimeSeries | np.ndarray, window: tuple[int, int]) -> BenchmarkStats:
    values = ts.values if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=float)
    start, end = window
    if not (1 <= start and end <= len(values)):
        raise ValueError(f"benchmark window {window} outside 1..{len(values)}")
    if end - start + 1 < 2:
        raise ValueError("benchmark window needs at least 2 points")
    segment = values[start - 1 : end]
    sigma = float(np.std(segment, ddof=1))
    if not sigma > 0:
        raise ValueError("benchmark window has zero variance")
    return BenchmarkStats(center=float(np.mean(segment)), sigma=sigma, window=(start, end))


def shewhart_alert(recent: np.ndarray, stats: BenchmarkStats) -> int | None:
    """Lowest-numbered rule firing on the tail of ``recent``, or ``None``.

    1. the last point is beyond 4 sigma;
    2. two of the last three points are beyond 3 sigma on the same side;
    3. the last eight points are all beyond 1 sigma on the same side.

    "Beyond" is strict.  Rules needing more points than ``recent`` holds are
    skipped.
    """
    z = (np.asarray(recent, dtype=float) - stats.center) / stats.sigma
    if len(z) >= 1 and abs(z[-1]) > 4:
        return 1
    if len(z) >= 3:
        tail = z[-3:]
        if np.count_nonzero(tail > 3) >= 2 or np.count_nonzero(tail < -3) >= 2:
            return 2
    if len(z) >= 8:
        tail = z[-8:]
        if np.all(tail > 1) or np.all(tail < -1):
            return 3
    return None


def shewhart_monitor(
    ts: TimeSeries | np.ndarray,
    window: tuple[int, int],
    start_time: int,
    reference_time: int | None = None,
) -> MonitorOutcome:
    """Scan horizons ``start_time..n`` and stop at the first alert."""
    values = ts.values if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=float)
    n = len(values)
    if not 1 <= start_time <= n:
        raise ValueError(f"start_time {start_time} outside 1..{n}")
    stats = benchmark_stats(values, window)
    for h in range(start_time, n + 1):
        rule = shewhart_alert(values[max(0, h - 8) : h], stats)
        if rule is not None:
            return MonitorOutcome.detection(h, (), reference_time, rule=rule, last_horizon=h)
    return MonitorOutcome.none(last_horizon=n)
