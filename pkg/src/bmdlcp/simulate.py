"""Simulation scenarios and the BMDL-vs-Shewhart monitoring study."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .baseline import shewhart_monitor
from .model import Hyperparams, TimeSeries
from .monitor import MonitorConfig, MonitorOutcome, monitor_series

__all__ = [
    "ScenarioSpec",
    "CellResult",
    "MethodSummary",
    "StudyResult",
    "generate_scenario",
    "standard_grid",
    "run_study",
    "cell_seed",
]

METHODS = ("bmdl", "shewhart")
JUMPS = tuple(range(10, -11, -1))
CHANGE_SLOPES = (0.0, 0.05, 0.1, 0.2, 0.3)
FLAT_SLOPES = (0.0, 0.1, 0.2, 0.3)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario: linear segment with a break, sinusoidal season, AR(1) noise.

    The pre-change line is ``slope_before * t``; from ``cp_time`` on it
    continues with ``slope_after`` plus a level ``jump``.
    """

    n: int = 500
    cp_time: int = 60
    slope_before: float = 0.0
    slope_after: float = 0.0
    jump: float = 0.0
    phi: float = 0.3
    innovation_variance: float = 1.0
    seasonal_range: float = 6.0
    period: int = 12
    seed: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if not self.n > self.cp_time >= 1:
            raise ValueError("need 1 <= cp_time < n")
        if not abs(self.phi) < 1:
            raise ValueError("|phi| must be < 1")
        if self.seasonal_range < 0:
            raise ValueError("seasonal_range must be >= 0")
        if not self.innovation_variance > 0:
            raise ValueError("innovation_variance must be positive")

    @property
    def has_change(self) -> bool:
        return self.jump != 0 or self.slope_before != self.slope_after

    def mean(self) -> np.ndarray:
        """Noise-free signal ``L(t) + S(t)`` for ``t = 1..n``."""
        t = np.arange(1.0, self.n + 1.0)
        level = self.slope_before * t
        after = t >= self.cp_time
        level[after] = (
            self.slope_before * self.cp_time + self.slope_after * (t[after] - self.cp_time) + self.jump
        )
        season = 0.5 * self.seasonal_range * np.sin(2.0 * math.pi * t / self.period)
        return level + season


def generate_scenario(spec: ScenarioSpec, rng: np.random.Generator | None = None) -> TimeSeries:
    """Draw one realization; AR(1) errors start from their stationary law."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    sd = math.sqrt(spec.innovation_variance)
    z = rng.standard_normal(spec.n) * sd
    eps = np.empty(spec.n)
    eps[0] = z[0] / math.sqrt(1.0 - spec.phi**2)
    for i in range(1, spec.n):
        eps[i] = spec.phi * eps[i - 1] + z[i]
    return TimeSeries(spec.mean() + eps, period=spec.period, name=spec.name or "simulated")


def standard_grid(n: int = 500, phi: float = 0.3, cp_time: int = 60) -> list[ScenarioSpec]:
    """4 no-change scenarios followed by the 5 x 21 - 1 change scenarios."""
    grid = [
        ScenarioSpec(n=n, cp_time=cp_time, slope_before=s, slope_after=s, jump=0.0, phi=phi, name=f"flat_s{s:g}")
        for s in FLAT_SLOPES
    ]
    for s in CHANGE_SLOPES:
        for j in JUMPS:
            if s == 0 and j == 0:
                continue
            grid.append(
                ScenarioSpec(
                    n=n, cp_time=cp_time, slope_before=s, slope_after=-s, jump=float(j), phi=phi,
                    name=f"s{s:g}_j{j:+d}",
                )
            )
    return grid


def cell_seed(master: int, scenario: int, rep: int) -> np.random.SeedSequence:
    """Independent stream for one (scenario, rep) cell; unaffected by the rep count."""
    return np.random.SeedSequence(entropy=master, spawn_key=(scenario, rep))


@dataclass(frozen=True)
class CellResult:
    scenario: int
    name: str
    rep: int
    method: str
    has_change: bool
    detected: bool
    detection_time: int | None
    run_length: int | None


@dataclass(frozen=True)
class MethodSummary:
    scenario: int
    name: str
    method: str
    has_change: bool
    reps: int
    detections: int
    rate: float
    median_run_length: float | None


@dataclass(frozen=True)
class StudyResult:
    cells: tuple[CellResult, ...]
    summaries: tuple[MethodSummary, ...]
    pooled: dict = field(default_factory=dict)

    def summary(self, scenario: int, method: str) -> MethodSummary:
        for s in self.summaries:
            if s.scenario == scenario and s.method == method:
                return s
        raise KeyError((scenario, method))

    def to_dict(self) -> dict:
        return {"summaries": [asdict(s) for s in self.summaries], "pooled": self.pooled}


def _run_cell(args) -> list[CellResult]:
    index, spec, rep, master, methods, hyper, monitor = args
    seq = cell_seed(master, index, rep)
    data_seed, chain_seed = seq.generate_state(2, dtype=np.uint32)
    ts = generate_scenario(replace(spec, seed=int(data_seed)))
    out = []
    for method in methods:
        if method == "bmdl":
            cfg = replace(monitor, start_time=spec.cp_time, search=replace(monitor.search, seed=int(chain_seed)))
            res: MonitorOutcome = monitor_series(ts, hyper, cfg, reference_time=spec.cp_time)
        elif method == "shewhart":
            res = shewhart_monitor(ts, (1, spec.cp_time - 1), spec.cp_time, reference_time=spec.cp_time)
        else:
            raise ValueError(f"unknown method {method!r}")
        out.append(
            CellResult(index, spec.name, rep, method, spec.has_change, res.detected, res.detection_time, res.run_length)
        )
    return out


def _summarize(cells: Sequence[CellResult], grid: Sequence[ScenarioSpec], methods: Sequence[str]) -> tuple:
    summaries = []
    for index, spec in enumerate(grid):
        for method in methods:
            rows = [c for c in cells if c.scenario == index and c.method == method]
            hits = [c for c in rows if c.detected]
            lengths = [c.run_length for c in hits if c.run_length is not None]
            summaries.append(
                MethodSummary(
                    scenario=index,
                    name=spec.name,
                    method=method,
                    has_change=spec.has_change,
                    reps=len(rows),
                    detections=len(hits),
                    rate=len(hits) / len(rows) if rows else 0.0,
                    median_run_length=float(statistics.median(lengths)) if lengths else None,
                )
            )
    pooled = {}
    for method in methods:
        for label, flag in (("false_positive_rate", False), ("true_positive_rate", True)):
            rows = [c for c in cells if c.method == method and c.has_change == flag]
            if rows:
                pooled.setdefault(method, {})[label] = sum(c.detected for c in rows) / len(rows)
    return tuple(summaries), pooled


def run_study(
    grid: Sequence[ScenarioSpec],
    reps: int,
    methods: Iterable[str] = METHODS,
    seed: int = 0,
    *,
    hyper: Hyperparams | None = None,
    monitor: MonitorConfig | None = None,
    workers: int = 1,
) -> StudyResult:
    """Monitor ``reps`` realizations of every scenario with each method.

    Each (scenario, rep) cell draws its data and chain seeds from
    :func:`cell_seed`, so results do not depend on ``workers`` or on how
    many reps are requested.  The Shewhart benchmark is ``1..cp_time-1``,
    which presumes the true change time is known.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    methods = tuple(methods)
    if not grid:
        raise ValueError("empty scenario grid")
    hyper = hyper or Hyperparams()
    monitor = monitor or MonitorConfig()
    jobs = [(i, spec, r, seed, methods, hyper, monitor) for i, spec in enumerate(grid) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(job) for job in jobs]
    cells = tuple(c for chunk in chunks for c in chunk)
    summaries, pooled = _summarize(cells, grid, methods)
    return StudyResult(cells=cells, summaries=summaries, pooled=pooled)
