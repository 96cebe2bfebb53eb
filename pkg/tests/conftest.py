from __future__ import annotations

import numpy as np
import pytest

from bmdlcp.model import Hyperparams, TimeSeries


def make_series(values, period=12, **kw) -> TimeSeries:
    return TimeSeries(np.asarray(values, dtype=float), period=period, **kw)


def step_series(seed: int, n: int = 200, tau: int = 60, size: float = 8.0) -> TimeSeries:
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1)
    return make_series(rng.standard_normal(n) + size * (t >= tau), name=f"step{seed}")


def seasonal_series(seed: int, n: int = 200, amplitude: float = 3.0, trend: float = 0.05) -> TimeSeries:
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1)
    x = trend * t + amplitude * np.sin(2 * np.pi * t / 12) + rng.standard_normal(n)
    return make_series(x, name=f"seasonal{seed}")


@pytest.fixture
def hyper() -> Hyperparams:
    return Hyperparams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool | None, detail: str) -> None:
    """Remember one acceptance verdict (``None`` for a skip); all are printed at the end of the run."""
    verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {number:>2}: {verdict}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
