"""Candidate changepoint models and their design matrices.

A model is a changepoint configuration together with a harmonic order ``k``
and an AR order ``p``.  Time indices are 1-based throughout, matching the
way changepoints are reported (``t = 1`` is the first observation).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "ChangepointModel",
    "Hyperparams",
    "DesignMatrices",
    "max_harmonic_order",
    "validate_model",
    "regime_index",
    "regime_bounds",
    "build_design",
    "design_columns",
]


def max_harmonic_order(period: int) -> int:
    """Largest harmonic order that keeps the seasonal regressors non-singular."""
    return (period - 1) // 2


@dataclass(frozen=True)
class TimeSeries:
    """An equally spaced univariate series.

    Attributes:
        values: Observations ``X_1..X_n`` as a float array.
        period: Observations per seasonal cycle (12 for monthly data).
        start_label: Calendar label of the first observation, ``"YYYY-MM"``
            for monthly data, or ``None``.
        name: Free-form identifier used in reports.
    """

    values: np.ndarray
    period: int = 12
    start_label: str | None = None
    name: str = "series"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0]) + 1
            raise ValueError(f"non-finite value at t={bad}; missing values are not imputed")
        if int(self.period) < 1:
            raise ValueError("period must be >= 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "period", int(self.period))

    @property
    def n(self) -> int:
        return len(self.values)

    def prefix(self, h: int) -> "TimeSeries":
        """Observations ``1..h`` as a new series."""
        if not 1 <= h <= self.n:
            raise ValueError(f"prefix length {h} outside 1..{self.n}")
        return replace(self, values=self.values[:h])


@dataclass(frozen=True)
class Hyperparams:
    """Prior and model-space settings for scoring.

    ``nu=None`` means "use the series length" and ``k_max=None`` means
    ``floor((T - 1) / 2)``; both are resolved per series by :meth:`resolve`.
    """

    nu: float | None = None
    a: float = 1.0
    b: float = 19.0
    k_max: int | None = None
    p_max: int = 5
    min_regime_length: int = 1

    def __post_init__(self) -> None:
        if self.nu is not None and not self.nu > 0:
            raise ValueError("nu must be positive")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if self.p_max < 0:
            raise ValueError("p_max must be >= 0")
        if self.k_max is not None and self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.min_regime_length < 1:
            raise ValueError("min_regime_length must be >= 1")

    def resolve(self, n: int, period: int) -> "Hyperparams":
        """Fill in series-dependent defaults and check ``k_max`` against the period."""
        limit = max_harmonic_order(period)
        k_max = limit if self.k_max is None else self.k_max
        if k_max > limit:
            raise ValueError(f"k_max={k_max} exceeds floor((T-1)/2)={limit} for period {period}")
        nu = float(n) if self.nu is None else float(self.nu)
        return replace(self, nu=nu, k_max=k_max)

    def min_length(self) -> int:
        """Shortest series for which a non-null model can exist."""
        return self.p_max + 2 * self.min_regime_length


@dataclass(frozen=True)
class ChangepointModel:
    """A candidate model ``(eta, k, p)`` on a series of length ``n``.

    The indicator vector is stored sparsely as the sorted changepoint times
    ``taus``; :attr:`eta` materializes the 0/1 vector.
    """

    n: int
    taus: tuple[int, ...] = ()
    k: int = 0
    p: int = 0

    def __post_init__(self) -> None:
        taus = tuple(sorted(int(t) for t in self.taus))
        if len(set(taus)) != len(taus):
            raise ValueError("duplicate changepoint times")
        if taus and not (1 <= taus[0] and taus[-1] <= self.n):
            raise ValueError("changepoint times must lie in 1..n")
        object.__setattr__(self, "taus", taus)

    @classmethod
    def from_eta(cls, eta: Sequence[int] | np.ndarray, k: int = 0, p: int = 0) -> "ChangepointModel":
        eta = np.asarray(eta)
        return cls(n=len(eta), taus=tuple(int(i) + 1 for i in np.flatnonzero(eta)), k=k, p=p)

    @property
    def eta(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.int8)
        if self.taus:
            out[np.asarray(self.taus) - 1] = 1
        return out

    @property
    def m(self) -> int:
        return len(self.taus)

    @property
    def n_mu(self) -> int:
        """Number of model-specific coefficients, ``2m + 2k``."""
        return 2 * self.m + 2 * self.k

    @property
    def key(self) -> tuple[tuple[int, ...], int, int]:
        return (self.taus, self.k, self.p)

    def flip(self, t: int) -> "ChangepointModel":
        """Toggle the indicator at time ``t``."""
        if t in self.taus:
            taus = tuple(x for x in self.taus if x != t)
        else:
            taus = self.taus + (t,)
        return replace(self, taus=taus)

    def extended(self, n: int) -> "ChangepointModel":
        """The same configuration on a longer series, no new changepoints."""
        return replace(self, n=n)

    def tiebreak_key(self) -> tuple[int, int, int]:
        return (self.m, self.k, self.p)


def validate_model(
    model: ChangepointModel,
    hyper: Hyperparams,
    n: int | None = None,
    period: int | None = None,
) -> str | None:
    """Check a model against the structural constraints.

    Returns ``None`` for a valid model, otherwise a short reason.  The
    harmonic bound is the tighter of ``hyper.k_max`` and the period limit.
    """
    n = model.n if n is None else n
    if model.n != n:
        return f"model length {model.n} does not match series length {n}"
    p_max = hyper.p_max
    if model.taus and model.taus[0] <= p_max:
        return f"changepoint within first p_max times (t={model.taus[0]} <= {p_max})"
    k_max = hyper.k_max
    if period is not None:
        limit = max_harmonic_order(period)
        k_max = limit if k_max is None else min(k_max, limit)
    if model.k < 0 or (k_max is not None and model.k > k_max):
        return f"harmonic order k={model.k} out of range 0..{k_max}"
    if not 0 <= model.p <= p_max:
        return f"AR order p={model.p} out of range 0..{p_max}"
    for r, (start, end) in enumerate(regime_bounds(model.taus, n, p_max), start=1):
        if end - start + 1 < hyper.min_regime_length:
            return f"regime {r} too short ({end - start + 1} < {hyper.min_regime_length})"
    return None


def regime_index(taus: Sequence[int] | np.ndarray, t: int, *, is_eta: bool = False) -> int:
    """Regime number of time ``t`` under the rule ``tau_{r-1} <= t < tau_r``.

    ``taus`` are sorted changepoint times; pass ``is_eta=True`` to give a 0/1
    indicator vector instead.
    """
    if is_eta:
        taus = [int(i) + 1 for i in np.flatnonzero(np.asarray(taus))]
    return bisect.bisect_right(list(taus), t) + 1


def regime_bounds(taus: Sequence[int], n: int, p_max: int = 0) -> list[tuple[int, int]]:
    """Inclusive ``(start, end)`` of every regime over the fitted rows ``p_max+1..n``."""
    starts = [p_max + 1, *taus]
    ends = [t - 1 for t in taus] + [n]
    return list(zip(starts, ends))


@dataclass(frozen=True)
class DesignMatrices:
    """Baseline columns ``Z`` and model-specific columns ``D`` over rows ``p_max+1..n``."""

    Z: np.ndarray
    D: np.ndarray
    t: np.ndarray = field(repr=False)


def design_columns(taus: Iterable[int], k: int, t: np.ndarray, period: int) -> np.ndarray:
    """Model-specific regressors evaluated at arbitrary times ``t``.

    Column order: the increment pair ``(1[t in regime r], t * 1[t in regime r])``
    for regimes ``r = 2..m+1``, then ``(sin, cos)`` of ``2 pi t i / T`` for
    ``i = 1..k``.  Regime ``r`` covers ``tau_{r-1} <= t < tau_r``, so each
    increment applies only inside its own regime.
    """
    t = np.asarray(t, dtype=float)
    taus = sorted(taus)
    out = np.empty((len(t), 2 * len(taus) + 2 * k))
    bounds = taus + [math.inf]
    for j, tau in enumerate(taus):
        ind = ((t >= tau) & (t < bounds[j + 1])).astype(float)
        out[:, 2 * j] = ind
        out[:, 2 * j + 1] = ind * t
    base = 2 * len(taus)
    for i in range(1, k + 1):
        angle = 2.0 * math.pi * i * t / period
        out[:, base + 2 * (i - 1)] = np.sin(angle)
        out[:, base + 2 * (i - 1) + 1] = np.cos(angle)
    return out


def build_design(model: ChangepointModel, n: int, period: int, p_max: int) -> DesignMatrices:
    t = np.arange(p_max + 1, n + 1, dtype=float)
    Z = np.column_stack([np.ones_like(t), t])
    D = design_columns(model.taus, model.k, t, period)
    return DesignMatrices(Z=Z, D=D, t=t)
