"""User-facing summary of a selected model: segments, seasonal and AR terms, fitted values."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import ChangepointModel, Hyperparams, TimeSeries, design_columns, regime_bounds, regime_index
from .scoring import score_model

__all__ = [
    "Segment",
    "FitResult",
    "fit_report",
    "month_label",
    "time_labels",
    "PLOT_COLUMNS",
]

PLOT_COLUMNS = ("t", "label", "observed", "linear_fit", "linear_plus_seasonal_fit", "regime")


def month_label(start_label: str, offset: int) -> str:
    """``YYYY-MM`` label ``offset`` months after ``start_label``."""
    year, month = (int(part) for part in start_label.split("-")[:2])
    total = year * 12 + (month - 1) + offset
    return f"{total // 12:04d}-{total % 12 + 1:02d}"


def time_labels(ts: TimeSeries, times) -> list[str]:
    """Calendar labels for monthly series with a start label, else the index as text."""
    if ts.period == 12 and ts.start_label:
        return [month_label(ts.start_label, int(t) - 1) for t in times]
    return [str(int(t)) for t in times]


@dataclass(frozen=True)
class Segment:
    """Regime ``start..end`` (inclusive) with line ``intercept + slope * t``."""

    start: int
    end: int
    intercept: float
    slope: float

    def line(self, t):
        return self.intercept + self.slope * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class FitResult:
    series: str
    changepoints: list[tuple[int, str]]
    segments: list[Segment]
    harmonic_order: int
    theta: np.ndarray
    ar_order: int
    phi: np.ndarray
    sigma2_hat: float
    bmdl: float
    t: np.ndarray
    labels: list[str]
    observed: np.ndarray
    linear_fit: np.ndarray
    seasonal_fit: np.ndarray
    regimes: np.ndarray

    @property
    def theta_pairs(self) -> list[tuple[float, float]]:
        """``(sin, cos)`` coefficients for harmonics ``1..k``."""
        return [(float(self.theta[2 * i]), float(self.theta[2 * i + 1])) for i in range(self.harmonic_order)]

    @property
    def linear_plus_seasonal_fit(self) -> np.ndarray:
        return self.linear_fit + self.seasonal_fit

    def to_dict(self) -> dict:
        """JSON-ready dictionary; floats are left at full precision."""
        return {
            "series": self.series,
            "changepoints": [{"t": t, "label": label} for t, label in self.changepoints],
            "segments": [
                {"start": s.start, "end": s.end, "intercept": s.intercept, "slope": s.slope} for s in self.segments
            ],
            "seasonal": {"k": self.harmonic_order, "theta": [list(pair) for pair in self.theta_pairs]},
            "ar": {"p": self.ar_order, "phi": [float(v) for v in self.phi]},
            "sigma2": self.sigma2_hat,
            "bmdl": self.bmdl,
        }

    def plot_rows(self) -> list[tuple]:
        rows = []
        for i, t in enumerate(self.t):
            rows.append(
                (
                    int(t),
                    self.labels[i],
                    float(self.observed[i]),
                    float(self.linear_fit[i]),
                    float(self.linear_fit[i] + self.seasonal_fit[i]),
                    int(self.regimes[i]),
                )
            )
        return rows

    def plot_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PLOT_COLUMNS)
        for row in self.plot_rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def summary_text(self) -> str:
        """Human-readable summary rounded to 4 decimals."""
        lines = [f"series {self.series}: {len(self.changepoints)} changepoint(s), BMDL {self.bmdl:.4f}"]
        for t, label in self.changepoints:
            lines.append(f"  changepoint t={t} ({label})")
        for r, seg in enumerate(self.segments, start=1):
            sign = "+" if seg.slope >= 0 else "-"
            lines.append(
                f"  regime {r} [{seg.start}..{seg.end}]: {seg.intercept:.4f} {sign} {abs(seg.slope):.4f} t"
            )
        if self.harmonic_order:
            pairs = ", ".join(f"({a:.4f}, {b:.4f})" for a, b in self.theta_pairs)
            lines.append(f"  seasonal k={self.harmonic_order}: {pairs}")
        else:
            lines.append("  seasonal k=0")
        if self.ar_order:
            lines.append(f"  AR p={self.ar_order}: " + ", ".join(f"{v:.4f}" for v in self.phi))
        else:
            lines.append("  AR p=0")
        lines.append(f"  sigma2 {self.sigma2_hat:.4f}")
        return "\n".join(lines)


def fit_report(ts: TimeSeries, model: ChangepointModel, hyper: Hyperparams) -> FitResult:
    """Profile-fit ``model`` on ``ts`` and express the estimates per regime.

    Regime ``r > 1`` reports the line ``(alpha_1 + alpha_r) + (beta_1 + beta_r) t``,
    since the changepoint columns are increments on the baseline.
    """
    fit = score_model(ts, model, hyper)
    p_max = hyper.p_max
    m = model.m
    intercept0, slope0 = (float(v) for v in fit.s_hat)
    mu = np.asarray(fit.mu_hat, dtype=float)

    segments = []
    for r, (start, end) in enumerate(regime_bounds(model.taus, ts.n, p_max), start=1):
        da = db = 0.0
        if r > 1:
            da, db = float(mu[2 * (r - 2)]), float(mu[2 * (r - 2) + 1])
        segments.append(Segment(start=start, end=end, intercept=intercept0 + da, slope=slope0 + db))

    t = np.arange(p_max + 1, ts.n + 1)
    regimes = np.array([regime_index(model.taus, int(v)) for v in t], dtype=int)
    linear = np.empty(len(t))
    for r, seg in enumerate(segments, start=1):
        mask = regimes == r
        linear[mask] = seg.line(t[mask])
    theta = mu[2 * m :].copy()
    if model.k:
        seasonal = design_columns((), model.k, t, ts.period) @ theta
    else:
        seasonal = np.zeros(len(t))

    labels = time_labels(ts, t)
    cps = [(int(tau), label) for tau, label in zip(model.taus, time_labels(ts, model.taus))]
    return FitResult(
        series=ts.name,
        changepoints=cps,
        segments=segments,
        harmonic_order=model.k,
        theta=theta,
        ar_order=model.p,
        phi=np.asarray(fit.phi_hat, dtype=float).copy(),
        sigma2_hat=float(fit.sigma2_hat),
        bmdl=float(fit.bmdl),
        t=t,
        labels=labels,
        observed=ts.values[p_max:].copy(),
        linear_fit=linear,
        seasonal_fit=seasonal,
        regimes=regimes,
    )
