"""Multiple-changepoint detection for seasonal series with autocorrelated errors.

Models are scored with a Bayesian minimum description length (BMDL) criterion
and searched with a Metropolis-Hastings chain over changepoint configurations,
harmonic order and AR order.
"""

from __future__ import annotations

from .arnoise import ArFit, estimate_ar, whiten
from .baseline import BenchmarkStats, benchmark_stats, shewhart_alert, shewhart_monitor
from .model import ChangepointModel, Hyperparams, TimeSeries, validate_model
from .monitor import MonitorConfig, MonitorOutcome, MonitorState, monitor_series
from .report import FitResult, fit_report
from .scoring import ScoredModel, ScoringError, bmdl_score, profile_fit, score_model
from .search import SearchConfig, SearchResult, exhaustive_search, mh_search
from .simulate import ScenarioSpec, StudyResult, generate_scenario, standard_grid, run_study

__version__ = "0.1.0"

__all__ = [
    "ArFit",
    "BenchmarkStats",
    "ChangepointModel",
    "FitResult",
    "Hyperparams",
    "MonitorConfig",
    "MonitorOutcome",
    "MonitorState",
    "ScenarioSpec",
    "ScoredModel",
    "ScoringError",
    "SearchConfig",
    "SearchResult",
    "StudyResult",
    "TimeSeries",
    "benchmark_stats",
    "bmdl_score",
    "estimate_ar",
    "exhaustive_search",
    "fit_report",
    "generate_scenario",
    "mh_search",
    "monitor_series",
    "standard_grid",
    "profile_fit",
    "run_study",
    "score_model",
    "shewhart_alert",
    "shewhart_monitor",
    "validate_model",
    "whiten",
]
