"""Command-line entry point: ``bmdlcp {detect,monitor,simulate,baseline}``.

Exit codes: 0 success, 2 bad input (unparseable CSV, invalid grid, series
too short), 3 scoring degeneracy on a named series.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baseline import shewhart_monitor
from .model import Hyperparams, TimeSeries
from .monitor import MonitorConfig, MonitorOutcome, MonitorState, monitor_series
from .report import fit_report
from .scoring import ScoringError
from .search import SearchConfig, mh_search
from .simulate import ScenarioSpec, standard_grid, run_study

__all__ = ["main", "read_series_csv", "InputError", "RunManifest"]

log = logging.getLogger("bmdlcp")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3

_MONTH = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")
SHEWHART_CAVEAT = (
    "Shewhart benchmark window is 1..cp_time-1, which uses the true change time "
    "and is not available in practice."
)


class InputError(ValueError):
    """Bad user input; reported with exit code 2."""


class DegenerateSeries(RuntimeError):
    def __init__(self, series: str, reason: str) -> None:
        super().__init__(f"series {series!r}: {reason}")
        self.series = series


@dataclass
class RunManifest:
    """Everything needed to rerun a command; timings are the only nondeterministic part."""

    command: str
    inputs: list[str]
    settings: dict
    version: str = __version__
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__
    timings: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> None:
        _write_text(out_dir / "manifest.json", json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- CSV input


def read_series_csv(path: str | os.PathLike, period: int = 12, name: str | None = None) -> list[TimeSeries]:
    """Parse a headed CSV into one or more series.

    Accepted layouts: ``value``; ``date,value`` with ``YYYY-MM`` dates; and
    wide ``date,a,b,...`` with one series per column.  Errors cite the file
    line number.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path}: empty file, a header row is required")
    header = [h.strip() for h in rows[0]]
    if not header or any(not h for h in header):
        raise InputError(f"{path}: line 1: empty column name in header")
    has_date = header[0].lower() == "date"
    value_cols = header[1:] if has_date else header
    if not value_cols:
        raise InputError(f"{path}: line 1: no value columns")
    if not has_date and len(value_cols) != 1:
        raise InputError(f"{path}: line 1: multi-column input needs a leading 'date' column")
    if len(set(value_cols)) != len(value_cols):
        raise InputError(f"{path}: line 1: duplicate column names")

    dates: list[str] = []
    columns: list[list[float]] = [[] for _ in value_cols]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        cells = [c.strip() for c in row]
        if has_date:
            if not _MONTH.match(cells[0]):
                raise InputError(f"{path}: line {lineno}: date {cells[0]!r} is not YYYY-MM")
            dates.append(cells[0])
            cells = cells[1:]
        for j, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise InputError(f"{path}: line {lineno}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(value):
                raise InputError(f"{path}: line {lineno}: non-finite value {cell!r}")
            columns[j].append(value)
    if not columns[0]:
        raise InputError(f"{path}: no data rows")
    start_label = None
    if dates:
        _check_monthly(path, dates)
        start_label = dates[0]
    stem = name or path.stem
    if has_date and len(value_cols) > 1:
        names = value_cols
    elif has_date and value_cols[0].lower() != "value":
        names = value_cols
    else:
        names = [stem]
    return [
        TimeSeries(np.asarray(col), period=period, start_label=start_label, name=nm)
        for nm, col in zip(names, columns)
    ]


def _check_monthly(path: Path, dates: list[str]) -> None:
    def index(d: str) -> int:
        y, m = d.split("-")
        return int(y) * 12 + int(m) - 1

    for i in range(1, len(dates)):
        if index(dates[i]) != index(dates[i - 1]) + 1:
            raise InputError(
                f"{path}: line {i + 2}: date {dates[i]} does not follow {dates[i - 1]} by one month"
            )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "series"


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------- arguments


def _hyper_from(args) -> Hyperparams:
    return Hyperparams(
        nu=args.nu, a=args.a, b=args.b, k_max=args.kmax, p_max=args.pmax, min_regime_length=args.min_regime
    )


def _add_model_flags(p: argparse.ArgumentParser, iters_default: int | None) -> None:
    g = p.add_argument_group("model and search")
    g.add_argument("--period", type=int, default=12, help="observations per seasonal cycle (default 12)")
    g.add_argument("--kmax", type=int, default=None, help="largest harmonic order (default floor((T-1)/2))")
    g.add_argument("--pmax", type=int, default=5, help="largest AR order (default 5)")
    g.add_argument("--nu", type=float, default=None, help="prior variance scale of mu (default: series length)")
    g.add_argument("--a", type=float, default=1.0, help="beta prior a (default 1)")
    g.add_argument("--b", type=float, default=19.0, help="beta prior b (default 19)")
    g.add_argument("--min-regime", type=int, default=1, help="shortest allowed regime (default 1)")
    g.add_argument("--iters", type=int, default=iters_default, help=f"chain iterations (default {iters_default})")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--workers", type=int, default=1, help="parallel worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmdlcp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log chain diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="select a changepoint model for each series in a CSV")
    p.add_argument("input", help="CSV file (value | date,value | date,s1,s2,...)")
    p.add_argument("--out", type=Path, help="output directory; without it JSON goes to stdout")
    _add_model_flags(p, 100_000)

    p = sub.add_parser("monitor", help="rerun detection at every new observation")
    p.add_argument("input", help="CSV file holding one series")
    p.add_argument("--start", type=int, required=True, help="first monitored horizon")
    p.add_argument("--reference", type=int, default=None, help="true change time for the run length")
    p.add_argument("--state", type=Path, default=None, help="state file; resumes where the last run stopped")
    p.add_argument("--max-iters", type=int, default=100_000, help="cap on per-horizon iterations")
    p.add_argument("--no-scale", action="store_true", help="use --iters at every horizon")
    p.add_argument("--out", type=Path, help="output directory; without it JSON goes to stdout")
    _add_model_flags(p, 10_000)

    p = sub.add_parser("simulate", help="run the BMDL vs Shewhart simulation study")
    p.add_argument("--grid", required=True, help="'standard' (108 scenarios) or a JSON file listing scenario objects")
    p.add_argument("--reps", type=int, required=True, help="realizations per scenario")
    p.add_argument("--n", type=int, default=500, help="series length for the standard grid (default 500)")
    p.add_argument("--phi", type=float, default=0.3, help="AR(1) coefficient for the standard grid (default 0.3)")
    p.add_argument("--methods", default="bmdl,shewhart", help="comma list from bmdl,shewhart")
    p.add_argument("--max-iters", type=int, default=100_000, help="cap on per-horizon iterations")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_model_flags(p, 10_000)

    p = sub.add_parser("baseline", help="Shewhart control-chart monitoring")
    p.add_argument("input", help="CSV file holding one series")
    p.add_argument("--window", type=int, nargs=2, required=True, metavar=("FIRST", "LAST"), help="benchmark window")
    p.add_argument("--start", type=int, required=True, help="first monitored horizon")
    p.add_argument("--reference", type=int, default=None, help="true change time for the run length")
    p.add_argument("--out", type=Path, help="output directory; without it JSON goes to stdout")
    p.add_argument("--period", type=int, default=12, help="observations per seasonal cycle (default 12)")
    return parser


# ---------------------------------------------------------------- commands


def _detect_one(job) -> dict:
    ts, hyper, config = job
    try:
        result = mh_search(ts, hyper, config)
        report = fit_report(ts, result.best.model, hyper)
    except ScoringError as exc:
        raise DegenerateSeries(ts.name, str(exc)) from None
    return {
        "report": report.to_dict(),
        "plot_csv": report.plot_csv(),
        "text": report.summary_text(),
        "acceptance_rate": result.acceptance_rate,
        "visited": result.visited_count,
    }


def cmd_detect(args) -> int:
    series = read_series_csv(args.input, period=args.period)
    hyper = _hyper_from(args)
    config = SearchConfig(iterations=args.iters, seed=args.seed)
    for ts in series:
        _check_length(ts, hyper)
    jobs = [(ts, hyper, config) for ts in series]
    t0 = time.perf_counter()
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_detect_one, jobs))
    else:
        results = [_detect_one(job) for job in jobs]
    elapsed = time.perf_counter() - t0

    if args.out is None:
        reports = [r["report"] for r in results]
        sys.stdout.write(_dumps(reports[0] if len(reports) == 1 else reports))
        return EXIT_OK
    names = _unique_names([ts.name for ts in series])
    for name, res in zip(names, results):
        _write_text(args.out / f"{name}.json", _dumps(res["report"]))
        _write_text(args.out / f"{name}_plot.csv", res["plot_csv"])
        print(res["text"])
    RunManifest(
        command="detect",
        inputs=[str(args.input)],
        settings={"hyper": asdict(hyper), "search": asdict(config), "series": [ts.name for ts in series]},
        timings={"total_seconds": elapsed},
    ).write(args.out)
    return EXIT_OK


def _unique_names(names: Sequence[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for name in names:
        base = _safe_name(name)
        count = seen.get(base, 0)
        seen[base] = count + 1
        out.append(base if count == 0 else f"{base}_{count}")
    return out


def _check_length(ts: TimeSeries, hyper: Hyperparams) -> None:
    if ts.n < hyper.p_max + 4:
        raise InputError(f"series {ts.name!r} has {ts.n} points; at least p_max + 4 = {hyper.p_max + 4} needed")


def _single(series: list[TimeSeries], path) -> TimeSeries:
    if len(series) != 1:
        raise InputError(f"{path}: expected one series, found {len(series)}")
    return series[0]


def _outcome_dict(outcome: MonitorOutcome) -> dict:
    return {
        "detected": outcome.detected,
        "detection_time": outcome.detection_time,
        "detected_changepoints": list(outcome.detected_changepoints),
        "run_length": outcome.run_length,
        "rule": outcome.rule,
        "last_horizon": outcome.last_horizon,
    }


def cmd_monitor(args) -> int:
    ts = _single(read_series_csv(args.input, period=args.period), args.input)
    hyper = _hyper_from(args)
    config = MonitorConfig(
        start_time=args.start,
        search=SearchConfig(iterations=args.iters, seed=args.seed),
        scale_with_length=not args.no_scale,
        max_iterations=args.max_iters,
    )
    if ts.n < args.start:
        raise InputError(f"series {ts.name!r} has {ts.n} points, fewer than --start {args.start}")
    try:
        config.check(hyper)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    settings = {"hyper": asdict(hyper), "monitor": asdict(config), "reference": args.reference}

    state = None
    saved = None
    if args.state is not None and args.state.exists():
        saved = json.loads(args.state.read_text())
        if saved.get("settings") != json.loads(json.dumps(settings)):
            raise InputError(f"state file {args.state} was written with different settings")
    t0 = time.perf_counter()
    if saved is not None and saved["outcome"]["detected"]:
        out = saved["outcome"]
    else:
        if saved is not None:
            warm = saved["state"]["warm"]
            state = MonitorState(
                next_horizon=saved["state"]["next_horizon"],
                warm=None if warm is None else (tuple(warm[0]), warm[1], warm[2]),
            )
            if state.next_horizon > ts.n + 1:
                raise InputError(f"state file {args.state} is ahead of the input ({ts.n} rows)")
        try:
            outcome = monitor_series(ts, hyper, config, args.reference, state=state)
        except ScoringError as exc:
            raise DegenerateSeries(ts.name, str(exc)) from None
        out = _outcome_dict(outcome)
        if args.state is not None:
            st = outcome.state
            payload = {
                "settings": settings,
                "outcome": out,
                "state": None if st is None else {"next_horizon": st.next_horizon, "warm": st.warm},
            }
            _write_text(args.state, _dumps(payload))
    elapsed = time.perf_counter() - t0
    out = {"series": ts.name, **out}
    if args.out is None:
        sys.stdout.write(_dumps(out))
    else:
        _write_text(args.out / "monitor.json", _dumps(out))
        RunManifest(
            command="monitor",
            inputs=[str(args.input)] + ([str(args.state)] if args.state else []),
            settings=settings,
            timings={"total_seconds": elapsed},
        ).write(args.out)
    return EXIT_OK


_SPEC_FIELDS = {f.name for f in fields(ScenarioSpec)}


def load_grid(spec: str, n: int, phi: float) -> list[ScenarioSpec]:
    """``standard`` (alias ``paper``) or a JSON file holding a list of scenario objects."""
    if spec in ("standard", "paper"):
        return standard_grid(n=n, phi=phi)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"grid {spec!r} is neither 'standard' nor a readable JSON file")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{path}: grid must be a non-empty JSON list of scenarios")
    grid = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise InputError(f"{path}: scenario {i} is not an object")
        unknown = set(item) - _SPEC_FIELDS
        if unknown:
            raise InputError(f"{path}: scenario {i}: unknown fields {sorted(unknown)}")
        try:
            grid.append(ScenarioSpec(**item))
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: scenario {i}: {exc}") from None
    return grid


def cmd_simulate(args) -> int:
    grid = load_grid(args.grid, args.n, args.phi)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if not methods or any(m not in ("bmdl", "shewhart") for m in methods):
        raise InputError(f"--methods must list bmdl and/or shewhart, got {args.methods!r}")
    if args.reps < 1:
        raise InputError("--reps must be >= 1")
    hyper = _hyper_from(args)
    monitor = MonitorConfig(search=SearchConfig(iterations=args.iters, seed=0), max_iterations=args.max_iters)
    for spec in grid:
        if spec.cp_time <= hyper.p_max + hyper.min_regime_length:
            raise InputError(f"scenario {spec.name or spec}: cp_time too early for p_max={hyper.p_max}")
    t0 = time.perf_counter()
    try:
        study = run_study(grid, args.reps, methods, args.seed, hyper=hyper, monitor=monitor, workers=args.workers)
    except ScoringError as exc:
        raise DegenerateSeries("simulated", str(exc)) from None
    elapsed = time.perf_counter() - t0

    lines = ["scenario,name,rep,method,detected,detection_time,run_length"]
    for c in study.cells:
        lines.append(
            ",".join(
                str(v)
                for v in (
                    c.scenario,
                    c.name,
                    c.rep,
                    c.method,
                    int(c.detected),
                    "" if c.detection_time is None else c.detection_time,
                    "" if c.run_length is None else c.run_length,
                )
            )
        )
    _write_text(args.out / "results.csv", "\n".join(lines) + "\n")
    summary = study.to_dict()
    summary["notes"] = [SHEWHART_CAVEAT] if "shewhart" in methods else []
    _write_text(args.out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    RunManifest(
        command="simulate",
        inputs=[args.grid],
        settings={
            "grid": [asdict(s) for s in grid],
            "reps": args.reps,
            "seed": args.seed,
            "methods": list(methods),
            "hyper": asdict(hyper),
            "monitor": asdict(monitor),
        },
        timings={"total_seconds": elapsed},
    ).write(args.out)
    pooled = summary["pooled"]
    for method in methods:
        rates = ", ".join(f"{k} {v:.4f}" for k, v in sorted(pooled.get(method, {}).items()))
        print(f"{method}: {rates}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    ts = _single(read_series_csv(args.input, period=args.period), args.input)
    first, last = args.window
    if not 1 <= args.start <= ts.n:
        raise InputError(f"--start {args.start} outside 1..{ts.n}")
    t0 = time.perf_counter()
    try:
        outcome = shewhart_monitor(ts, (first, last), args.start, args.reference)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = {"series": ts.name, **_outcome_dict(outcome)}
    if args.out is None:
        sys.stdout.write(_dumps(out))
    else:
        _write_text(args.out / "baseline.json", _dumps(out))
        RunManifest(
            command="baseline",
            inputs=[str(args.input)],
            settings={"window": [first, last], "start": args.start, "reference": args.reference},
            timings={"total_seconds": time.perf_counter() - t0},
        ).write(args.out)
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "monitor": cmd_monitor, "simulate": cmd_simulate, "baseline": cmd_baseline}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "iters", 1) is not None and getattr(args, "iters", 1) < 1:
            raise InputError("--iters must be >= 1")
        if getattr(args, "workers", 1) < 1:
            raise InputError("--workers must be >= 1")
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateSeries as exc:
        print(f"error: scoring degeneracy in {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
