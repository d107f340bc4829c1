"""
Experiment orchestration behind the cli verbs: single runs, parameter
sweeps, controller comparisons and their CSV artifacts.
"""

import itertools
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import structlog
from joblib import Parallel, delayed

from signal_lab.core.config import settings
from signal_lab.core.exceptions import ConfigurationError
from signal_lab.schemas.allocation import GpaParams
from signal_lab.schemas.controller import ControllerConfig
from signal_lab.schemas.results import RunResult, SummaryRow
from signal_lab.schemas.scenario import Scenario
from signal_lab.services.scenarios import SWEEP_PARAMS, apply_param, check_scenario
from signal_lab.services.simulation import aggregate_queue, run

logger = structlog.get_logger(__name__)

SUMMARY_COLUMNS = ["controller", "params", "seed", "ttt_hours", "infinite", "blocked_events", "mean_cycle_s"]
QUEUE_COLUMNS = ["t", "total_queue_veh"]

VARIANTS = ("gpa-full", "gpa-shorted", "max-pressure", "fixed-time", "prop-fair")
DEFAULT_KAPPA = 10.0
DEFAULT_MP_DURATION = 10.0
DEFAULT_PF_CYCLE = 110.0


def format_value(value: float) -> str:
    return f"{value:g}"


def point_label(point: Sequence[Tuple[str, float]]) -> str:
    return ";".join(f"{name}={format_value(value)}" for name, value in point)


# -- specs --------------------------------------------------------------------


def parse_grid(specs: Sequence[str]) -> List[Tuple[str, List[float]]]:
    """Parse ``name=v1,v2,...`` items into an ordered parameter grid."""
    grid: List[Tuple[str, List[float]]] = []
    for spec in specs:
        name, sep, raw = spec.partition("=")
        name = name.strip()
        if not sep or not name:
            raise ConfigurationError(f"parameter spec {spec!r} must look like name=v1,v2")
        if name not in SWEEP_PARAMS:
            raise ConfigurationError(f"unknown parameter {name!r}; expected one of {', '.join(SWEEP_PARAMS)}")
        if any(name == existing for existing, _ in grid):
            raise ConfigurationError(f"parameter {name!r} given twice")
        try:
            values = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"parameter {name!r}: {exc}") from exc
        if not values:
            raise ConfigurationError(f"parameter {name!r} has no values")
        grid.append((name, values))
    if not grid:
        raise ConfigurationError("parameter grid is empty")
    return grid


def parse_controller_spec(spec: str) -> Tuple[str, List[Tuple[str, float]]]:
    """Split ``variant[:name=value,...]`` into the variant and its parameters."""
    variant, _, raw = spec.partition(":")
    variant = variant.strip()
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown controller {variant!r}; expected one of {', '.join(VARIANTS)}")
    params = []
    for item in filter(None, (part.strip() for part in raw.split(","))):
        name, sep, value = item.partition("=")
        if not sep or name not in SWEEP_PARAMS:
            raise ConfigurationError(f"controller spec {spec!r}: bad parameter {item!r}")
        try:
            params.append((name, float(value)))
        except ValueError as exc:
            raise ConfigurationError(f"controller spec {spec!r}: {exc}") from exc
    return variant, params


def default_controller(variant: str, scenario: Scenario) -> ControllerConfig:
    """Controller of ``variant`` with the standard experiment settings."""
    if variant in ("gpa-full", "gpa-shorted"):
        return ControllerConfig(variant=variant, gpa=GpaParams(kappa=DEFAULT_KAPPA))
    if variant == "max-pressure":
        return ControllerConfig(variant=variant, mp_duration=DEFAULT_MP_DURATION)
    if variant == "prop-fair":
        return ControllerConfig(variant=variant, pf_cycle=DEFAULT_PF_CYCLE)
    n_phases = scenario.network.junctions[0].n_phases if scenario.network.junctions else 0
    return ControllerConfig(variant=variant, ft_durations=tuple(30.0 if i % 2 == 0 else 15.0 for i in range(n_phases)))


def with_controller(scenario: Scenario, variant: str, params: Sequence[Tuple[str, float]] = ()) -> Scenario:
    derived = scenario.model_copy(
        update={"controller": default_controller(variant, scenario), "controller_overrides": {}}
    )
    for name, value in params:
        derived = apply_param(derived, name, value)
    return check_scenario(derived)


# -- runs ---------------------------------------------------------------------


def _run_labeled(scenario: Scenario, seed: int, params: Optional[str]) -> RunResult:
    result = run(scenario, seed)
    if params is not None:
        result = result.model_copy(update={"params": params})
    return result


def _fan_out(tasks: List[Tuple[Tuple, Scenario, int, Optional[str]]], workers: int) -> List[RunResult]:
    logger.info("runs_scheduled", runs=len(tasks), workers=workers)
    results = Parallel(n_jobs=workers)(
        delayed(_run_labeled)(scenario, seed, label) for _, scenario, seed, label in tasks
    )
    keyed = sorted(zip((key for key, _, _, _ in tasks), results), key=lambda item: item[0])
    return [result for _, result in keyed]


def sweep(
    scenario: Scenario,
    grid: Sequence[Tuple[str, Sequence[float]]],
    seeds: Sequence[int],
    workers: Optional[int] = None,
) -> List[RunResult]:
    """One run per (grid point, seed), ordered by point then seed."""
    if not grid:
        raise ConfigurationError("parameter grid is empty")
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    names = [name for name, _ in grid]
    tasks = []
    for index, values in enumerate(itertools.product(*(vals for _, vals in grid))):
        point = list(zip(names, values))
        derived = scenario
        for name, value in point:
            derived = apply_param(derived, name, value)
        check_scenario(derived)
        label = point_label(point)
        tasks.extend(((index, seed), derived, seed, label) for seed in seeds)
    return _fan_out(tasks, workers or settings.WORKERS)


def compare(
    scenario: Scenario,
    specs: Sequence[str],
    seeds: Sequence[int],
    workers: Optional[int] = None,
) -> List[RunResult]:
    """Paired runs of several controllers on shared seeds, ordered by spec then seed."""
    if len(specs) < 2:
        raise ConfigurationError("compare needs at least two controllers")
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    tasks = []
    for index, spec in enumerate(specs):
        variant, params = parse_controller_spec(spec)
        derived = with_controller(scenario, variant, params)
        extra = [(name, value) for name, value in params if name in ("wrong_tr", "delta", "horizon")]
        label = ";".join(filter(None, [derived.controller.describe(), point_label(extra)]))
        tasks.extend(((index, seed), derived, seed, label) for seed in seeds)
    return _fan_out(tasks, workers or settings.WORKERS)


def ranking(results: Sequence[RunResult]) -> pd.DataFrame:
    """Controllers ordered by mean TTT over seeds; gridlocked runs count as +inf."""
    frame = pd.DataFrame(
        [{"controller": r.controller, "params": r.params, "ttt_hours": r.ttt_hours, "infinite": int(r.infinite)} for r in results]
    )
    table = (
        frame.groupby(["controller", "params"], sort=False)
        .agg(mean_ttt_hours=("ttt_hours", "mean"), runs=("ttt_hours", "size"), infinite_runs=("infinite", "sum"))
        .reset_index()
        .sort_values(["mean_ttt_hours", "controller", "params"], kind="mergesort")
        .reset_index(drop=True)
    )
    table.insert(0, "rank", range(1, len(table) + 1))
    return table


# -- CSV artifacts ------------------------------------------------------------


def summary_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    rows = [SummaryRow.from_result(r).model_dump() for r in results]
    frame = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    frame["infinite"] = frame["infinite"].astype(int)
    return frame


def write_summary(results: Sequence[RunResult], path: Path) -> Path:
    """summary.csv: a version line, then one row per run."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# signal-lab summary v{settings.SUMMARY_SCHEMA_VERSION}\n")
        summary_frame(results).to_csv(
            handle, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n"
        )
    return path


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_queue(series: Sequence[Tuple[float, float]], path: Path) -> Path:
    return _write_frame(pd.DataFrame(list(series), columns=QUEUE_COLUMNS), path)


def write_run_outputs(result: RunResult, out_dir: Path, window: Optional[float] = None) -> Dict[str, Path]:
    """queue.csv, queue_300s.csv and summary.csv for one run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return {
        "queue": write_queue(result.queue_series, out_dir / "queue.csv"),
        "queue_300s": write_queue(aggregate_queue(result.queue_series, window), out_dir / "queue_300s.csv"),
        "summary": write_summary([result], out_dir / "summary.csv"),
    }


def write_sweep_outputs(results: Sequence[RunResult], out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return {"summary": write_summary(results, out_dir / "summary.csv")}


def mean_queue_series(results: Sequence[RunResult], window: Optional[float] = None) -> pd.DataFrame:
    """Window-averaged total queue per controller, averaged over seeds."""
    frames = []
    for result in results:
        series = aggregate_queue(result.queue_series, window)
        frame = pd.DataFrame(series, columns=QUEUE_COLUMNS)
        frame.insert(0, "params", result.params)
        frame.insert(0, "controller", result.controller)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["controller", "params", *QUEUE_COLUMNS])
    combined = pd.concat(frames, ignore_index=True)
    # Shorter runs contribute zero queue after they end.
    totals = combined.groupby(["controller", "params", "t"], sort=False)["total_queue_veh"].sum().reset_index()
    totals["total_queue_veh"] /= _seed_counts(results, totals)
    return totals


def _seed_counts(results: Sequence[RunResult], frame: pd.DataFrame) -> pd.Series:
    counts: Dict[Tuple[str, str], int] = {}
    for result in results:
        key = (result.controller, result.params)
        counts[key] = counts.get(key, 0) + 1
    return pd.Series([counts[(c, p)] for c, p in zip(frame["controller"], frame["params"])], index=frame.index)


def write_compare_outputs(
    results: Sequence[RunResult], out_dir: Path, window: Optional[float] = None
) -> Dict[str, Path]:
    """summary.csv, queue_300s.csv (per controller) and ranking.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return {
        "summary": write_summary(results, out_dir / "summary.csv"),
        "queue_300s": _write_frame(mean_queue_series(results, window), out_dir / "queue_300s.csv"),
        "ranking": _write_frame(ranking(results), out_dir / "ranking.csv"),
    }


def format_ttt(result: RunResult) -> str:
    if result.infinite or math.isinf(result.ttt_hours):
        return f"inf (gridlocked at t={result.t_end:g} s, {result.in_network:g} vehicles left)"
    return f"{result.ttt_hours:.6f} h"
