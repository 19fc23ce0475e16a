"""Batch experiments: map generation, episode batches, reveal sweeps and reports.

Every output file is written atomically and named after its (map, predictor,
fraction, trial) cell, so interrupted batches resume by skipping finished cells
and parallel execution cannot change any result.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, FileScenario, derive_seed
from .episode import EpisodeLog, NavigationParams, navigate_episode
from .grid import GoalRegion, OccupancyGrid, atomic_write_text, load_grid, save_grid
from .metrics import SummaryRow, aggregate, navigation_efficiency
from .prediction import PredictorKind
from .scenario import generate_scenario
from .sensing import UNKNOWN, ContextMap

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class MissingInputError(RuntimeError):
    """A prerequisite (maps or logs) is absent."""


# ---------------------------------------------------------------- maps

@dataclass(frozen=True)
class MapEntry:
    id: str
    file: str
    scenario: str
    index: int
    seed: int | None
    start: tuple[float, float]
    goal: tuple[float, float]
    goal_radius: float

    def load(self, maps_dir) -> tuple[OccupancyGrid, tuple[float, float], GoalRegion]:
        grid = load_grid(Path(maps_dir) / self.file)
        return grid, tuple(self.start), GoalRegion(tuple(self.goal), self.goal_radius)


def generate_maps(cfg: ExperimentConfig, out=None) -> list[MapEntry]:
    """Write ``maps/<scenario>-<k>.grid`` plus a manifest; returns the entries."""
    maps_dir = Path(out or cfg.out) / "maps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for sc in cfg.scenarios:
        if isinstance(sc, FileScenario):
            grid = load_grid(sc.file)
            e = MapEntry(f"{sc.id}-000", f"{sc.id}-000.grid", sc.id, 0, None,
                         tuple(sc.start), tuple(sc.goal), sc.goal_radius)
            save_grid(grid, maps_dir / e.file)
            entries.append(e)
            continue
        for k in range(cfg.n_maps):
            seed = derive_seed(cfg.seed, "map", sc.id, sc.seed, k)
            spec = dataclasses.replace(sc, seed=seed)
            grid, start, goal = generate_scenario(spec)
            e = MapEntry(f"{sc.id}-{k:03d}", f"{sc.id}-{k:03d}.grid", sc.id, k, seed,
                         start, tuple(goal.center), goal.radius)
            save_grid(grid, maps_dir / e.file)
            entries.append(e)
    manifest = {"seed": cfg.seed, "maps": [e.__dict__ for e in entries]}
    atomic_write_text(maps_dir / MANIFEST, json.dumps(manifest, indent=2) + "\n")
    return entries


def load_manifest(out) -> list[MapEntry]:
    path = Path(out) / "maps" / MANIFEST
    if not path.exists():
        raise MissingInputError(f"no map manifest at {path}; run 'generate' first")
    data = json.loads(path.read_text())
    return [MapEntry(**{**m, "start": tuple(m["start"]), "goal": tuple(m["goal"])}) for m in data["maps"]]


# ---------------------------------------------------------------- reveal

def reveal_context(grid: OccupancyGrid, fraction: float, seed: int, contiguous: bool = False,
                   start=None) -> ContextMap:
    """Context with exactly ``floor(fraction * cells)`` cells copied from the truth.

    Cells are chosen uniformly at random, or with ``contiguous`` as the cells
    nearest to ``start`` (a disc, ties broken by row-major index).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"reveal fraction {fraction} outside [0, 1]")
    n = grid.occupied.size
    k = int(math.floor(fraction * n))
    if contiguous:
        if start is None:
            raise ValueError("contiguous reveal needs the start position")
        rows, cols = np.indices(grid.shape)
        res = grid.resolution
        d2 = ((cols + 0.5) * res - start[0]) ** 2 + ((rows + 0.5) * res - start[1]) ** 2
        idx = np.argsort(d2.ravel(), kind="stable")[:k]
    else:
        idx = np.random.default_rng(seed).permutation(n)[:k]
    state = np.full(n, UNKNOWN, dtype=np.int8)
    state[idx] = grid.occupied.ravel()[idx]
    return ContextMap(state.reshape(grid.shape), grid.resolution)


# ---------------------------------------------------------------- episodes

@dataclass(frozen=True)
class Task:
    entry: MapEntry
    predictor: str
    trial: int
    fraction: float | None
    contiguous: bool
    seed: int
    reveal_seed: int | None
    maps_dir: str
    stem: str
    params: NavigationParams
    timing: bool


def _stem_name(map_id: str, predictor: str, trial: int, fraction: float | None) -> str:
    f = "" if fraction is None else f"__f{fraction:.3f}"
    return f"{map_id}__{predictor}{f}__t{trial:03d}"


def _run_task(task: Task) -> tuple[str, str, str | None]:
    try:
        grid, start, goal = task.entry.load(task.maps_dir)
        ctx = None
        if task.fraction is not None:
            ctx = reveal_context(grid, task.fraction, task.reveal_seed, task.contiguous, start)
        ep = navigate_episode(grid, start, goal, task.predictor, task.params, seed=task.seed,
                              initial_context=ctx, scenario_id=task.entry.id, trial=task.trial,
                              reveal_fraction=task.fraction)
        ep.save(task.stem, timing=task.timing)
        err = Path(task.stem + ".error.txt")
        if err.exists():
            err.unlink()
        return task.stem, ep.outcome, None
    except Exception:  # recorded per trial; the batch carries on
        tb = traceback.format_exc()
        atomic_write_text(task.stem + ".error.txt", tb)
        return task.stem, "error", tb


def _tasks(cfg: ExperimentConfig, out, predictors, fractions, logs_subdir: str) -> list[Task]:
    out = Path(out or cfg.out)
    entries = load_manifest(out)
    logs_dir = out / logs_subdir
    logs_dir.mkdir(parents=True, exist_ok=True)
    params = cfg.navigation()
    tasks = []
    for e in entries:
        for p in predictors:
            pred = PredictorKind.parse(p).value
            for f in fractions:
                for trial in range(cfg.trials):
                    stem = str(logs_dir / _stem_name(e.id, pred, trial, f))
                    seed = derive_seed(cfg.seed, e.id, pred, trial)
                    reveal = None if f is None else derive_seed(cfg.seed, "reveal", e.id, trial)
                    tasks.append(Task(e, pred, trial, f, cfg.contiguous_reveal, seed, reveal,
                                      str(out / "maps"), stem, params, cfg.timing))
    return tasks


@dataclass
class BatchResult:
    completed: int = 0
    skipped: int = 0
    errors: int = 0
    outcomes: dict | None = None

    @property
    def ok(self) -> bool:
        return self.errors == 0


def execute(tasks: list[Task], jobs: int = 1) -> BatchResult:
    """Run the unfinished tasks, in parallel when ``jobs > 1``."""
    todo = [t for t in tasks if not Path(t.stem + ".json").exists()]
    result = BatchResult(skipped=len(tasks) - len(todo), outcomes={})
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_task, todo))
    else:
        done = [_run_task(t) for t in todo]
    for stem, outcome, err in done:
        result.outcomes[outcome] = result.outcomes.get(outcome, 0) + 1
        if err is not None:
            result.errors += 1
            log.error("trial %s failed:\n%s", Path(stem).name, err)
        else:
            result.completed += 1
    return result


def run_batch(cfg: ExperimentConfig, out=None, predictors=None, jobs: int | None = None) -> BatchResult:
    """One episode per (map, predictor, trial) from an empty context."""
    tasks = _tasks(cfg, out, predictors or cfg.predictors, [None], "logs")
    return execute(tasks, jobs or cfg.jobs)


def sweep_batch(cfg: ExperimentConfig, out=None, predictors=None, fractions=None,
                jobs: int | None = None) -> BatchResult:
    """Episodes whose initial context reveals a fraction of the true map."""
    fractions = cfg.reveal_fractions if fractions is None else fractions
    if not fractions:
        raise ConfigError("sweep needs at least one reveal fraction")
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ConfigError(f"reveal fraction {f} outside [0, 1]")
    tasks = _tasks(cfg, out, predictors or cfg.predictors, list(fractions), "logs")
    return execute(tasks, jobs or cfg.jobs)


# ---------------------------------------------------------------- reports

SERIES = {
    "dist_to_goal.csv": "dist_to_goal",
    "explored_area.csv": "explored_m2",
    "m_acc.csv": "m_acc",
    "n_eff.csv": None,
}
PATH_LENGTH_CSV = "path_length.csv"
SERIES_HEADER = ("map_id", "predictor", "reveal_fraction", "trial", "t", "value")


def load_logs(logs_dir) -> list[EpisodeLog]:
    logs_dir = Path(logs_dir)
    stems = sorted(str(p)[: -len(".json")] for p in logs_dir.glob("*.json")) if logs_dir.is_dir() else []
    if not stems:
        raise MissingInputError(f"no episode logs in {logs_dir}")
    return [EpisodeLog.load(s) for s in stems]


def _fraction_text(f) -> str:
    return "" if f is None else repr(float(f))


def _sort_key(ep: EpisodeLog):
    return (ep.scenario_id, ep.predictor, -1.0 if ep.reveal_fraction is None else ep.reveal_fraction, ep.trial)


def report_tables(logs) -> dict[str, str]:
    """CSV text for every report file, keyed by file name."""
    logs = sorted(logs, key=_sort_key)
    tables = {}
    for name, column in SERIES.items():
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for ep in logs:
            values = navigation_efficiency(ep) if column is None else ep.series(column)
            for r, v in zip(ep.records, values):
                w.writerow([ep.scenario_id, ep.predictor, _fraction_text(ep.reveal_fraction),
                            ep.trial, r.t, repr(float(v))])
        tables[name] = buf.getvalue()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SummaryRow.HEADER)
    for row in aggregate(logs):
        w.writerow(row.as_row())
    tables[PATH_LENGTH_CSV] = buf.getvalue()
    return tables


def write_report(logs_dir, report_dir) -> list[Path]:
    tables = report_tables(load_logs(logs_dir))
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in tables.items():
        atomic_write_text(report_dir / name, text)
        paths.append(report_dir / name)
    return paths
